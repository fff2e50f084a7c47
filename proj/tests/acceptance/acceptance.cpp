// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
//   acceptance [--only N[,N...]] [--cli PATH]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "enarf/checkpoint.hpp"
#include "enarf/cost.hpp"
#include "enarf/decoder.hpp"
#include "enarf/gan.hpp"
#include "enarf/gradcheck.hpp"
#include "enarf/losses.hpp"
#include "enarf/metrics.hpp"
#include "enarf/oracle.hpp"
#include "enarf/renderer.hpp"
#include "enarf/train.hpp"
#include "enarf/triplane.hpp"

using namespace enarf;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Report {
 public:
  void check(bool ok, const std::string& what) {
    pass_ = pass_ && ok;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += what + (ok ? "" : " [fail]");
  }
  Outcome outcome() const { return {pass_, detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> uniform_values(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

Vec3 uniform_vec(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Vec3(u(rng), u(rng), u(rng));
}

PoseConfig random_pose(std::mt19937_64& rng, int parts) {
  PoseConfig p;
  for (int k = 0; k < parts; ++k) {
    const Vec3 axis_angle = uniform_vec(rng, -1.5, 1.5);
    std::uniform_real_distribution<double> len(0.2, 0.6);
    p.parts.push_back({len(rng), RigidTransform{euler_xyz(axis_angle), uniform_vec(rng, -0.3, 0.3)}});
  }
  return p;
}

// ---------------------------------------------------------------------------
// 1. Concatenated-masked and decomposed baseline features agree.

Outcome criterion_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  const PosEncConfig enc;
  const int e = enc.dim();
  double worst = 0.0;
  for (int K = 1; K <= 4; ++K) {
    const auto w = uniform_values(rng, static_cast<std::size_t>(kFeatureChannels) * K * e, -0.2, 0.2);
    const auto s_w1 = uniform_values(rng, static_cast<std::size_t>(K) * kSelectorHidden * e, -0.3, 0.3);
    const auto s_b1 = uniform_values(rng, static_cast<std::size_t>(K) * kSelectorHidden, -0.1, 0.1);
    const auto s_w2 = uniform_values(rng, static_cast<std::size_t>(K) * kSelectorHidden, -1, 1);
    const auto s_b2 = uniform_values(rng, K, -0.5, 0.5);
    const NarfLinearView lin{K, e, w};
    const SelectorMlpView sel{K, e, s_w1, s_b1, s_w2, s_b2};
    const PoseConfig pose = random_pose(rng, K);
    const auto frames = part_frames(pose, CanonicalPose::from_pose(random_pose(rng, K)), false);
    for (int n = 0; n < 1000; ++n) {
      const Vec3 x = uniform_vec(rng, -0.6, 0.6);
      // Alternate between no prior and the cube prior so zero masks occur.
      const double a = n % 2 ? 1.0 / 3.0 : std::numeric_limits<double>::infinity();
      const Feature c = narf_baseline_feature(x, frames, lin, sel, enc, BaselinePath::Concatenated, a);
      const Feature d = narf_baseline_feature(x, frames, lin, sel, enc, BaselinePath::Decomposed, a);
      for (int i = 0; i < kFeatureChannels; ++i) worst = std::max(worst, std::abs(c[i] - d[i]));
    }
  }
  const double secs = seconds_since(t0);
  Report r;
  r.check(worst < 1e-10, "max |concat - decomposed| = " + num(worst) + " over K=1..4 x 1000 points");
  r.check(secs < 5.0, "runtime " + num(secs, 3) + " s");
  return r.outcome();
}

// ---------------------------------------------------------------------------
// 2. Gradients against central finite differences.

ParamStore vector_store(std::span<const double> x) {
  ParamLayout layout;
  layout.add("x", x.size());
  ParamStore p(layout);
  std::copy(x.begin(), x.end(), p.values().begin());
  return p;
}

std::vector<std::size_t> random_coords(std::mt19937_64& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(n, count));
  return all;
}

struct FdSummary {
  double max_error = 0.0;
  int kinks = 0;
  std::size_t coords = 0;
};

// Step 1e-5 on every coordinate. A coordinate above `tol` whose +-h interval
// contains a ReLU switch is a kink: its mismatch must disappear at a 100x
// smaller step, and it is reported separately instead of counted.
FdSummary fd_suite(const LossWithGrad& loss, const ParamStore& params, std::span<const std::size_t> coords,
                   double tol) {
  FdSummary s;
  s.coords = coords.size();
  for (std::size_t c : coords) {
    const std::size_t one[1] = {c};
    const double err = finite_diff_check(loss, params, one, 1e-5).max_rel_error;
    if (err >= tol && finite_diff_check(loss, params, one, 1e-7).max_rel_error < 1e-3) {
      ++s.kinks;
      continue;
    }
    s.max_error = std::max(s.max_error, err);
  }
  return s;
}

FdSummary fd_decode(std::mt19937_64& rng) {
  const DecoderWeights w0 = DecoderWeights::random(kFeatureChannels, 5);
  const auto f0 = uniform_values(rng, kFeatureChannels, -1, 1);
  const auto proj = uniform_values(rng, 4, -1, 1);
  // x = [f, w1, b1, w2, b2]
  std::vector<double> x(f0);
  for (const auto* v : {&w0.w1, &w0.b1, &w0.w2, &w0.b2}) x.insert(x.end(), v->begin(), v->end());
  const std::size_t n1 = w0.w1.size(), nb1 = w0.b1.size(), n2 = w0.w2.size();
  const LossWithGrad loss = [&](const ParamStore& ps, GradStore* grad) {
    const auto v = ps.values();
    const double* f = v.data();
    const double* w1 = f + kFeatureChannels;
    const DecoderView dec{kFeatureChannels, {w1, n1}, {w1 + n1, nb1}, {w1 + n1 + nb1, n2}, {w1 + n1 + nb1 + n2, 4}};
    DecoderTrace tr;
    const RadianceSample s = decode_input(dec, f, &tr);
    const double out = proj[0] * s.color.x() + proj[1] * s.color.y() + proj[2] * s.color.z() + proj[3] * s.density;
    if (grad) {
      auto g = grad->values();
      std::fill(g.begin(), g.end(), 0.0);
      double* gw1 = g.data() + kFeatureChannels;
      decode_backward(dec, f, tr, Vec3(proj[0], proj[1], proj[2]), proj[3],
                      DecoderGrad{gw1, gw1 + n1, gw1 + n1 + nb1, gw1 + n1 + nb1 + n2}, g.data());
    }
    return out;
  };
  const ParamStore p = vector_store(x);
  return fd_suite(loss, p, random_coords(rng, x.size(), 200), 1e-5);
}

FdSummary fd_composite(std::mt19937_64& rng) {
  const int n = 64;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = 1.0 + 2.0 * (i + 0.5) / n;
  const double t_far = 3.0;
  // x = [sigma (n), color (3n)]
  std::vector<double> x = uniform_values(rng, n, 0.0, 6.0);
  const auto c = uniform_values(rng, 3 * n, 0.0, 1.0);
  x.insert(x.end(), c.begin(), c.end());
  const Vec3 g_rgb = uniform_vec(rng, -1, 1);
  std::uniform_real_distribution<double> u(-1, 1);
  const double g_mask = u(rng), g_depth = u(rng);
  const LossWithGrad loss = [&](const ParamStore& ps, GradStore* grad) {
    const auto v = ps.values();
    std::vector<double> sigma(v.begin(), v.begin() + n);
    std::vector<Vec3> color(n);
    for (int i = 0; i < n; ++i) color[i] = Vec3(v[n + 3 * i], v[n + 3 * i + 1], v[n + 3 * i + 2]);
    const CompositeResult r = composite(t, color, sigma, t_far);
    if (grad) {
      const CompositeGrad cg = composite_backward(t, color, sigma, t_far, g_rgb, g_mask, g_depth);
      auto g = grad->values();
      for (int i = 0; i < n; ++i) {
        g[i] = cg.sigma[i];
        for (int d = 0; d < 3; ++d) g[n + 3 * i + d] = cg.color[i][d];
      }
    }
    return g_rgb.dot(r.rgb) + g_mask * r.mask + g_depth * r.inv_depth;
  };
  return fd_suite(loss, vector_store(x), random_coords(rng, x.size(), 200), 1e-5);
}

// Tri-plane lookup through the field (features, logits and the decoder head)
// at a set of posed points.
FdSummary fd_feature_at(std::mt19937_64& rng) {
  ModelConfig cfg;
  cfg.variant = Variant::Enarf;
  cfg.shape = {8, 1.0, 3};
  cfg.seed = 9;
  const Model model(cfg);
  ParamStore params = model.init_params();
  for (double& v : params.slice(slice_names::kLogits)) v = std::uniform_real_distribution<double>(-2, 2)(rng);
  params.slice(slice_names::kDecB2)[3] = 0.5;
  PoseConfig pose;
  for (int k = 0; k < 3; ++k)
    pose.parts.push_back({0.3, RigidTransform{euler_xyz(uniform_vec(rng, -0.5, 0.5)), Vec3(-0.3 + 0.3 * k, 0, 0)}});
  const CanonicalPose canon = CanonicalPose::from_pose(pose);
  std::vector<Vec3> points;
  for (int i = 0; i < 24; ++i) points.push_back(uniform_vec(rng, -0.4, 0.4));
  const Vec3 proj(0.3, -0.7, 0.5);
  const LossWithGrad loss = [&](const ParamStore& ps, GradStore* grad) {
    const FieldEvaluator field(cfg, model.views(ps), pose, canon);
    FieldTape tape;
    double out = 0.0;
    GradAccumulator acc(ps.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const RadianceSample s = field.eval(points[i], Vec3::UnitX(), grad ? &tape : nullptr, nullptr);
      out += proj.dot(s.color) + 0.2 * s.density;
      if (grad) field.backward(tape, static_cast<int>(i), proj, 0.2, GradSink{&acc, model.offsets()});
    }
    if (grad) {
      std::fill(grad->values().begin(), grad->values().end(), 0.0);
      acc.add_to(grad->values());
    }
    return out;
  };
  // Coordinates among the tri-plane entries these points actually touch.
  GradStore probe(model.layout());
  loss(params, &probe);
  std::vector<std::size_t> live;
  const ParamSlice& feats = model.layout().at(slice_names::kFeatures);
  const ParamSlice& logits = model.layout().at(slice_names::kLogits);
  for (const ParamSlice* s : {&feats, &logits})
    for (std::size_t i = s->offset; i < s->offset + s->size; ++i)
      if (probe.values()[i] != 0.0) live.push_back(i);
  std::shuffle(live.begin(), live.end(), rng);
  live.resize(std::min<std::size_t>(live.size(), 200));
  return fd_suite(loss, params, live, 1e-5);
}

FdSummary fd_bone_loss(std::mt19937_64& rng) {
  BoneImage b;
  b.width = 24;
  b.height = 24;
  b.pixels.resize(576);
  std::bernoulli_distribution on(0.3);
  for (auto& p : b.pixels) p = on(rng);
  const auto m = uniform_values(rng, 576, 0.0, 1.0);
  const LossWithGrad loss = [&](const ParamStore& ps, GradStore* grad) {
    if (!grad) return bone_loss(ps.values(), b);
    return bone_loss(ps.values(), b, grad->values());
  };
  return fd_suite(loss, vector_store(m), random_coords(rng, m.size(), 200), 1e-5);
}

FdSummary fd_dso_loss(std::mt19937_64& rng) {
  const int B = 100;
  const auto target_rgb = uniform_values(rng, 3 * B, 0, 1), target_mask = uniform_values(rng, B, 0, 1);
  std::vector<double> x = uniform_values(rng, 3 * B, 0, 1);
  const auto m = uniform_values(rng, B, 0, 1);
  x.insert(x.end(), m.begin(), m.end());
  const LossWithGrad loss = [&](const ParamStore& ps, GradStore* grad) {
    const auto v = ps.values();
    if (!grad) return dso_loss(v.first(3 * B), v.subspan(3 * B), target_rgb, target_mask);
    auto g = grad->values();
    return dso_loss(v.first(3 * B), v.subspan(3 * B), target_rgb, target_mask, g.first(3 * B), g.subspan(3 * B));
  };
  return fd_suite(loss, vector_store(x), random_coords(rng, x.size(), 200), 1e-5);
}

// Render a batch of pixels and take the training loss; fine-sample depths are
// pinned so the perturbed evaluations see the same sample positions.
FdSummary fd_pipeline(Variant v, std::mt19937_64& rng) {
  const SyntheticScene scene = make_synthetic_scene(SceneSpec{}, 0);
  RigConfig rig;
  rig.resolution = 12;
  rig.views = 2;
  const DsoDataset data = make_dso_dataset(scene, rig, 3, 0.67, 64);
  TrainConfig cfg;
  cfg.model.variant = v;
  cfg.model.shape = {6, scene.triplane_extent, scene.parts()};
  cfg.model.seed = 21;
  cfg.sampling = {8, 8};
  cfg.threads = 1;
  cfg.weights.l2 = 0.1;
  const Model model(cfg.model);
  ParamStore params = model.init_params();
  std::uniform_real_distribution<double> u(-1, 1);
  if (auto* s = params.layout().find(slice_names::kLogits))
    for (double& x : params.slice(*s)) x = 2 * u(rng);
  if (auto* s = params.layout().find(slice_names::kDefW2))
    for (double& x : params.slice(*s)) x = 0.05 * u(rng);
  params.slice(slice_names::kDecB2)[3] = 1.0;
  const Frame& frame = data.train[1];
  auto pixels = candidate_pixels(frame, data.canon, cfg.model);
  if (pixels.size() > 24) pixels.resize(24);
  std::vector<std::vector<double>> frozen;
  const LossWithGrad loss = [&](const ParamStore& ps, GradStore* grad) {
    return dso_batch_loss(model, ps, data.canon, frame, pixels, cfg, 5, grad, &frozen);
  };
  loss(params, nullptr);
  GradStore probe(model.layout());
  loss(params, &probe);
  // Random coordinates among those the batch reaches; the rest have an exact
  // zero on both sides.
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (probe.values()[i] != 0.0) live.push_back(i);
  std::shuffle(live.begin(), live.end(), rng);
  live.resize(std::min<std::size_t>(live.size(), 200));
  return fd_suite(loss, params, live, 1e-4);
}

Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  Report r;
  int kinks = 0;
  auto op = [&](const char* name, const FdSummary& s, double tol) {
    kinks += s.kinks;
    r.check(s.max_error < tol && s.coords >= 200,
            std::string(name) + " " + num(s.max_error, 2) + " (" + std::to_string(s.coords) + ")");
  };
  op("decode", fd_decode(rng), 1e-5);
  op("composite", fd_composite(rng), 1e-5);
  op("feature_at", fd_feature_at(rng), 1e-5);
  op("bone_loss", fd_bone_loss(rng), 1e-5);
  op("dso_loss", fd_dso_loss(rng), 1e-5);
  for (Variant v : {Variant::Enarf, Variant::DEnarf, Variant::NoSelector, Variant::MlpSelector,
                    Variant::BaselineNarf}) {
    const std::string name = "pipeline/" + to_string(v);
    op(name.c_str(), fd_pipeline(v, rng), 1e-4);
  }
  const double secs = seconds_since(t0);
  r.check(true, std::to_string(kinks) + " ReLU-kink coordinates set aside");
  r.check(secs < 120.0, "runtime " + num(secs, 3) + " s");
  return r.outcome();
}

// ---------------------------------------------------------------------------
// 3. Rendering against closed forms, and culling against brute force.

Outcome criterion_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Report r;
  {
    // Constant-density slab [1.2, 1.7] inside a [1, 3] ray segment.
    const int n = 512;
    const double s = 3.0, a = 1.2, b = 1.7;
    std::vector<double> t(n), sigma(n);
    std::vector<Vec3> color(n, Vec3(0.2, 0.5, 0.9));
    for (int i = 0; i < n; ++i) {
      t[i] = 1.0 + 2.0 * (i + 0.5) / n;
      sigma[i] = t[i] >= a && t[i] < b ? s : 0.0;
    }
    const CompositeResult c = composite(t, color, sigma, 3.0);
    const double want = 1.0 - std::exp(-s * (b - a));
    r.check(std::abs(c.mask - want) < 1e-3, "slab |M - closed form| = " + num(std::abs(c.mask - want), 2));
  }
  {
    const double sigma0 = 8.0, rad = 0.2;
    const std::vector<Capsule> caps{{Vec3(0, -0.5, 0), Vec3(0, 0.5, 0), rad, Vec3(1, 1, 1)}};
    double worst = 0.0;
    for (double d : {0.0, 0.07, 0.12, 0.18}) {
      Ray ray;
      ray.origin = Vec3(d, 0, -2);
      ray.direction = Vec3::UnitZ();
      ray.t_near = 1.0;
      ray.t_far = 3.0;
      const double want = 1.0 - std::exp(-sigma0 * 2 * std::sqrt(rad * rad - d * d));
      worst = std::max(worst, std::abs(oracle_ray(ray, caps, sigma0, 512).mask - want));
    }
    r.check(worst < 1e-3, "capsule chord max error " + num(worst, 2));
  }
  {
    const SyntheticScene scene = make_synthetic_scene(SceneSpec{}, 0);
    RigConfig rig;
    rig.resolution = 64;
    const Camera cam = camera_ring(rig, 1, 0.4)[0];
    double worst = 0.0;
    for (Variant v : {Variant::Enarf, Variant::NoSelector, Variant::MlpSelector}) {
      ModelConfig cfg;
      cfg.variant = v;
      cfg.shape = {16, scene.triplane_extent, scene.parts()};
      const Model model(cfg);
      ParamStore params = model.init_params();
      params.slice(slice_names::kDecB2)[3] = 2.0;
      RenderOptions opts;
      opts.threads = 1;
      opts.seed = 3;
      const RenderOutput culled = render_image(model, params, scene.pose_at(0.3), scene.canonical(), 0.3, cam, opts);
      opts.cull = false;
      const RenderOutput dense = render_image(model, params, scene.pose_at(0.3), scene.canonical(), 0.3, cam, opts);
      for (std::size_t i = 0; i < culled.rgb.size(); ++i) worst = std::max(worst, std::abs(culled.rgb[i] - dense.rgb[i]));
      for (std::size_t i = 0; i < culled.mask.size(); ++i) worst = std::max(worst, std::abs(culled.mask[i] - dense.mask[i]));
    }
    r.check(worst < 1e-6, "cull vs brute force 64x64 max " + num(worst, 2));
  }
  const double secs = seconds_since(t0);
  r.check(secs < 60.0, "runtime " + num(secs, 3) + " s");
  return r.outcome();
}

// ---------------------------------------------------------------------------
// 4-6. Training on synthetic scenes.

struct RunResult {
  EvalResult view;
  EvalResult pose;
  double seconds = 0.0;
};

struct DsoSetup {
  SceneSpec scene;
  int iterations = 5000;
  int batch = 1024;
  int triplane_resolution = 64;
  int resolution = 64;
  int views = 4;
  int frames = 10;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

RunResult train_and_eval(const DsoSetup& s, Variant v) {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticScene scene = make_synthetic_scene(s.scene, 0);
  RigConfig rig;
  rig.views = s.views;
  rig.resolution = s.resolution;
  const DsoDataset data = make_dso_dataset(scene, rig, s.frames, s.train_fraction, 256);
  TrainConfig cfg;
  cfg.model.variant = v;
  cfg.model.shape = {s.triplane_resolution, scene.triplane_extent, scene.parts()};
  cfg.model.seed = s.seed;
  cfg.batch = s.batch;
  cfg.iterations = s.iterations;
  cfg.eval_every = s.iterations;
  cfg.seed = s.seed;
  cfg.threads = 0;
  const TrainResult tr = train_dso(data, cfg);
  const Model model(cfg.model);
  RenderOptions opts;
  opts.sampling = cfg.sampling;
  opts.seed = derive_seed(cfg.seed, 3);
  RunResult out;
  out.view = evaluate(model, tr.params, data.canon, data.heldout_view, opts);
  out.pose = evaluate(model, tr.params, data.canon, data.heldout_pose, opts);
  out.seconds = seconds_since(t0);
  std::printf("  [%s on %s: view %.2f dB / %.4f, pose %.2f dB / %.4f, %.0f s]\n", to_string(v).c_str(),
              s.scene.preset.c_str(), out.view.psnr, out.view.ssim, out.pose.psnr, out.pose.ssim, out.seconds);
  std::fflush(stdout);
  return out;
}

// Scene used for the desk-scale quality run.
DsoSetup quality_setup() { return DsoSetup{}; }

DsoSetup selector_setup() {
  DsoSetup s;
  s.iterations = 2000;
  return s;
}

DsoSetup wobble_setup() {
  DsoSetup s;
  s.scene.radius_scale = 0.6;
  s.scene.wobble_amplitude = 0.5;
  s.iterations = 2000;
  return s;
}

Outcome criterion_quality() {
  const RunResult r = train_and_eval(quality_setup(), Variant::Enarf);
  Report rep;
  rep.check(r.view.psnr >= 28.0, "held-out view PSNR " + num(r.view.psnr) + " dB");
  rep.check(r.view.ssim >= 0.92, "SSIM " + num(r.view.ssim));
  rep.check(r.pose.psnr >= 25.0, "held-out pose PSNR " + num(r.pose.psnr) + " dB");
  rep.check(r.seconds < 1800.0, "runtime " + num(r.seconds, 4) + " s");
  return rep.outcome();
}

Outcome criterion_selector() {
  const DsoSetup s = selector_setup();
  const RunResult with = train_and_eval(s, Variant::Enarf);
  const RunResult without = train_and_eval(s, Variant::NoSelector);
  Report rep;
  const double gap = with.view.psnr - without.view.psnr;
  rep.check(gap >= 1.0, "held-out view PSNR enarf " + num(with.view.psnr) + " vs no-selector " +
                            num(without.view.psnr) + " (gap " + num(gap, 3) + " dB)");
  rep.check(true, "held-out pose gap " + num(with.pose.psnr - without.pose.psnr, 3) + " dB");
  return rep.outcome();
}

// Copies every slice present in both stores.
void copy_shared_slices(const ParamStore& from, ParamStore& to) {
  for (const ParamSlice& s : to.layout().slices()) {
    const ParamSlice* f = from.layout().find(s.name);
    if (f && f->size == s.size) std::copy_n(from.slice(*f).begin(), s.size, to.slice(s).begin());
  }
}

Outcome criterion_deformation() {
  Report rep;
  {
    const SyntheticScene scene = make_synthetic_scene(SceneSpec{}, 0);
    RigConfig rig;
    rig.resolution = 32;
    const Camera cam = camera_ring(rig, 1, 0.4)[0];
    ModelConfig ce;
    ce.shape = {16, scene.triplane_extent, scene.parts()};
    ce.seed = 4;
    ModelConfig cd = ce;
    cd.variant = Variant::DEnarf;
    const Model me(ce), md(cd);
    ParamStore pe = me.init_params();
    pe.slice(slice_names::kDecB2)[3] = 2.0;
    ParamStore pd = md.init_params();
    copy_shared_slices(pe, pd);
    for (const char* n : {slice_names::kDefW2, slice_names::kDefB2})
      std::fill(pd.slice(n).begin(), pd.slice(n).end(), 0.0);
    RenderOptions opts;
    opts.seed = 8;
    bool same = true;
    for (double t : {0.1, 0.5, 0.9}) {
      const RenderOutput a = render_image(me, pe, scene.pose_at(t), scene.canonical(), t, cam, opts);
      const RenderOutput b = render_image(md, pd, scene.pose_at(t), scene.canonical(), t, cam, opts);
      same = same && a.rgb == b.rgb && a.mask == b.mask && a.inv_depth == b.inv_depth;
    }
    rep.check(same, same ? "zero deformation renders bit-identical to enarf" : "zero deformation differs from enarf");
  }
  const DsoSetup s = wobble_setup();
  const RunResult e = train_and_eval(s, Variant::Enarf);
  const RunResult d = train_and_eval(s, Variant::DEnarf);
  const double gap = d.view.psnr - e.view.psnr;
  rep.check(gap >= 0.5, "wobble scene held-out view PSNR d-enarf " + num(d.view.psnr) + " vs enarf " +
                            num(e.view.psnr) + " (gap " + num(gap, 3) + " dB)");
  rep.check(true, "held-out pose gap " + num(d.pose.psnr - e.pose.psnr, 3) + " dB");
  return rep.outcome();
}

// ---------------------------------------------------------------------------
// 7. Render cost.

Outcome criterion_efficiency() {
  const auto t0 = std::chrono::steady_clock::now();
  const SyntheticScene scene = make_synthetic_scene(SceneSpec{"humanoid9"}, 0);
  RigConfig rig;
  rig.resolution = 128;
  rig.distance = 3.5;
  rig.depth_range = 1.5;
  const Camera cam = camera_ring(rig, 1, 0.4)[0];
  BenchmarkConfig cfg;
  cfg.repetitions = 3;
  cfg.threads = 1;
  cfg.resolution = 128;
  cfg.sampling = {48, 64};
  const std::vector<Variant> vs{Variant::Enarf, Variant::MlpSelector, Variant::BaselineNarf};
  const auto rep = benchmark_compare(vs, scene, cam, cfg);
  const CostReport &e = rep[0], &m = rep[1], &b = rep[2];
  std::printf("%s", format_cost_table(rep).c_str());
  Report r;
  r.check(b.flops / e.flops >= 20.0, "flops ratio baseline/enarf " + num(b.flops / e.flops, 4));
  r.check(b.seconds / e.seconds >= 2.0, "time ratio " + num(b.seconds / e.seconds, 4) + " (" +
                                            num(e.seconds, 3) + " s vs " + num(b.seconds, 3) + " s)");
  r.check(e.flops < m.flops && m.flops < b.flops, "mlp-selector flops " + num(m.flops, 3) + " in between");
  r.check(e.seconds < m.seconds && m.seconds < b.seconds, "mlp-selector time " + num(m.seconds, 3) + " s in between");
  const double secs = seconds_since(t0);
  r.check(secs < 600.0, "runtime " + num(secs, 4) + " s");
  return r.outcome();
}

// ---------------------------------------------------------------------------
// 8. Loss functions.

// Direct 2D-window SSIM, independent of the library's separable filter.
double ssim_reference(const ImageView& a, const ImageView& b) {
  const int W = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double kern[11][11], ksum = 0.0;
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) {
      kern[y][x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / (2 * sigma * sigma));
      ksum += kern[y][x];
    }
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int oy = 0; oy + W <= a.height; ++oy)
      for (int ox = 0; ox + W <= a.width; ++ox) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < W; ++y)
          for (int x = 0; x < W; ++x) {
            const double k = kern[y][x] / ksum;
            const double va = a.at(ox + x, oy + y, c), vb = b.at(ox + x, oy + y, c);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
  return total / count;
}

Outcome criterion_losses() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(808);
  Report r;
  {
    BoneImage b;
    b.width = 6;
    b.height = 5;
    b.pixels.assign(30, 0);
    for (int i : {1, 7, 8, 20, 29}) b.pixels[i] = 1;
    std::vector<double> m(30, 0.3);
    for (int i : {1, 7, 8, 20, 29}) m[i] = 1.0;
    const double l1 = bone_loss(m, b);
    const double l0 = bone_loss(std::vector<double>(30, 0.0), b);
    for (int i : {1, 7, 8, 20, 29}) m[i] = 0.5;
    const double lh = bone_loss(m, b);
    r.check(l1 == 0.0 && l0 == 1.0 && std::abs(lh - 0.25) < 1e-15,
            "bone_loss " + num(l1) + "/" + num(l0) + "/" + num(lh));
  }
  {
    const std::vector<double> half{0.5};
    const AdversarialLosses l = adversarial_losses(half, half);
    const std::vector<double> one{1.0 - 1e-12};
    const AdversarialLosses l1 = adversarial_losses(half, one);
    const auto real = uniform_values(rng, 13, 0.01, 0.99), fake = uniform_values(rng, 9, 0.01, 0.99);
    double lg = 0, lr = 0, lf = 0;
    for (double s : fake) {
      lg -= std::log(s);
      lf -= std::log(1 - s);
    }
    for (double s : real) lr -= std::log(s);
    const AdversarialLosses lm = adversarial_losses(real, fake);
    const bool ok = std::abs(l.generator - std::log(2.0)) < 1e-15 && std::abs(l.discriminator - 2 * std::log(2.0)) < 1e-15 &&
                    l1.generator < 1e-6 && std::abs(lm.generator - lg / 9) < 1e-12 &&
                    std::abs(lm.discriminator - (lr / 13 + lf / 9)) < 1e-12;
    r.check(ok, "adversarial_losses ln2 / limit / oracle");
  }
  {
    const std::vector<std::vector<double>> reals{uniform_values(rng, 12, 0, 1), uniform_values(rng, 12, 0, 1)};
    const DiscriminatorFn constant = [](std::span<const double>, std::span<double> g) {
      std::fill(g.begin(), g.end(), 0.0);
      return 0.3;
    };
    const DiscriminatorFn sum = [](std::span<const double> x, std::span<double> g) {
      std::fill(g.begin(), g.end(), 1.0);
      double s = 0;
      for (double v : x) s += v;
      return s;
    };
    const auto w = uniform_values(rng, 12, -1, 1);
    const DiscriminatorFn linear = [&](std::span<const double> x, std::span<double> g) {
      double s = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        s += w[i] * x[i];
        g[i] = w[i];
      }
      return s;
    };
    double w2 = 0;
    for (double v : w) w2 += v * v;
    const double p0 = r1_penalty(constant, reals), p1 = r1_penalty(sum, reals), p2 = r1_penalty(linear, reals);
    r.check(p0 == 0.0 && p1 == 12.0 && std::abs(p2 - w2) < 1e-9, "r1_penalty " + num(p0) + "/" + num(p1) + "/|w|^2");
  }
  {
    const std::vector<double> a(12, 0.5), b(12, 0.6);
    const double p = psnr(ImageView{2, 2, 3, a}, ImageView{2, 2, 3, b});
    r.check(std::abs(p - 20.0) < 1e-9, "psnr(MSE 0.01) = " + num(p, 12));
  }
  {
    const auto a = uniform_values(rng, 24 * 20 * 3, 0, 1);
    auto b = a;
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (double& v : b) v = std::clamp(v + u(rng), 0.0, 1.0);
    const ImageView va{24, 20, 3, a}, vb{24, 20, 3, b};
    const double self = ssim(va, va), got = ssim(va, vb), want = ssim_reference(va, vb);
    r.check(std::abs(self - 1.0) < 1e-12 && std::abs(got - want) < 1e-6,
            "ssim identical " + num(self, 12) + ", vs reference " + num(std::abs(got - want), 2));
  }
  {
    const GanSmokeResult g = gan_smoke_test(GanSmokeConfig{});
    r.check(g.steps.size() == 10 && g.finite && g.min_generator_grad_norm > 0.0,
            "GAN smoke: 10 steps, finite, min generator grad norm " + num(g.min_generator_grad_norm, 3));
  }
  const double secs = seconds_since(t0);
  r.check(secs < 60.0, "runtime " + num(secs, 3) + " s");
  return r.outcome();
}

// ---------------------------------------------------------------------------
// 9. Determinism across reruns and thread counts.

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

std::string log_text(const TrainResult& r) {
  std::ostringstream s;
  s.precision(17);
  for (const MetricRow& m : r.log)
    s << m.iteration << ',' << m.loss << ',' << m.psnr_view << ',' << m.ssim_view << ',' << m.psnr_pose << '\n';
  for (double l : r.losses) s << l << '\n';
  return s.str();
}

// Runs the CLI twice from the same manifest at different thread counts and
// compares every output file except the manifest's thread field and timings.
bool cli_rerun_identical(const std::string& cli, const std::string& command, const std::string& args,
                         std::string& detail) {
  const fs::path root = fs::temp_directory_path() / "enarf_acceptance" / command;
  fs::remove_all(root);
  const std::string a = (root / "a").string(), b = (root / "b").string();
  const std::string first = cli + " " + command + " " + args + " --threads 1 --out " + a + " >/dev/null 2>&1";
  const std::string second = cli + " " + command + " --config " + a + "/manifest.json --threads 3 --out " + b + " >/dev/null 2>&1";
  if (std::system(first.c_str()) != 0 || std::system(second.c_str()) != 0) {
    detail = command + " failed to run";
    return false;
  }
  int files = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json" || name == "timing.csv") continue;
    ++files;
    if (read_bytes(entry.path()) != read_bytes(fs::path(b) / name)) {
      detail = command + ": " + name + " differs";
      return false;
    }
  }
  detail = command + " rerun at 3 threads: " + std::to_string(files) + " files identical";
  return files > 0;
}

Outcome criterion_determinism(const std::string& cli) {
  Report r;
  const SyntheticScene scene = make_synthetic_scene(SceneSpec{}, 0);
  RigConfig rig;
  rig.resolution = 24;
  rig.views = 2;
  const DsoDataset data = make_dso_dataset(scene, rig, 4, 0.75, 64);
  for (Variant v : {Variant::Enarf, Variant::DEnarf, Variant::MlpSelector}) {
    TrainConfig cfg;
    cfg.model.variant = v;
    cfg.model.shape = {16, scene.triplane_extent, scene.parts()};
    cfg.batch = 128;
    cfg.iterations = 12;
    cfg.eval_every = 6;
    cfg.seed = 17;
    std::vector<std::string> logs, ckpts;
    std::vector<std::vector<double>> images;
    for (int threads : {1, 1, 2, 4}) {
      cfg.threads = threads;
      const TrainResult tr = train_dso(data, cfg);
      logs.push_back(log_text(tr));
      const auto bytes = checkpoint_bytes(cfg.model, tr.params, &tr.adam);
      ckpts.emplace_back(bytes.begin(), bytes.end());
      const Model model(cfg.model);
      RenderOptions opts;
      opts.threads = threads;
      opts.seed = 5;
      const Frame& f = data.heldout_pose.front();
      images.push_back(render_image(model, tr.params, f.pose, data.canon, f.time, f.camera, opts).rgb);
    }
    const bool same = std::all_of(logs.begin(), logs.end(), [&](const auto& x) { return x == logs[0]; }) &&
                      std::all_of(ckpts.begin(), ckpts.end(), [&](const auto& x) { return x == ckpts[0]; }) &&
                      std::all_of(images.begin(), images.end(), [&](const auto& x) { return x == images[0]; });
    r.check(same, to_string(v) + " logs/checkpoints/images identical at 1,1,2,4 threads");
  }
  if (cli.empty()) {
    r.check(true, "command line tool not built; CLI reruns skipped");
  } else {
    const std::pair<const char*, const char*> runs[] = {
        {"train-dso", "--iters 8 --batch 128 --resolution 24 --triplane-resolution 16 --frames 4 --views 2"},
        {"render", "--resolution 32"},
        {"sample-pose", "--seed 9 --resolution 32"},
        {"benchmark", "--resolution 16 --triplane-resolution 8 --repetitions 1 --preset capsule3-chain"},
        {"make-scene", "--preset humanoid9"},
    };
    for (const auto& [cmd, args] : runs) {
      std::string detail;
      r.check(cli_rerun_identical(cli, cmd, args, detail), detail);
    }
  }
  return r.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::string cli;
#ifdef ENARF_CLI_PATH
  cli = ENARF_CLI_PATH;
#endif
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      std::string tok;
      while (std::getline(s, tok, ',')) only.insert(std::stoi(tok));
    } else if (a == "--cli" && i + 1 < argc) {
      cli = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only N[,N...]] [--cli PATH]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"equivalence of concatenated and decomposed baseline", criterion_equivalence},
      {"gradients vs finite differences", criterion_gradients},
      {"rendering oracle", criterion_oracle},
      {"desk-scale DSO quality", criterion_quality},
      {"selector ablation", criterion_selector},
      {"deformation consistency", criterion_deformation},
      {"render efficiency", criterion_efficiency},
      {"loss functions", criterion_losses},
      {"determinism", [&] { return criterion_determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s - %s\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
