#include "enarf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <omp.h>

#include "enarf/losses.hpp"
#include "enarf/metrics.hpp"
#include "enarf/oracle.hpp"

namespace enarf {

void TrainConfig::validate() const {
  model.validate();
  if (batch < 1) throw ValidationError("batch size must be at least 1");
  if (iterations < 0) throw ValidationError("iteration count must be non-negative");
  if (weights.l2 < 0.0 || weights.bone < 0.0 || weights.r1 < 0.0)
    throw ValidationError("loss weights must be non-negative");
  if (sampling.coarse < 1 || sampling.fine < 0) throw ValidationError("invalid sample counts");
  if (chunks < 1) throw ValidationError("chunk count must be at least 1");
  if (eval_every < 1) throw ValidationError("eval_every must be at least 1");
}

void Frame::validate() const {
  camera.validate();
  pose.validate();
  const std::size_t px = static_cast<std::size_t>(camera.width) * camera.height;
  if (rgb.size() != 3 * px || mask.size() != px) throw ShapeError("frame images do not match the camera");
  for (double m : mask)
    if (!(m >= 0.0 && m <= 1.0)) throw ValidationError("frame mask must lie in [0, 1]");
}

std::vector<Camera> camera_ring(const RigConfig& rig, int count, double azimuth_offset) {
  std::vector<Camera> cams;
  const double focal = rig.focal_scale * rig.resolution;
  for (int i = 0; i < count; ++i) {
    const double az = azimuth_offset + 2.0 * kPi * i / count;
    const Vec3 dir(std::cos(rig.elevation) * std::cos(az), std::cos(rig.elevation) * std::sin(az),
                   std::sin(rig.elevation));
    cams.push_back(Camera::look_at(rig.target + rig.distance * dir, rig.target, Vec3::UnitZ(),
                                   focal, rig.resolution, rig.resolution,
                                   rig.distance - rig.depth_range, rig.distance + rig.depth_range));
  }
  return cams;
}

namespace {

Frame oracle_frame(const SyntheticScene& scene, const Camera& cam, double time, int samples) {
  Frame f;
  f.camera = cam;
  f.pose = scene.pose_at(time);
  f.time = time;
  RenderOutput r = oracle_render(scene, f.pose, cam, samples, time);
  f.rgb = std::move(r.rgb);
  f.mask = std::move(r.mask);
  return f;
}

}  // namespace

DsoDataset make_dso_dataset(const SyntheticScene& scene, const RigConfig& rig, int frames,
                            double train_fraction, int oracle_samples) {
  if (frames < 2) throw ValidationError("need at least two frames");
  if (rig.views < 1) throw ValidationError("need at least one training view");
  DsoDataset d;
  d.canon = scene.canonical();
  const auto train_cams = camera_ring(rig, rig.views, 0.0);
  const Camera held = camera_ring(rig, 1, 2.0 * kPi * rig.heldout_fraction / rig.views)[0];
  const int n_train = std::clamp(static_cast<int>(std::floor(train_fraction * frames + 1e-9)), 1, frames - 1);
  for (int j = 0; j < frames; ++j) {
    // Animations are periodic in t with period 1, so t = 1 would repeat t = 0.
    const double t = static_cast<double>(j) / frames;
    if (j < n_train) {
      for (const Camera& c : train_cams) d.train.push_back(oracle_frame(scene, c, t, oracle_samples));
      d.heldout_view.push_back(oracle_frame(scene, held, t, oracle_samples));
    } else {
      for (const Camera& c : train_cams)
        d.heldout_pose.push_back(oracle_frame(scene, c, t, oracle_samples));
    }
  }
  return d;
}

EvalResult evaluate(const Model& model, const ParamStore& params, const CanonicalPose& canon,
                    std::span<const Frame> frames, const RenderOptions& opts, int max_images) {
  EvalResult r;
  const std::size_t n = max_images > 0 ? std::min<std::size_t>(frames.size(), max_images) : frames.size();
  if (n == 0) return r;
  // Spread the subset evenly over the set.
  for (std::size_t i = 0; i < n; ++i) {
    const Frame& f = frames[i * frames.size() / n];
    const RenderOutput out = render_image(model, params, f.pose, canon, f.time, f.camera, opts);
    r.psnr += psnr(out.rgb_view(), f.rgb_view());
    r.ssim += ssim(out.rgb_view(), f.rgb_view());
  }
  r.images = static_cast<int>(n);
  r.psnr /= n;
  r.ssim /= n;
  return r;
}

std::vector<int> candidate_pixels(const Frame& frame, const CanonicalPose& canon,
                                  const ModelConfig& model) {
  // Boxes only depend on the pose, so an evaluator without parameters will do.
  const FieldEvaluator probe(model, ModelViews{}, frame.pose, canon);
  std::vector<int> out;
  const int W = frame.camera.width, H = frame.camera.height;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      if (ray_hits_any(pixel_ray(frame.camera, x, y), probe.world_boxes())) out.push_back(y * W + x);
  return out;
}

BatchGradient::BatchGradient(const Model& model, std::size_t param_count, int chunks)
    : offsets_(model.offsets()) {
  size_ = param_count;
  if (model.config().variant == Variant::DEnarf) {
    offsets_.features = param_count;
    size_ += model.config().shape.feature_count();
  }
  acc_.reserve(chunks);
  for (int c = 0; c < chunks; ++c) acc_.emplace_back(size_);
}

double BatchGradient::run(int n, int threads, const FieldEvaluator& field,
                          const std::function<double(int, RayWorkspace&, const GradSink&)>& per_ray,
                          std::span<double> out) {
  const int chunks = static_cast<int>(acc_.size());
  std::vector<double> chunk_loss(chunks, 0.0);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel num_threads(nt)
  {
    RayWorkspace ws;
    ws.record = true;
#pragma omp for schedule(dynamic, 1)
    for (int c = 0; c < chunks; ++c) {
      GradAccumulator& acc = acc_[c];
      acc.clear();
      field.touch_dense(acc, offsets_);
      const GradSink sink{&acc, offsets_};
      double sum = 0.0;
      const int lo = static_cast<int>(static_cast<long long>(n) * c / chunks);
      const int hi = static_cast<int>(static_cast<long long>(n) * (c + 1) / chunks);
      for (int i = lo; i < hi; ++i) sum += per_ray(i, ws, sink);
      chunk_loss[c] = sum;
    }
  }
  std::fill(out.begin(), out.end(), 0.0);
  double total = 0.0;
  for (int c = 0; c < chunks; ++c) {
    acc_[c].add_to(out);
    total += chunk_loss[c];
  }
  return total;
}

void finish_frame_backward(const Model& model, const ParamStore& params, const PreparedFrame& frame,
                           std::span<double> buffer, GradStore& grad) {
  namespace sn = slice_names;
  auto g = grad.values();
  const std::size_t P = params.size();
  for (std::size_t i = 0; i < P; ++i) g[i] += buffer[i];
  if (!frame.deformed()) return;
  const ModelConfig& cfg = model.config();
  const int R = cfg.shape.resolution;
  const int G = cfg.deform.grid;
  const ModelViews views = model.views(params);
  std::vector<double> grad_deform(3 * static_cast<std::size_t>(R) * R * 2, 0.0);
  warp_features_backward(R, views.triplane.features, frame.deformation().data,
                         buffer.subspan(P, cfg.shape.feature_count()), grad.slice(sn::kFeatures),
                         grad_deform);
  std::vector<double> grad_grid(deform_output_dim(cfg.deform), 0.0);
  upsample_grid_backward(G, R, grad_deform, grad_grid);
  deform_generator_backward(views.deform, frame.deform_forward(), grad_grid,
                            {grad.slice(sn::kDefW1), grad.slice(sn::kDefB1), grad.slice(sn::kDefW2),
                             grad.slice(sn::kDefB2)});
}

namespace {

struct RayLossContext {
  const Frame* frame;
  const PreparedFrame* prepared;
  std::span<const int> pixels;
  const SamplingConfig* sampling;
  std::uint64_t ray_seed;
  double inv_batch;
  std::vector<std::vector<double>>* frozen_t;
  bool frozen_filled;
};

double ray_loss(const RayLossContext& ctx, int i, RayWorkspace& ws, const GradSink* sink) {
  const Frame& f = *ctx.frame;
  const int W = f.camera.width;
  const int p = ctx.pixels[i];
  const Ray ray = pixel_ray(f.camera, p % W, p / W);
  const FieldEvaluator& field = ctx.prepared->field();
  CompositeResult r;
  bool traced = false;
  if (ray_hits_any(ray, field.world_boxes())) {
    StreamRng rng(ctx.ray_seed, static_cast<std::uint64_t>(i));
    ws.fixed_t = ctx.frozen_t != nullptr && ctx.frozen_filled ? (*ctx.frozen_t)[i].data() : nullptr;
    r = trace_ray(field, ray, *ctx.sampling, rng, ws, nullptr);
    if (ctx.frozen_t != nullptr && !ctx.frozen_filled) (*ctx.frozen_t)[i] = ws.t;
    ws.fixed_t = nullptr;
    traced = true;
  }
  Vec3 grad_rgb;
  double loss = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = r.rgb[c] - f.rgb[3 * static_cast<std::size_t>(p) + c];
    loss += d * d;
    grad_rgb[c] = 2.0 * d * ctx.inv_batch;
  }
  const double dm = r.mask - f.mask[p];
  loss += dm * dm;
  if (sink != nullptr && traced)
    backprop_ray(field, ws, grad_rgb, 2.0 * dm * ctx.inv_batch, 0.0, *sink);
  return loss * ctx.inv_batch;
}

double add_l2(const Model& model, const ParamStore& params, double weight, GradStore* grad) {
  namespace sn = slice_names;
  const ParamSlice* s = model.layout().find(sn::kFeatures);
  if (s == nullptr) return 0.0;
  const auto f = params.slice(*s);
  const ModelViews views = model.views(params);
  const double l2 = triplane_l2(views.triplane);
  if (grad != nullptr && weight != 0.0) {
    auto g = grad->slice(sn::kFeatures);
    const double scale = 2.0 * weight / static_cast<double>(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) g[i] += scale * f[i];
  }
  return l2;
}

}  // namespace

double dso_batch_loss(const Model& model, const ParamStore& params, const CanonicalPose& canon,
                      const Frame& frame, std::span<const int> pixels, const TrainConfig& cfg,
                      std::uint64_t ray_seed, GradStore* grad,
                      std::vector<std::vector<double>>* frozen_t) {
  if (pixels.empty()) throw ValidationError("empty ray batch");
  const PreparedFrame prepared(model, params, frame.pose, canon, frame.time);
  const bool filled = frozen_t != nullptr && frozen_t->size() == pixels.size();
  if (frozen_t != nullptr && !filled) frozen_t->assign(pixels.size(), {});
  const RayLossContext ctx{&frame, &prepared, pixels, &cfg.sampling, ray_seed,
                           1.0 / static_cast<double>(pixels.size()), frozen_t, filled};
  const int n = static_cast<int>(pixels.size());
  double dso = 0.0;
  if (grad != nullptr) {
    BatchGradient bg(model, params.size(), cfg.chunks);
    std::vector<double> buffer(bg.buffer_size());
    dso = bg.run(n, cfg.threads, prepared.field(),
                 [&](int i, RayWorkspace& ws, const GradSink& sink) { return ray_loss(ctx, i, ws, &sink); },
                 buffer);
    finish_frame_backward(model, params, prepared, buffer, *grad);
  } else {
    RayWorkspace ws;
    for (int i = 0; i < n; ++i) dso += ray_loss(ctx, i, ws, nullptr);
  }
  return dso + cfg.weights.l2 * add_l2(model, params, cfg.weights.l2, grad);
}

TrainResult train_dso(const DsoDataset& data, const TrainConfig& cfg, const ParamStore* init,
                      const AdamState* resume, const ProgressFn& progress) {
  cfg.validate();
  if (data.train.empty()) throw ValidationError("training needs at least one frame");
  for (const Frame& f : data.train) {
    f.validate();
    if (f.pose.size() != cfg.model.parts()) throw ShapeError("frame part count does not match model");
  }
  const Model model(cfg.model);
  TrainResult res;
  res.params = init != nullptr ? *init : model.init_params();
  if (!(res.params.layout() == model.layout())) throw ShapeError("initial parameters do not match model");
  res.adam = resume != nullptr ? *resume : AdamState(res.params.size(), cfg.adam);
  if (res.adam.m.size() != res.params.size()) throw ShapeError("optimizer state does not match model");

  std::vector<std::vector<int>> candidates;
  candidates.reserve(data.train.size());
  for (const Frame& f : data.train) candidates.push_back(candidate_pixels(f, data.canon, cfg.model));

  GradStore grad(model.layout());
  BatchGradient bg(model, res.params.size(), cfg.chunks);
  std::vector<double> buffer(bg.buffer_size());
  std::vector<int> pixels(cfg.batch);
  RenderOptions eval_opts;
  eval_opts.sampling = cfg.sampling;
  eval_opts.threads = cfg.threads;
  eval_opts.seed = derive_seed(cfg.seed, 3);
  const auto start = std::chrono::steady_clock::now();

  for (int it = static_cast<int>(res.adam.step); it < cfg.iterations; ++it) {
    StreamRng pick(derive_seed(cfg.seed, 1), static_cast<std::uint64_t>(it));
    const std::size_t fi = std::min(data.train.size() - 1,
                                    static_cast<std::size_t>(pick.uniform() * data.train.size()));
    const Frame& frame = data.train[fi];
    const auto& cand = candidates[fi];
    double dso = 0.0;
    grad.zero();
    if (!cand.empty()) {
      for (int& p : pixels)
        p = cand[std::min(cand.size() - 1, static_cast<std::size_t>(pick.uniform() * cand.size()))];
      const PreparedFrame prepared(model, res.params, frame.pose, data.canon, frame.time);
      const RayLossContext ctx{&frame, &prepared, pixels, &cfg.sampling,
                               derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(it)),
                               1.0 / cfg.batch, nullptr, false};
      dso = bg.run(cfg.batch, cfg.threads, prepared.field(),
                   [&](int i, RayWorkspace& ws, const GradSink& sink) { return ray_loss(ctx, i, ws, &sink); },
                   buffer);
      finish_frame_backward(model, res.params, prepared, buffer, grad);
    }
    const double l2 = add_l2(model, res.params, cfg.weights.l2, &grad);
    const double total = dso + cfg.weights.l2 * l2;
    if (!std::isfinite(total))
      throw NumericalError("iteration " + std::to_string(it) + ": non-finite loss");
    try {
      adam_step(res.params, grad, res.adam);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    res.losses.push_back(total);

    if ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations) {
      MetricRow row;
      row.iteration = it + 1;
      row.loss = total;
      row.dso = dso;
      row.l2 = l2;
      const EvalResult v = evaluate(model, res.params, data.canon, data.heldout_view, eval_opts, cfg.eval_images);
      const EvalResult p = evaluate(model, res.params, data.canon, data.heldout_pose, eval_opts, cfg.eval_images);
      row.psnr_view = v.psnr;
      row.ssim_view = v.ssim;
      row.psnr_pose = p.psnr;
      row.ssim_pose = p.ssim;
      res.log.push_back(row);
      res.seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      if (progress) progress(row);
    }
  }
  return res;
}

}  // namespace enarf
