#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "enarf/checkpoint.hpp"
#include "enarf/common.hpp"
#include "enarf/cost.hpp"
#include "enarf/image_io.hpp"
#include "enarf/memory.hpp"
#include "enarf/metrics.hpp"
#include "enarf/oracle.hpp"
#include "enarf/renderer.hpp"
#include "enarf/serialize.hpp"
#include "enarf/train.hpp"

using namespace enarf;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Everything a run depends on. Written back as the run manifest, which is
// itself a valid --config file.
struct RunConfig {
  std::string command;
  std::string preset = "capsule2";
  double wobble = 0.0;
  double wobble_frequency = 1.0;
  double radius_scale = 1.0;
  std::uint64_t scene_seed = 0;
  std::string scene_file;
  std::string pose_file;
  std::string camera_file;
  std::string checkpoint;
  std::string variant = "enarf";
  std::uint64_t seed = 0;
  int iters = 5000;
  int resolution = 64;
  int threads = 1;
  int triplane_resolution = 64;
  int batch = 1024;
  int views = 4;
  int frames = 10;
  double train_fraction = 0.8;
  int oracle_samples = 256;
  int coarse = 48;
  int fine = 64;
  double lr = 1e-3;
  double lr_decay = 0.99995;
  double weight_l2 = 1e-4;
  int eval_every = 1000;
  int eval_images = 0;
  double time = 0.3;
  double azimuth = 0.4;
  double pose_sigma = 0.3;
  int repetitions = 3;
  std::vector<std::string> variants{"enarf", "mlp-selector", "baseline-narf"};
  std::string out = "out";
};

#define ENARF_FIELDS(X)                                                                        \
  X(command) X(preset) X(wobble) X(wobble_frequency) X(radius_scale) X(scene_seed) X(scene_file) \
  X(pose_file) X(camera_file) X(checkpoint) X(variant) X(seed) X(iters) X(resolution) X(threads)  \
  X(triplane_resolution) X(batch) X(views) X(frames) X(train_fraction) X(oracle_samples)          \
  X(coarse) X(fine) X(lr) X(lr_decay) X(weight_l2) X(eval_every) X(eval_images) X(time)           \
  X(azimuth) X(pose_sigma) X(repetitions) X(variants)

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
#define X(f) j[#f] = c.f;
  ENARF_FIELDS(X)
#undef X
  return j;
}

void apply_json(RunConfig& c, const nlohmann::json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
#define X(f)                          \
  if (it.key() == #f) {               \
    it.value().get_to(c.f);           \
    known = true;                     \
  }
    ENARF_FIELDS(X)
#undef X
    if (!known && it.key() != "out" && it.key() != "version")
      throw ValidationError("unknown config key '" + it.key() + "'");
  }
}

void load_config_file(RunConfig& c, const std::string& path) {
  try {
    apply_json(c, nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

void write_manifest(const RunConfig& c) {
  ordered_json j;
  j["version"] = 1;
  const ordered_json fields = to_json(c);
  for (auto it = fields.begin(); it != fields.end(); ++it) j[it.key()] = it.value();
  write_text_file((fs::path(c.out) / "manifest.json").string(), j.dump(2) + "\n");
}

std::string out_path(const RunConfig& c, const std::string& name) {
  return (fs::path(c.out) / name).string();
}

SyntheticScene load_scene(const RunConfig& c) {
  if (!c.scene_file.empty()) return scene_from_json(read_text_file(c.scene_file));
  SceneSpec spec;
  spec.preset = c.preset;
  spec.wobble_amplitude = c.wobble;
  spec.wobble_frequency = c.wobble_frequency;
  spec.radius_scale = c.radius_scale;
  return make_synthetic_scene(spec, c.scene_seed);
}

RigConfig rig_of(const RunConfig& c) {
  RigConfig rig;
  rig.views = c.views;
  rig.resolution = c.resolution;
  return rig;
}

Camera load_camera(const RunConfig& c) {
  if (!c.camera_file.empty()) return camera_from_json(read_text_file(c.camera_file));
  return camera_ring(rig_of(c), 1, c.azimuth)[0];
}

PoseConfig load_pose(const RunConfig& c, const SyntheticScene& scene) {
  if (!c.pose_file.empty()) return pose_from_json(read_text_file(c.pose_file));
  return scene.pose_at(c.time);
}

TrainConfig train_config(const RunConfig& c, const SyntheticScene& scene) {
  TrainConfig t;
  t.model.variant = parse_variant(c.variant);
  t.model.shape.resolution = c.triplane_resolution;
  t.model.shape.extent = scene.triplane_extent;
  t.model.shape.parts = scene.parts();
  t.model.seed = c.seed;
  t.batch = c.batch;
  t.iterations = c.iters;
  t.weights.l2 = c.weight_l2;
  t.adam.lr = c.lr;
  t.adam.decay = c.lr_decay;
  t.sampling = {c.coarse, c.fine};
  t.seed = c.seed;
  t.eval_every = c.eval_every;
  t.eval_images = c.eval_images;
  t.threads = c.threads;
  return t;
}

void write_render(const RunConfig& c, const RenderOutput& img, const std::string& stem) {
  write_png(out_path(c, stem + "_rgb.png"), img.rgb_view());
  write_png(out_path(c, stem + "_mask.png"), img.mask_view());
  write_raw_f32(out_path(c, stem + "_rgb.f32"), img.rgb);
  write_raw_f32(out_path(c, stem + "_mask.f32"), img.mask);
  write_raw_f32(out_path(c, stem + "_inv_depth.f32"), img.inv_depth);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int cmd_make_scene(const RunConfig& c) {
  const SyntheticScene scene = load_scene(c);
  write_text_file(out_path(c, "scene.json"), scene_to_json(scene) + "\n");
  write_text_file(out_path(c, "skeleton.json"), skeleton_to_json(scene.skeleton) + "\n");
  write_text_file(out_path(c, "canonical.json"), canonical_to_json(scene.canonical()) + "\n");
  write_text_file(out_path(c, "pose.json"), pose_to_json(scene.pose_at(c.time)) + "\n");
  write_text_file(out_path(c, "camera.json"), camera_to_json(load_camera(c)) + "\n");
  return 0;
}

int cmd_sample_pose(const RunConfig& c) {
  const SyntheticScene scene = load_scene(c);
  PosePrior prior;
  prior.root = scene.root;
  for (const Vec3& a : scene.canonical_angles)
    prior.joints.push_back({a, Mat3::Identity() * (c.pose_sigma * c.pose_sigma)});
  std::mt19937_64 rng(c.seed);
  const PoseSample s = sample_pose_gaussian(prior, scene.skeleton, scene.lengths, rng);
  write_text_file(out_path(c, "pose.json"), pose_to_json(s.pose) + "\n");
  const Camera cam = load_camera(c);
  const BoneImage bones = rasterize_bones(s.pose, scene.skeleton, cam);
  std::vector<double> px(bones.pixels.begin(), bones.pixels.end());
  write_png(out_path(c, "bones.png"), ImageView{bones.width, bones.height, 1, px});
  const RenderOutput img = oracle_render(scene, s.pose, cam, c.oracle_samples);
  write_render(c, img, "oracle");
  return 0;
}

int cmd_render(const RunConfig& c) {
  const SyntheticScene scene = load_scene(c);
  const PoseConfig pose = load_pose(c, scene);
  const Camera cam = load_camera(c);
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream stats_csv;
  if (c.checkpoint.empty()) {
    write_render(c, oracle_render(scene, pose, cam, c.oracle_samples), "oracle");
  } else {
    const Checkpoint ck = load_checkpoint(c.checkpoint);
    const Model model(ck.config);
    RenderOptions opts;
    opts.sampling = {c.coarse, c.fine};
    opts.threads = c.threads;
    opts.seed = c.seed;
    RenderStats st;
    const RenderOutput img = render_image(model, ck.params, pose, scene.canonical(), c.time, cam, opts, &st);
    write_render(c, img, "render");
    const FlopBreakdown fl = count_flops(ck.config.variant, ck.config, opts.sampling, st);
    stats_csv << "rays,rays_traced,samples,active_samples,flops\n"
              << st.rays << ',' << st.rays_traced << ',' << st.samples << ',' << st.active_samples
              << ',' << fmt(fl.total) << '\n';
    write_text_file(out_path(c, "stats.csv"), stats_csv.str());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_text_file(out_path(c, "timing.csv"), "stage,seconds\nrender," + fmt(secs) + "\n");
  return 0;
}

DsoDataset dataset_of(const RunConfig& c, const SyntheticScene& scene) {
  return make_dso_dataset(scene, rig_of(c), c.frames, c.train_fraction, c.oracle_samples);
}

int cmd_train(const RunConfig& c) {
  const SyntheticScene scene = load_scene(c);
  const DsoDataset data = dataset_of(c, scene);
  const TrainConfig cfg = train_config(c, scene);
  std::optional<Checkpoint> resume;
  if (!c.checkpoint.empty()) {
    resume = load_checkpoint(c.checkpoint);
    if (!resume->adam) throw ValidationError("checkpoint has no optimizer state to resume from");
    if (model_config_to_json(resume->config) != model_config_to_json(cfg.model))
      throw ValidationError("checkpoint model does not match the run config");
    resume->adam->config = cfg.adam;
  }
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream timing;
  timing << "iteration,seconds\n";
  const TrainResult r = train_dso(data, cfg, resume ? &resume->params : nullptr,
                                  resume ? &*resume->adam : nullptr, [&](const MetricRow& m) {
                                    const double s = std::chrono::duration<double>(
                                                         std::chrono::steady_clock::now() - t0)
                                                         .count();
                                    timing << m.iteration << ',' << fmt(s) << '\n';
                                    std::cerr << "it " << m.iteration << " loss " << m.loss
                                              << " psnr_view " << m.psnr_view << " psnr_pose "
                                              << m.psnr_pose << '\n';
                                  });
  std::ostringstream metrics;
  metrics << "iteration,loss,dso,l2,psnr_view,ssim_view,psnr_pose,ssim_pose\n";
  for (const MetricRow& m : r.log)
    metrics << m.iteration << ',' << fmt(m.loss) << ',' << fmt(m.dso) << ',' << fmt(m.l2) << ','
            << fmt(m.psnr_view) << ',' << fmt(m.ssim_view) << ',' << fmt(m.psnr_pose) << ','
            << fmt(m.ssim_pose) << '\n';
  write_text_file(out_path(c, "metrics.csv"), metrics.str());
  std::ostringstream losses;
  losses << "iteration,loss\n";
  for (std::size_t i = 0; i < r.losses.size(); ++i) losses << i + 1 << ',' << fmt(r.losses[i]) << '\n';
  write_text_file(out_path(c, "losses.csv"), losses.str());
  write_text_file(out_path(c, "timing.csv"), timing.str());
  save_checkpoint(out_path(c, "model.ckpt"), cfg.model, r.params);
  save_checkpoint(out_path(c, "resume.ckpt"), cfg.model, r.params, &r.adam);
  const Model model(cfg.model);
  RenderOptions opts;
  opts.sampling = cfg.sampling;
  opts.threads = c.threads;
  opts.seed = derive_seed(c.seed, 3);
  const auto render_frame = [&](const Frame& f, const std::string& stem) {
    write_render(c, render_image(model, r.params, f.pose, data.canon, f.time, f.camera, opts), stem);
    write_png(out_path(c, stem + "_target.png"), f.rgb_view());
  };
  if (!data.heldout_view.empty()) render_frame(data.heldout_view.front(), "heldout_view");
  if (!data.heldout_pose.empty()) render_frame(data.heldout_pose.front(), "heldout_pose");
  return 0;
}

int cmd_eval(const RunConfig& c) {
  if (c.checkpoint.empty()) throw ValidationError("eval needs --checkpoint");
  const SyntheticScene scene = load_scene(c);
  const DsoDataset data = dataset_of(c, scene);
  const Checkpoint ck = load_checkpoint(c.checkpoint);
  const Model model(ck.config);
  RenderOptions opts;
  opts.sampling = {c.coarse, c.fine};
  opts.threads = c.threads;
  opts.seed = derive_seed(c.seed, 3);
  const EvalResult v = evaluate(model, ck.params, data.canon, data.heldout_view, opts, c.eval_images);
  const EvalResult p = evaluate(model, ck.params, data.canon, data.heldout_pose, opts, c.eval_images);
  std::ostringstream csv;
  csv << "set,images,psnr,ssim\n"
      << "heldout_view," << v.images << ',' << fmt(v.psnr) << ',' << fmt(v.ssim) << '\n'
      << "heldout_pose," << p.images << ',' << fmt(p.psnr) << ',' << fmt(p.ssim) << '\n';
  write_text_file(out_path(c, "eval.csv"), csv.str());
  std::cout << csv.str();
  return 0;
}

int cmd_benchmark(const RunConfig& c) {
  const SyntheticScene scene = load_scene(c);
  const Camera cam = load_camera(c);
  BenchmarkConfig b;
  b.repetitions = c.repetitions;
  b.threads = c.threads;
  b.resolution = cam.width;
  b.triplane_resolution = c.triplane_resolution;
  b.sampling = {c.coarse, c.fine};
  b.seed = c.seed;
  b.pose_time = c.time;
  std::vector<Variant> vs;
  for (const auto& name : c.variants) vs.push_back(parse_variant(name));
  const auto reports = benchmark_compare(vs, scene, cam, b);
  std::ostringstream cost, timing;
  cost << "variant,flops,peak_bytes,rays_traced,samples,active_samples\n";
  timing << "variant,threads,seconds\n";
  for (const CostReport& r : reports) {
    cost << r.variant << ',' << fmt(r.flops) << ',' << r.peak_bytes << ',' << r.stats.rays_traced
         << ',' << r.stats.samples << ',' << r.stats.active_samples << '\n';
    timing << r.variant << ',' << r.threads << ',' << fmt(r.seconds) << '\n';
  }
  write_text_file(out_path(c, "cost.csv"), cost.str());
  write_text_file(out_path(c, "timing.csv"), timing.str());
  std::cout << format_cost_table(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Articulated tri-plane radiance fields: render, train and benchmark"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string config_file;
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Sub subs[] = {
      {"make-scene", "Write a synthetic scene, its skeleton, canonical pose and a camera", cmd_make_scene},
      {"sample-pose", "Draw a pose from a Gaussian joint prior and render its ground truth", cmd_sample_pose},
      {"render", "Render a pose with a trained checkpoint, or the analytic scene without one", cmd_render},
      {"train-dso", "Fit a model to one animated synthetic scene", cmd_train},
      {"eval", "Score a checkpoint on the held-out views and poses", cmd_eval},
      {"benchmark", "Compare render cost across variants", cmd_benchmark},
  };
  // Flags override the config file, so they are collected separately and
  // applied after it is read.
  nlohmann::json overrides;
  std::vector<std::pair<CLI::App*, const Sub*>> apps;
  for (const Sub& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    apps.emplace_back(sub, &s);
    sub->add_option("--config", config_file, "JSON config or a previous run's manifest.json");
    auto str = [&](const char* flag, const char* key, const char* help) {
      sub->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
    };
    auto u64 = [&](const char* flag, const char* key, const char* help) {
      sub->add_option_function<std::uint64_t>(flag, [&overrides, key](std::uint64_t v) { overrides[key] = v; }, help);
    };
    auto i32 = [&](const char* flag, const char* key, const char* help) {
      sub->add_option_function<int>(flag, [&overrides, key](int v) { overrides[key] = v; }, help);
    };
    auto f64 = [&](const char* flag, const char* key, const char* help) {
      sub->add_option_function<double>(flag, [&overrides, key](double v) { overrides[key] = v; }, help);
    };
    str("--scene", "scene_file", "Scene JSON (default: generate from --preset)");
    str("--preset", "preset", "capsule2, capsule3-chain or humanoid9");
    f64("--wobble", "wobble", "Capsule radius wobble amplitude");
    f64("--radius-scale", "radius_scale", "Scale applied to preset radii");
    u64("--scene-seed", "scene_seed", "Animation phase seed");
    str("--pose", "pose_file", "Pose JSON (default: scene pose at --time)");
    str("--camera", "camera_file", "Camera JSON (default: ring camera at --azimuth)");
    str("--checkpoint", "checkpoint", "Model checkpoint");
    str("--variant", "variant", "enarf, d-enarf, baseline-narf, no-selector, mlp-selector");
    u64("--seed", "seed", "Run seed");
    i32("--iters", "iters", "Training iterations");
    i32("--resolution", "resolution", "Image width and height in pixels");
    i32("--threads", "threads", "Worker threads");
    i32("--triplane-resolution", "triplane_resolution", "Tri-plane grid size");
    i32("--batch", "batch", "Rays per training iteration");
    i32("--views", "views", "Training cameras");
    i32("--frames", "frames", "Animation frames");
    f64("--time", "time", "Normalised animation time");
    f64("--azimuth", "azimuth", "Default camera azimuth in radians");
    i32("--repetitions", "repetitions", "Timed benchmark repetitions");
    sub->add_option_function<std::vector<std::string>>(
        "--variants", [&overrides](const std::vector<std::string>& v) { overrides["variants"] = v; },
        "Variants to benchmark");
    sub->add_option("--out", cfg.out, "Output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    for (auto& [sub, s] : apps) {
      if (!sub->parsed()) continue;
      const std::string out = cfg.out;
      if (!config_file.empty()) load_config_file(cfg, config_file);
      apply_json(cfg, overrides);
      cfg.out = out;
      cfg.command = s->name;
      parse_variant(cfg.variant);
      for (const auto& v : cfg.variants) parse_variant(v);
      if (cfg.threads < 1) throw ValidationError("--threads must be at least 1");
      std::error_code ec;
      fs::create_directories(cfg.out, ec);
      if (ec) throw IoError("cannot create output directory " + cfg.out + ": " + ec.message());
      write_manifest(cfg);
      return s->run(cfg);
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
