#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "enarf/decoder.hpp"
#include "enarf/model.hpp"
#include "enarf/renderer.hpp"
#include "enarf/scene.hpp"
#include "enarf/train.hpp"
#include "enarf/triplane.hpp"

using namespace enarf;

namespace {

struct Fixture {
  SyntheticScene scene;
  ModelConfig config;
  Model model;
  ParamStore params;
  CanonicalPose canon;
  PoseConfig pose;

  Fixture(Variant v, const char* preset, int resolution)
      : scene(make_synthetic_scene(SceneSpec{preset}, 0)),
        config(make_config(v, scene, resolution)),
        model(config),
        params(model.init_params()),
        canon(scene.canonical()),
        pose(scene.pose_at(0.3)) {
    // A live density head so samples are not all transparent.
    params.slice(slice_names::kDecB2)[3] = 1.0;
  }

  static ModelConfig make_config(Variant v, const SyntheticScene& s, int resolution) {
    ModelConfig c;
    c.variant = v;
    c.shape = {resolution, s.triplane_extent, s.parts()};
    return c;
  }
};

std::vector<Vec3> random_points(int n, double extent) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) p = Vec3(u(rng), u(rng), u(rng));
  return pts;
}

void BM_Decode(benchmark::State& state) {
  const DecoderWeights w = DecoderWeights::random(kFeatureChannels, 3);
  std::vector<double> f(kFeatureChannels, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(decode_input(w.view(), f.data(), nullptr));
}
BENCHMARK(BM_Decode);

void BM_FeatureAt(benchmark::State& state) {
  const Fixture fx(Variant::Enarf, "humanoid9", 64);
  const auto views = fx.model.views(fx.params);
  const auto frames = part_frames(fx.pose, fx.canon, false);
  const auto pts = random_points(1024, 1.0);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(feature_at(views.triplane, pts[i++ & 1023], frames, 1.0 / 3.0));
  }
}
BENCHMARK(BM_FeatureAt);

void BM_FieldEval(benchmark::State& state) {
  const Fixture fx(static_cast<Variant>(state.range(0)), "humanoid9", 64);
  const FieldEvaluator field(fx.config, fx.model.views(fx.params), fx.pose, fx.canon);
  const auto pts = random_points(1024, 0.8);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(field.eval(pts[i++ & 1023], Vec3::UnitX(), nullptr, nullptr));
  state.SetLabel(to_string(fx.config.variant));
}
BENCHMARK(BM_FieldEval)
    ->Arg(static_cast<int>(Variant::Enarf))
    ->Arg(static_cast<int>(Variant::MlpSelector))
    ->Arg(static_cast<int>(Variant::BaselineNarf));

void BM_RenderImage(benchmark::State& state) {
  const Fixture fx(static_cast<Variant>(state.range(0)), "humanoid9", 64);
  RigConfig rig;
  rig.resolution = 32;
  const Camera cam = camera_ring(rig, 1, 0.4)[0];
  RenderOptions opts;
  opts.threads = 1;
  opts.cull = fx.config.variant != Variant::BaselineNarf;
  for (auto _ : state)
    benchmark::DoNotOptimize(render_image(fx.model, fx.params, fx.pose, fx.canon, 0.3, cam, opts));
  state.SetLabel(to_string(fx.config.variant));
}
BENCHMARK(BM_RenderImage)
    ->Arg(static_cast<int>(Variant::Enarf))
    ->Arg(static_cast<int>(Variant::MlpSelector))
    ->Arg(static_cast<int>(Variant::BaselineNarf))
    ->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const SyntheticScene scene = make_synthetic_scene(SceneSpec{}, 0);
  RigConfig rig;
  rig.resolution = 32;
  const DsoDataset data = make_dso_dataset(scene, rig, 2, 1.0, 64);
  TrainConfig cfg;
  cfg.model.variant = static_cast<Variant>(state.range(0));
  cfg.model.shape = {32, scene.triplane_extent, scene.parts()};
  cfg.batch = 256;
  cfg.threads = 1;
  const Model model(cfg.model);
  const ParamStore params = model.init_params();
  const Frame& frame = data.train.front();
  auto pixels = candidate_pixels(frame, data.canon, cfg.model);
  pixels.resize(std::min<std::size_t>(pixels.size(), 256));
  GradStore grad(model.layout());
  for (auto _ : state)
    benchmark::DoNotOptimize(dso_batch_loss(model, params, data.canon, frame, pixels, cfg, 1, &grad));
  state.SetLabel(to_string(cfg.model.variant));
}
BENCHMARK(BM_TrainStep)
    ->Arg(static_cast<int>(Variant::Enarf))
    ->Arg(static_cast<int>(Variant::DEnarf))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
