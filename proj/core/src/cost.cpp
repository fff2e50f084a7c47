#include "enarf/cost.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "enarf/memory.hpp"

namespace enarf {

using flop_rules::kMac;
using flop_rules::kTranscendental;

std::uint64_t decoder_macs(int in_dim) {
  return static_cast<std::uint64_t>(kDecoderHidden) * in_dim + 4 * kDecoderHidden;
}

double decoder_flops(int in_dim) {
  const double biases = kDecoderHidden + 4;
  const double relu = kDecoderHidden;
  const double heads = 4 * kTranscendental;
  return kMac * static_cast<double>(decoder_macs(in_dim)) + biases + relu + heads;
}

double encoding_flops(const PosEncConfig& enc) {
  // One scaling per frequency and axis, then a sine and a cosine.
  return 3.0 * enc.frequencies * (1.0 + 2.0 * kTranscendental);
}

double selector_mlp_flops(int in_dim) {
  return kMac * (kSelectorHidden * in_dim + kSelectorHidden) + kSelectorHidden * 2 + 1 +
         kTranscendental;
}

double part_lookup_flops() {
  // uv projection, three sets of bilinear weights, 3 x 4 x 32 weighted taps,
  // and the p * f accumulation.
  return 3.0 + 3.0 * 12.0 + kMac * 3 * 4 * kFeatureChannels + kMac * kFeatureChannels;
}

double selector_lookup_flops() { return kMac * 3 * 4 + 3 * kTranscendental + 2.0; }

namespace {

constexpr double kTransform = kMac * 9 + 3;  // affine map of a point
constexpr double kCubeTest = 3 + 6;          // differences and comparisons
constexpr double kBoxTest = 30;              // slab test
constexpr double kCompositePerSample = kTranscendental + 8;

}  // namespace

FlopBreakdown count_flops(Variant variant, const ModelConfig& model, const SamplingConfig& sampling,
                          const RenderStats& st) {
  FlopBreakdown f;
  const int K = model.parts();
  const double rays_traced = static_cast<double>(st.rays_traced);
  const double samples = static_cast<double>(st.samples);
  f.rays = 12.0 * static_cast<double>(st.rays) + kBoxTest * static_cast<double>(st.box_tests);
  const double nc = sampling.coarse, nf = sampling.fine, n = nc + nf;
  f.sampling = rays_traced * (nc * 3 + nf * (std::log2(std::max(nc, 2.0)) + 6) + n * std::log2(n) +
                              n * kMac * 3);
  f.compositing = rays_traced * (nc + n) * kCompositePerSample;

  const double dec = decoder_flops(model.decoder_in_dim());
  f.decoder = static_cast<double>(st.active_samples) * dec;
  if (model.view_direction) f.encoding += static_cast<double>(st.active_samples) * encoding_flops(model.encoding);

  const int e = model.encoding.dim();
  if (variant == Variant::BaselineNarf) {
    // Every part is transformed, encoded, scored and mapped at every point.
    f.transforms = samples * K * (2 * kTransform + kCubeTest);
    f.encoding += static_cast<double>(st.dense_part_evals) * encoding_flops(model.encoding);
    f.selector = static_cast<double>(st.selector_mlp_evals) * selector_mlp_flops(e);
    f.linear = static_cast<double>(st.dense_part_evals) * (e + kMac * kFeatureChannels * e);
  } else {
    f.transforms = samples * K * (kTransform + kCubeTest);
    f.planes = static_cast<double>(st.part_lookups) * part_lookup_flops();
    f.selector = static_cast<double>(st.selector_lookups) * selector_lookup_flops();
    if (variant == Variant::MlpSelector) {
      const double mlp = static_cast<double>(st.selector_mlp_evals);
      f.transforms += mlp * kTransform;
      f.encoding += mlp * encoding_flops(model.encoding);
      f.selector += mlp * selector_mlp_flops(e);
    }
  }
  if (variant == Variant::DEnarf) {
    const DeformConfig& d = model.deform;
    const double R = model.shape.resolution;
    const double in = deform_input_dim(d, K), out = deform_output_dim(d);
    f.deformation = kMac * (d.hidden * in + out * d.hidden) + d.hidden + out +
                    2 * d.time_frequencies * kTranscendental +
                    3 * R * R * 2 * (kMac * 4 + 6) +
                    3 * R * R * (12 + kMac * 4 * kFeatureChannels);
  }
  f.total = f.rays + f.sampling + f.transforms + f.encoding + f.planes + f.selector + f.linear +
            f.decoder + f.compositing + f.deformation;
  return f;
}

FlopBreakdown count_flops(std::string_view variant, const ModelConfig& model,
                          const SamplingConfig& sampling, const RenderStats& stats) {
  return count_flops(parse_variant(variant), model, sampling, stats);
}

std::vector<CostReport> benchmark_compare(std::span<const Variant> variants,
                                          const SyntheticScene& scene, const Camera& camera,
                                          const BenchmarkConfig& cfg) {
  if (cfg.repetitions < 1) throw ValidationError("benchmark needs at least one repetition");
  const CanonicalPose canon = scene.canonical();
  const PoseConfig pose = scene.pose_at(cfg.pose_time);
  std::vector<CostReport> out;
  for (Variant v : variants) {
    ModelConfig mc;
    mc.variant = v;
    mc.shape = {cfg.triplane_resolution, scene.triplane_extent, scene.parts()};
    mc.seed = cfg.seed;
    const Model model(mc);
    auto& meter = MemoryMeter::instance();
    const std::size_t before = meter.current();
    const ParamStore params = model.init_params();
    RenderOptions opts;
    opts.sampling = cfg.sampling;
    opts.threads = cfg.threads;
    opts.seed = cfg.seed;
    opts.cull = v != Variant::BaselineNarf;

    CostReport rep;
    rep.variant = to_string(v);
    rep.threads = cfg.threads;
    meter.reset_peak();
    RenderOutput warm = render_image(model, params, pose, canon, cfg.pose_time, camera, opts, &rep.stats);
    const std::size_t image_bytes =
        (warm.rgb.size() + warm.mask.size() + warm.inv_depth.size()) * sizeof(double);
    rep.peak_bytes = meter.peak() - std::min(before, meter.peak()) + image_bytes;

    std::vector<double> times;
    for (int r = 0; r < cfg.repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const RenderOutput img = render_image(model, params, pose, canon, cfg.pose_time, camera, opts);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (img.rgb != warm.rgb) throw StateError("benchmark render is not deterministic");
    }
    std::sort(times.begin(), times.end());
    rep.seconds = times[times.size() / 2];
    rep.breakdown = count_flops(v, mc, cfg.sampling, rep.stats);
    rep.flops = rep.breakdown.total;
    out.push_back(std::move(rep));
  }
  return out;
}

std::string format_cost_table(const std::vector<CostReport>& reports) {
  std::ostringstream os;
  os << "variant,flops,peak_bytes,seconds,threads,rays,rays_traced,samples,active_samples\n";
  os.precision(6);
  for (const auto& r : reports) {
    os << r.variant << ',' << std::scientific << r.flops << ',' << std::defaultfloat << r.peak_bytes
       << ',' << r.seconds << ',' << r.threads << ',' << r.stats.rays << ',' << r.stats.rays_traced
       << ',' << r.stats.samples << ',' << r.stats.active_samples << '\n';
  }
  return os.str();
}

}  // namespace enarf
