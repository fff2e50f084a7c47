#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "enarf/field.hpp"
#include "enarf/model.hpp"
#include "enarf/renderer.hpp"
#include "enarf/scene.hpp"

namespace enarf {

// Counting convention: one multiply-add is 2 flops, one transcendental
// (exp, log, sin, cos, sigmoid, softplus) is 8 flops, any other arithmetic
// or comparison is 1 flop.
namespace flop_rules {
inline constexpr double kMac = 2.0;
inline constexpr double kTranscendental = 8.0;
}  // namespace flop_rules

// Multiply-adds of the two decoder layers.
std::uint64_t decoder_macs(int in_dim);
// Decoder linear layers (2 flops per multiply-add) plus biases and activations.
double decoder_flops(int in_dim);
double encoding_flops(const PosEncConfig& enc);
double selector_mlp_flops(int in_dim);
double part_lookup_flops();
double selector_lookup_flops();

struct FlopBreakdown {
  double rays = 0.0;         // ray setup and box culling
  double sampling = 0.0;     // stratification, importance sampling, sorting
  double transforms = 0.0;   // canonical / local transforms and cube tests
  double encoding = 0.0;
  double planes = 0.0;       // tri-plane feature lookups and blending
  double selector = 0.0;     // probability lookups or selector MLPs
  double linear = 0.0;       // dense per-part linear map (baseline)
  double decoder = 0.0;
  double compositing = 0.0;
  double deformation = 0.0;  // per-image deformation generation and warping
  double total = 0.0;
};

// Analytic count for one rendered image, driven by the work counters of the
// actual render (so cube-prior culling is reflected exactly).
FlopBreakdown count_flops(Variant variant, const ModelConfig& model, const SamplingConfig& sampling,
                          const RenderStats& stats);
FlopBreakdown count_flops(std::string_view variant, const ModelConfig& model,
                          const SamplingConfig& sampling, const RenderStats& stats);

struct CostReport {
  std::string variant;
  double flops = 0.0;
  std::size_t peak_bytes = 0;
  double seconds = 0.0;  // median wall-clock per image
  int threads = 1;
  RenderStats stats;
  FlopBreakdown breakdown;
};

struct BenchmarkConfig {
  int repetitions = 3;
  int threads = 1;
  int resolution = 128;
  int triplane_resolution = 64;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  double pose_time = 0.3;
};

// Renders the scene with each variant (same camera, pose and sampling; one
// warm-up render, then `repetitions` timed renders) and reports cost.
// Tri-plane variants cull rays against the part boxes; the baseline renders
// densely.
std::vector<CostReport> benchmark_compare(std::span<const Variant> variants,
                                          const SyntheticScene& scene, const Camera& camera,
                                          const BenchmarkConfig& cfg);

// CSV with a header row.
std::string format_cost_table(const std::vector<CostReport>& reports);

}  // namespace enarf
