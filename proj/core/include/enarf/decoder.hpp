#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "enarf/kinematics.hpp"
#include "enarf/triplane.hpp"

namespace enarf {

struct PosEncConfig {
  int frequencies = 10;
  bool include_input = true;

  int dim() const { return 3 * (2 * frequencies + (include_input ? 1 : 0)); }
};

// Layout: [x, y, z] (optional), then for each frequency i:
// sin(2^i pi x), cos(2^i pi x), sin(.. y), cos(.. y), sin(.. z), cos(.. z).
std::vector<double> positional_encode(const Vec3& x, const PosEncConfig& cfg);
void positional_encode(const Vec3& x, const PosEncConfig& cfg, double* out);

struct RadianceSample {
  Vec3 color = Vec3::Zero();
  double density = 0.0;
};

inline constexpr int kDecoderHidden = 64;
inline constexpr int kSelectorHidden = 10;

// Two fully-connected layers, in_dim -> 64 (ReLU) -> 4.
// Output 0..2 go through the logistic function (color), 3 through softplus
// (density).
struct DecoderView {
  int in_dim = kFeatureChannels;
  std::span<const double> w1;  // [64][in_dim]
  std::span<const double> b1;  // [64]
  std::span<const double> w2;  // [4][64]
  std::span<const double> b2;  // [4]

  void validate() const;
};

struct DecoderGrad {
  double* w1 = nullptr;
  double* b1 = nullptr;
  double* w2 = nullptr;
  double* b2 = nullptr;
};

struct DecoderTrace {
  std::array<double, kDecoderHidden> hidden_pre{};
  std::array<double, 4> out{};
};

RadianceSample decode_input(const DecoderView& dec, const double* in, DecoderTrace* trace);
// Accumulates (+=) parameter gradients; writes d(loss)/d(in) when grad_in is
// non-null.
void decode_backward(const DecoderView& dec, const double* in, const DecoderTrace& trace,
                     const Vec3& grad_color, double grad_density, const DecoderGrad& grad,
                     double* grad_in);

// Checked entry point. With a view direction the decoder input is the
// feature followed by the encoded direction, so dec.in_dim must equal
// f.size() + view_enc.dim().
RadianceSample decode(std::span<const double> f, const DecoderView& dec,
                      const std::optional<Vec3>& view_dir = std::nullopt,
                      const PosEncConfig& view_enc = {});

// Owning decoder weights, mostly for tests and tools.
struct DecoderWeights {
  int in_dim = kFeatureChannels;
  std::vector<double> w1, b1, w2, b2;

  static DecoderWeights zeros(int in_dim);
  static DecoderWeights random(int in_dim, std::uint64_t seed);
  DecoderView view() const { return {in_dim, w1, b1, w2, b2}; }
};

// He-style uniform initialisation U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
void he_uniform(std::span<double> w, int fan_in, std::uint64_t seed);

// Per-part two-layer MLP selector (in_dim -> 10 ReLU -> 1 logistic).
struct SelectorMlpView {
  int parts = 1;
  int in_dim = 63;
  std::span<const double> w1;  // [K][10][in_dim]
  std::span<const double> b1;  // [K][10]
  std::span<const double> w2;  // [K][10]
  std::span<const double> b2;  // [K]
};

struct SelectorTrace {
  std::array<double, kSelectorHidden> hidden_pre{};
  double prob = 0.0;
};

double selector_mlp(const SelectorMlpView& sel, int part, const double* in, SelectorTrace* trace);
void selector_mlp_backward(const SelectorMlpView& sel, int part, const double* in,
                           const SelectorTrace& trace, double grad_prob, const DecoderGrad& grad,
                           double* grad_in);

// Bias-free linear map W over the concatenation of K per-part encodings:
// 32 x (K * enc_dim), row-major.
struct NarfLinearView {
  int parts = 1;
  int enc_dim = 63;
  std::span<const double> w;
};

enum class BaselinePath { Concatenated, Decomposed };

// W(Cat_k(p_k * g_k)) with one dense product over the full concatenation.
void narf_linear_concat(const NarfLinearView& lin, std::span<const double> masked_cat,
                        double* out);
// sum_k p_k * W_k(g_k), skipping parts with p_k == 0.
void narf_linear_decomposed(const NarfLinearView& lin, std::span<const double> encodings,
                            std::span<const double> probs, double* out);

// Original-style feature: per-part local coordinates, positional encoding,
// MLP selector probabilities and the linear map, via either path. Parts whose
// canonical point falls outside the cube prior get p = 0; pass an infinite
// half width to disable the prior.
Feature narf_baseline_feature(const Vec3& x, std::span<const PartFrame> frames,
                              const NarfLinearView& lin, const SelectorMlpView& sel,
                              const PosEncConfig& enc, BaselinePath path,
                              double cube_half_width);

}  // namespace enarf
