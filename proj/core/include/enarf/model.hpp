#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "enarf/decoder.hpp"
#include "enarf/deformation.hpp"
#include "enarf/params.hpp"
#include "enarf/triplane.hpp"

namespace enarf {

enum class Variant { Enarf, DEnarf, BaselineNarf, NoSelector, MlpSelector };

std::string to_string(Variant v);
// Accepts "enarf", "d-enarf", "baseline-narf", "no-selector", "mlp-selector"
// (case-insensitive). Throws ValidationError otherwise.
Variant parse_variant(std::string_view name);

bool uses_triplane(Variant v);
bool uses_triplane_selector(Variant v);
bool uses_mlp_selector(Variant v);

struct ModelConfig {
  Variant variant = Variant::Enarf;
  TriPlaneShape shape;
  PosEncConfig encoding;
  bool view_direction = false;
  bool normalize_length = false;
  double cube_half_width = 1.0 / 3.0;
  DeformConfig deform;
  // Tri-plane features start uniform in [-feature_init, feature_init].
  double feature_init = 0.1;
  std::uint64_t seed = 0;

  int parts() const { return shape.parts; }
  int decoder_in_dim() const;
  void validate() const;
};

namespace slice_names {
inline constexpr const char* kFeatures = "triplane.features";
inline constexpr const char* kLogits = "triplane.logits";
inline constexpr const char* kDecW1 = "decoder.w1";
inline constexpr const char* kDecB1 = "decoder.b1";
inline constexpr const char* kDecW2 = "decoder.w2";
inline constexpr const char* kDecB2 = "decoder.b2";
inline constexpr const char* kSelW1 = "selector.w1";
inline constexpr const char* kSelB1 = "selector.b1";
inline constexpr const char* kSelW2 = "selector.w2";
inline constexpr const char* kSelB2 = "selector.b2";
inline constexpr const char* kLinearW = "baseline.w";
inline constexpr const char* kDefW1 = "deform.w1";
inline constexpr const char* kDefB1 = "deform.b1";
inline constexpr const char* kDefW2 = "deform.w2";
inline constexpr const char* kDefB2 = "deform.b2";
}  // namespace slice_names

// Typed views of every network component over one flat parameter vector.
// Components a variant does not use have empty spans.
struct ModelViews {
  TriPlaneView triplane;
  DecoderView decoder;
  SelectorMlpView selector;
  NarfLinearView linear;
  DeformGeneratorView deform;
};

// Flat-buffer offsets of each slice, for scattering gradients.
struct SliceOffsets {
  std::size_t features = 0, logits = 0;
  std::size_t dec_w1 = 0, dec_b1 = 0, dec_w2 = 0, dec_b2 = 0;
  std::size_t sel_w1 = 0, sel_b1 = 0, sel_w2 = 0, sel_b2 = 0;
  std::size_t linear = 0;
  std::size_t def_w1 = 0, def_b1 = 0, def_w2 = 0, def_b2 = 0;
};

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  const SliceOffsets& offsets() const { return offsets_; }

  // Freshly initialised parameters (deterministic in config.seed).
  ParamStore init_params() const;
  ModelViews views(const ParamStore& params) const;

 private:
  ModelConfig config_;
  ParamLayout layout_;
  SliceOffsets offsets_;
};

}  // namespace enarf
