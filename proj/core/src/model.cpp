#include "enarf/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace enarf {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Enarf: return "enarf";
    case Variant::DEnarf: return "d-enarf";
    case Variant::BaselineNarf: return "baseline-narf";
    case Variant::NoSelector: return "no-selector";
    case Variant::MlpSelector: return "mlp-selector";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  for (Variant v : {Variant::Enarf, Variant::DEnarf, Variant::BaselineNarf, Variant::NoSelector,
                    Variant::MlpSelector})
    if (s == to_string(v)) return v;
  throw ValidationError("unknown model variant '" + std::string(name) + "'");
}

bool uses_triplane(Variant v) { return v != Variant::BaselineNarf; }
bool uses_triplane_selector(Variant v) { return v == Variant::Enarf || v == Variant::DEnarf; }
bool uses_mlp_selector(Variant v) {
  return v == Variant::BaselineNarf || v == Variant::MlpSelector;
}

int ModelConfig::decoder_in_dim() const {
  return kFeatureChannels + (view_direction ? encoding.dim() : 0);
}

void ModelConfig::validate() const {
  shape.validate();
  if (encoding.frequencies < 1) throw ValidationError("positional encoding needs L >= 1");
  if (!(cube_half_width > 0.0)) throw ValidationError("cube half width must be positive");
  if (variant == Variant::DEnarf) {
    if (deform.grid < 2 || deform.hidden < 1 || deform.time_frequencies < 0)
      throw ValidationError("invalid deformation generator configuration");
  }
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  namespace sn = slice_names;
  const Variant v = config_.variant;
  const int K = config_.parts();
  const int enc = config_.encoding.dim();
  auto inv_sqrt = [](double fan_in) { return 1.0 / std::sqrt(fan_in); };

  if (uses_triplane(v)) offsets_.features = layout_.add(sn::kFeatures, config_.shape.feature_count());
  if (uses_triplane_selector(v)) offsets_.logits = layout_.add(sn::kLogits, config_.shape.logit_count());
  const int din = config_.decoder_in_dim();
  offsets_.dec_w1 = layout_.add(sn::kDecW1, static_cast<std::size_t>(kDecoderHidden) * din, inv_sqrt(din));
  offsets_.dec_b1 = layout_.add(sn::kDecB1, kDecoderHidden);
  offsets_.dec_w2 = layout_.add(sn::kDecW2, 4 * kDecoderHidden, inv_sqrt(kDecoderHidden));
  offsets_.dec_b2 = layout_.add(sn::kDecB2, 4);
  if (uses_mlp_selector(v)) {
    offsets_.sel_w1 = layout_.add(sn::kSelW1, static_cast<std::size_t>(K) * kSelectorHidden * enc, inv_sqrt(enc));
    offsets_.sel_b1 = layout_.add(sn::kSelB1, static_cast<std::size_t>(K) * kSelectorHidden);
    offsets_.sel_w2 = layout_.add(sn::kSelW2, static_cast<std::size_t>(K) * kSelectorHidden, inv_sqrt(kSelectorHidden));
    offsets_.sel_b2 = layout_.add(sn::kSelB2, K);
  }
  if (v == Variant::BaselineNarf) {
    const int width = K * enc;
    offsets_.linear = layout_.add(sn::kLinearW, static_cast<std::size_t>(kFeatureChannels) * width, inv_sqrt(width));
  }
  if (v == Variant::DEnarf) {
    const int in = deform_input_dim(config_.deform, K);
    const int hid = config_.deform.hidden;
    offsets_.def_w1 = layout_.add(sn::kDefW1, static_cast<std::size_t>(hid) * in, inv_sqrt(in));
    offsets_.def_b1 = layout_.add(sn::kDefB1, hid);
    offsets_.def_w2 = layout_.add(sn::kDefW2, static_cast<std::size_t>(deform_output_dim(config_.deform)) * hid, inv_sqrt(hid));
    offsets_.def_b2 = layout_.add(sn::kDefB2, deform_output_dim(config_.deform));
  }
}

ParamStore Model::init_params() const {
  namespace sn = slice_names;
  ParamStore p(layout_);
  const std::uint64_t seed = config_.seed;
  if (layout_.find(sn::kFeatures)) {
    std::mt19937_64 rng(derive_seed(seed, 10));
    std::uniform_real_distribution<double> dist(-config_.feature_init, config_.feature_init);
    for (double& v : p.slice(sn::kFeatures)) v = dist(rng);
  }
  const int din = config_.decoder_in_dim();
  he_uniform(p.slice(sn::kDecW1), din, derive_seed(seed, 11));
  he_uniform(p.slice(sn::kDecW2), kDecoderHidden, derive_seed(seed, 12));
  if (layout_.find(sn::kSelW1)) {
    he_uniform(p.slice(sn::kSelW1), config_.encoding.dim(), derive_seed(seed, 13));
    he_uniform(p.slice(sn::kSelW2), kSelectorHidden, derive_seed(seed, 14));
  }
  if (layout_.find(sn::kLinearW))
    he_uniform(p.slice(sn::kLinearW), config_.parts() * config_.encoding.dim(), derive_seed(seed, 15));
  if (layout_.find(sn::kDefW1))
    he_uniform(p.slice(sn::kDefW1), deform_input_dim(config_.deform, config_.parts()),
               derive_seed(seed, 16));
  // deform.w2 stays zero so training starts from the undeformed tri-plane.
  return p;
}

ModelViews Model::views(const ParamStore& params) const {
  namespace sn = slice_names;
  if (!(params.layout() == layout_)) throw ShapeError("parameter layout does not match model");
  auto get = [&](const char* name) -> std::span<const double> {
    const ParamSlice* s = layout_.find(name);
    if (s == nullptr) return {};
    return params.slice(*s);
  };
  ModelViews mv;
  mv.triplane = {config_.shape, get(sn::kFeatures), get(sn::kLogits)};
  mv.decoder = {config_.decoder_in_dim(), get(sn::kDecW1), get(sn::kDecB1), get(sn::kDecW2),
                get(sn::kDecB2)};
  mv.selector = {config_.parts(), config_.encoding.dim(), get(sn::kSelW1), get(sn::kSelB1),
                 get(sn::kSelW2), get(sn::kSelB2)};
  mv.linear = {config_.parts(), config_.encoding.dim(), get(sn::kLinearW)};
  mv.deform = {config_.deform, config_.parts(), get(sn::kDefW1), get(sn::kDefB1),
               get(sn::kDefW2), get(sn::kDefB2)};
  return mv;
}

}  // namespace enarf
