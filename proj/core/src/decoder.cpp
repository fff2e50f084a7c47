#include "enarf/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace enarf {

namespace {
using RowMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using RowMatMutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMutMap = Eigen::Map<Eigen::VectorXd>;
}  // namespace

void positional_encode(const Vec3& x, const PosEncConfig& cfg, double* out) {
  int n = 0;
  if (cfg.include_input)
    for (int d = 0; d < 3; ++d) out[n++] = x[d];
  for (int i = 0; i < cfg.frequencies; ++i) {
    for (int d = 0; d < 3; ++d) {
      const double a = std::ldexp(kPi * x[d], i);
      out[n++] = std::sin(a);
      out[n++] = std::cos(a);
    }
  }
}

std::vector<double> positional_encode(const Vec3& x, const PosEncConfig& cfg) {
  if (cfg.frequencies < 1) throw ValidationError("positional encoding needs L >= 1");
  std::vector<double> out(cfg.dim());
  positional_encode(x, cfg, out.data());
  return out;
}

void DecoderView::validate() const {
  if (in_dim < 1) throw ShapeError("decoder input width must be positive");
  if (w1.size() != static_cast<std::size_t>(kDecoderHidden) * in_dim ||
      b1.size() != kDecoderHidden || w2.size() != 4 * kDecoderHidden || b2.size() != 4)
    throw ShapeError("decoder weight shapes do not match the declared input width");
}

RadianceSample decode_input(const DecoderView& dec, const double* in, DecoderTrace* trace) {
  const int n = dec.in_dim;
  const RowMatMap w1(dec.w1.data(), kDecoderHidden, n);
  const RowMatMap w2(dec.w2.data(), 4, kDecoderHidden);
  Eigen::Matrix<double, kDecoderHidden, 1> h =
      w1 * ConstVecMap(in, n) + ConstVecMap(dec.b1.data(), kDecoderHidden);
  if (trace != nullptr) std::copy(h.data(), h.data() + kDecoderHidden, trace->hidden_pre.begin());
  h = h.cwiseMax(0.0);
  const Eigen::Vector4d o = w2 * h + Eigen::Vector4d::Map(dec.b2.data());
  if (trace != nullptr) std::copy(o.data(), o.data() + 4, trace->out.begin());
  RadianceSample s;
  s.color = Vec3(sigmoid(o[0]), sigmoid(o[1]), sigmoid(o[2]));
  s.density = softplus(o[3]);
  return s;
}

void decode_backward(const DecoderView& dec, const double* in, const DecoderTrace& trace,
                     const Vec3& grad_color, double grad_density, const DecoderGrad& grad,
                     double* grad_in) {
  Eigen::Vector4d go;
  for (int j = 0; j < 3; ++j) {
    const double s = sigmoid(trace.out[j]);
    go[j] = grad_color[j] * s * (1.0 - s);
  }
  go[3] = grad_density * sigmoid(trace.out[3]);

  const ConstVecMap pre(trace.hidden_pre.data(), kDecoderHidden);
  const Eigen::Matrix<double, kDecoderHidden, 1> h = pre.cwiseMax(0.0);
  const RowMatMap w2(dec.w2.data(), 4, kDecoderHidden);
  Eigen::Vector4d::Map(grad.b2) += go;
  RowMatMutMap(grad.w2, 4, kDecoderHidden).noalias() += go * h.transpose();
  Eigen::Matrix<double, kDecoderHidden, 1> gh = w2.transpose() * go;
  gh = (pre.array() > 0.0).select(gh, 0.0);

  const int n = dec.in_dim;
  const ConstVecMap x(in, n);
  VecMutMap(grad.b1, kDecoderHidden) += gh;
  RowMatMutMap gw1(grad.w1, kDecoderHidden, n);
  for (int j = 0; j < kDecoderHidden; ++j)
    if (gh[j] != 0.0) gw1.row(j) += gh[j] * x.transpose();
  if (grad_in != nullptr)
    VecMutMap(grad_in, n).noalias() = RowMatMap(dec.w1.data(), kDecoderHidden, n).transpose() * gh;
}

RadianceSample decode(std::span<const double> f, const DecoderView& dec,
                      const std::optional<Vec3>& view_dir, const PosEncConfig& view_enc) {
  dec.validate();
  for (double v : f)
    if (!std::isfinite(v)) throw ValidationError("decoder input is not finite");
  const std::size_t want = f.size() + (view_dir ? static_cast<std::size_t>(view_enc.dim()) : 0);
  if (want != static_cast<std::size_t>(dec.in_dim))
    throw ShapeError("decoder input width " + std::to_string(want) + " does not match weights (" +
                     std::to_string(dec.in_dim) + ")");
  std::vector<double> in(f.begin(), f.end());
  if (view_dir) {
    in.resize(want);
    positional_encode(*view_dir, view_enc, in.data() + f.size());
  }
  return decode_input(dec, in.data(), nullptr);
}

void he_uniform(std::span<double> w, int fan_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : w) v = dist(rng);
}

DecoderWeights DecoderWeights::zeros(int in_dim) {
  DecoderWeights d;
  d.in_dim = in_dim;
  d.w1.assign(static_cast<std::size_t>(kDecoderHidden) * in_dim, 0.0);
  d.b1.assign(kDecoderHidden, 0.0);
  d.w2.assign(4 * kDecoderHidden, 0.0);
  d.b2.assign(4, 0.0);
  return d;
}

DecoderWeights DecoderWeights::random(int in_dim, std::uint64_t seed) {
  DecoderWeights d = zeros(in_dim);
  he_uniform(d.w1, in_dim, derive_seed(seed, 1));
  he_uniform(d.w2, kDecoderHidden, derive_seed(seed, 2));
  return d;
}

double selector_mlp(const SelectorMlpView& sel, int part, const double* in, SelectorTrace* trace) {
  const int n = sel.in_dim;
  const double* w1 = sel.w1.data() + static_cast<std::size_t>(part) * kSelectorHidden * n;
  const double* b1 = sel.b1.data() + part * kSelectorHidden;
  const double* w2 = sel.w2.data() + part * kSelectorHidden;
  double o = sel.b2[part];
  for (int j = 0; j < kSelectorHidden; ++j) {
    double acc = b1[j];
    const double* row = w1 + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < n; ++i) acc += row[i] * in[i];
    if (trace != nullptr) trace->hidden_pre[j] = acc;
    o += w2[j] * std::max(acc, 0.0);
  }
  const double p = sigmoid(o);
  if (trace != nullptr) trace->prob = p;
  return p;
}

void selector_mlp_backward(const SelectorMlpView& sel, int part, const double* in,
                           const SelectorTrace& trace, double grad_prob, const DecoderGrad& grad,
                           double* grad_in) {
  const int n = sel.in_dim;
  const double go = grad_prob * trace.prob * (1.0 - trace.prob);
  const std::size_t w1_off = static_cast<std::size_t>(part) * kSelectorHidden * n;
  const double* w1 = sel.w1.data() + w1_off;
  const double* w2 = sel.w2.data() + part * kSelectorHidden;
  grad.b2[part] += go;
  if (grad_in != nullptr) std::fill(grad_in, grad_in + n, 0.0);
  for (int j = 0; j < kSelectorHidden; ++j) {
    const double h = trace.hidden_pre[j];
    grad.w2[part * kSelectorHidden + j] += go * std::max(h, 0.0);
    if (h <= 0.0) continue;
    const double gh = go * w2[j];
    grad.b1[part * kSelectorHidden + j] += gh;
    double* grow = grad.w1 + w1_off + static_cast<std::size_t>(j) * n;
    for (int i = 0; i < n; ++i) grow[i] += gh * in[i];
    if (grad_in != nullptr) {
      const double* row = w1 + static_cast<std::size_t>(j) * n;
      for (int i = 0; i < n; ++i) grad_in[i] += gh * row[i];
    }
  }
}

void narf_linear_concat(const NarfLinearView& lin, std::span<const double> masked_cat,
                        double* out) {
  const std::size_t width = static_cast<std::size_t>(lin.parts) * lin.enc_dim;
  if (masked_cat.size() != width) throw ShapeError("concatenated encoding width mismatch");
  for (int c = 0; c < kFeatureChannels; ++c) {
    const double* row = lin.w.data() + c * width;
    double acc = 0.0;
    for (std::size_t i = 0; i < width; ++i) acc += row[i] * masked_cat[i];
    out[c] = acc;
  }
}

void narf_linear_decomposed(const NarfLinearView& lin, std::span<const double> encodings,
                            std::span<const double> probs, double* out) {
  const std::size_t width = static_cast<std::size_t>(lin.parts) * lin.enc_dim;
  std::fill(out, out + kFeatureChannels, 0.0);
  for (int k = 0; k < lin.parts; ++k) {
    const double p = probs[k];
    if (p == 0.0) continue;
    const double* g = encodings.data() + static_cast<std::size_t>(k) * lin.enc_dim;
    for (int c = 0; c < kFeatureChannels; ++c) {
      const double* row = lin.w.data() + c * width + static_cast<std::size_t>(k) * lin.enc_dim;
      double acc = 0.0;
      for (int i = 0; i < lin.enc_dim; ++i) acc += row[i] * g[i];
      out[c] += p * acc;
    }
  }
}

Feature narf_baseline_feature(const Vec3& x, std::span<const PartFrame> frames,
                              const NarfLinearView& lin, const SelectorMlpView& sel,
                              const PosEncConfig& enc, BaselinePath path,
                              double cube_half_width) {
  const int K = lin.parts;
  if (static_cast<int>(frames.size()) != K || sel.parts != K)
    throw ShapeError("baseline part count does not match pose");
  if (lin.enc_dim != enc.dim() || sel.in_dim != enc.dim())
    throw ShapeError("baseline encoding width mismatch");
  const int e = enc.dim();
  std::vector<double> g(static_cast<std::size_t>(K) * e);
  std::vector<double> p(K, 0.0);
  for (int k = 0; k < K; ++k) {
    double* gk = g.data() + static_cast<std::size_t>(k) * e;
    positional_encode(frames[k].local(x), enc, gk);
    if (inside_cube(frames[k].canonical(x), frames[k].center, cube_half_width))
      p[k] = selector_mlp(sel, k, gk, nullptr);
  }
  Feature f{};
  if (path == BaselinePath::Decomposed) {
    narf_linear_decomposed(lin, g, p, f.data());
  } else {
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < e; ++i) g[static_cast<std::size_t>(k) * e + i] *= p[k];
    narf_linear_concat(lin, g, f.data());
  }
  return f;
}

}  // namespace enarf
