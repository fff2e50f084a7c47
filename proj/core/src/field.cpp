#include "enarf/field.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace enarf {

void RenderStats::merge(const RenderStats& o) {
  rays += o.rays;
  rays_traced += o.rays_traced;
  box_tests += o.box_tests;
  samples += o.samples;
  active_samples += o.active_samples;
  part_lookups += o.part_lookups;
  selector_lookups += o.selector_lookups;
  selector_mlp_evals += o.selector_mlp_evals;
  dense_part_evals += o.dense_part_evals;
}

void FieldTape::clear() {
  samples.clear();
  parts.clear();
  selector.clear();
  arena.clear();
}

FieldEvaluator::FieldEvaluator(const ModelConfig& config, const ModelViews& views,
                               const PoseConfig& pose, const CanonicalPose& canon)
    : config_(config), views_(views) {
  if (pose.size() != config.parts() || canon.size() != config.parts())
    throw ShapeError("pose part count does not match the model");
  frames_ = part_frames(pose, canon, config.normalize_length);
  const double a = config.cube_half_width;
  boxes_.reserve(frames_.size());
  for (const PartFrame& f : frames_) {
    // canonical(x) = L x + o, so x = L^-1 (xc - o).
    const Mat3 inv = f.linear.inverse();
    const Vec3 center = inv * (f.center - f.offset);
    const Vec3 half = inv.cwiseAbs() * Vec3::Constant(a);
    // Pad slightly so rounding never culls a ray that grazes the cube.
    const Vec3 pad = half * 1e-9 + Vec3::Constant(1e-12);
    boxes_.push_back({center - half - pad, center + half + pad});
  }
}

RadianceSample FieldEvaluator::eval(const Vec3& x, const Vec3& dir, FieldTape* tape,
                                    RenderStats* stats) const {
  if (stats != nullptr) ++stats->samples;
  thread_local std::vector<double> input;
  input.resize(config_.decoder_in_dim());
  SampleRecord rec;
  if (config_.variant == Variant::BaselineNarf)
    eval_baseline(x, input.data(), tape, &rec, stats);
  else
    eval_triplane(x, input.data(), tape, &rec, stats);
  const bool dense = config_.variant == Variant::BaselineNarf;
  if (rec.empty && !dense) {
    if (tape != nullptr) tape->samples.push_back(rec);
    return {};
  }
  if (config_.view_direction) positional_encode(dir, config_.encoding, input.data() + kFeatureChannels);
  // The dense baseline decodes every point; empty points are discarded after.
  const RadianceSample out = decode_input(views_.decoder, input.data(), tape ? &rec.dec : nullptr);
  if (stats != nullptr) ++stats->active_samples;
  if (rec.empty) {
    if (tape != nullptr) tape->samples.push_back(rec);
    return {};
  }
  if (tape != nullptr) {
    rec.input_at = tape->arena.size();
    tape->arena.insert(tape->arena.end(), input.begin(), input.end());
    tape->samples.push_back(rec);
  }
  return out;
}

void FieldEvaluator::eval_triplane(const Vec3& x, double* f, FieldTape* tape,
                                             SampleRecord* rec, RenderStats* stats) const {
  const int K = config_.parts();
  const Variant v = config_.variant;
  const double a = config_.cube_half_width;
  const int enc = config_.encoding.dim();
  thread_local std::vector<double> gamma;
  std::fill(f, f + kFeatureChannels, 0.0);
  if (tape != nullptr) rec->part_begin = static_cast<int>(tape->parts.size());
  PartRecord local;
  for (int k = 0; k < K; ++k) {
    const PartFrame& fr = frames_[k];
    const Vec3 xc = fr.canonical(x);
    if (!inside_cube(xc, fr.center, a)) continue;
    PartRecord& pr = tape != nullptr ? tape->parts.emplace_back() : local;
    pr.part = k;
    pr.taps = plane_taps(config_.shape, xc);
    switch (v) {
      case Variant::Enarf:
      case Variant::DEnarf:
        pr.prob = selector_prob(views_.triplane, pr.taps, k, pr.plane_prob.data());
        if (stats != nullptr) ++stats->selector_lookups;
        break;
      case Variant::NoSelector:
        pr.prob = 1.0 / K;
        break;
      case Variant::MlpSelector: {
        gamma.resize(enc);
        positional_encode(fr.local(x), config_.encoding, gamma.data());
        pr.prob = selector_mlp(views_.selector, k, gamma.data(), &pr.sel);
        if (tape != nullptr) {
          pr.gamma_at = tape->arena.size();
          tape->arena.insert(tape->arena.end(), gamma.begin(), gamma.end());
        }
        if (stats != nullptr) ++stats->selector_mlp_evals;
        break;
      }
      case Variant::BaselineNarf:
        break;
    }
    part_feature(views_.triplane.features, config_.shape.resolution, pr.taps, pr.fk.data());
    for (int c = 0; c < kFeatureChannels; ++c) f[c] += pr.prob * pr.fk[c];
    if (stats != nullptr) ++stats->part_lookups;
    rec->empty = false;
    ++rec->part_count;
  }
}

void FieldEvaluator::eval_baseline(const Vec3& x, double* f, FieldTape* tape,
                                             SampleRecord* rec, RenderStats* stats) const {
  const int K = config_.parts();
  const int e = config_.encoding.dim();
  const double a = config_.cube_half_width;
  thread_local std::vector<double> dense;
  thread_local std::vector<double> cat;
  thread_local std::vector<SelectorTrace> traces;
  dense.resize(static_cast<std::size_t>(K) * e + 2 * K);
  cat.resize(static_cast<std::size_t>(K) * e);
  traces.resize(K);
  double* probs = dense.data() + static_cast<std::size_t>(K) * e;
  double* masks = probs + K;
  // Every part is encoded and scored at every point, as in the original
  // formulation; the cube prior only masks the result.
  for (int k = 0; k < K; ++k) {
    double* g = dense.data() + static_cast<std::size_t>(k) * e;
    positional_encode(frames_[k].local(x), config_.encoding, g);
    const double p = selector_mlp(views_.selector, k, g, &traces[k]);
    const bool in = inside_cube(frames_[k].canonical(x), frames_[k].center, a);
    masks[k] = in ? 1.0 : 0.0;
    probs[k] = in ? p : 0.0;
    if (in) rec->empty = false;
    for (int i = 0; i < e; ++i) cat[static_cast<std::size_t>(k) * e + i] = probs[k] * g[i];
  }
  narf_linear_concat(views_.linear, cat, f);
  if (stats != nullptr) {
    stats->selector_mlp_evals += K;
    stats->dense_part_evals += K;
  }
  if (tape != nullptr && !rec->empty) {
    rec->dense_at = tape->arena.size();
    tape->arena.insert(tape->arena.end(), dense.begin(), dense.end());
    rec->sel_begin = static_cast<int>(tape->selector.size());
    tape->selector.insert(tape->selector.end(), traces.begin(), traces.end());
  }
}

void FieldEvaluator::touch_dense(GradAccumulator& acc, const SliceOffsets& o) const {
  const int din = config_.decoder_in_dim();
  acc.touch(o.dec_w1, static_cast<std::size_t>(kDecoderHidden) * din);
  acc.touch(o.dec_b1, kDecoderHidden);
  acc.touch(o.dec_w2, 4 * kDecoderHidden);
  acc.touch(o.dec_b2, 4);
  const int K = config_.parts();
  const int e = config_.encoding.dim();
  if (uses_mlp_selector(config_.variant)) {
    acc.touch(o.sel_w1, static_cast<std::size_t>(K) * kSelectorHidden * e);
    acc.touch(o.sel_b1, static_cast<std::size_t>(K) * kSelectorHidden);
    acc.touch(o.sel_w2, static_cast<std::size_t>(K) * kSelectorHidden);
    acc.touch(o.sel_b2, K);
  }
  if (config_.variant == Variant::BaselineNarf)
    acc.touch(o.linear, static_cast<std::size_t>(kFeatureChannels) * K * e);
}

void FieldEvaluator::backward(const FieldTape& tape, int sample, const Vec3& grad_color,
                              double grad_density, const GradSink& sink) const {
  const SampleRecord& rec = tape.samples[sample];
  if (rec.empty) return;
  GradAccumulator& acc = *sink.acc;
  double* base = acc.values().data();
  const SliceOffsets& o = sink.offsets;
  const double* in = tape.arena.data() + rec.input_at;
  const int din = config_.decoder_in_dim();
  thread_local std::vector<double> gin;
  gin.resize(din);
  decode_backward(views_.decoder, in, rec.dec, grad_color, grad_density,
                  {base + o.dec_w1, base + o.dec_b1, base + o.dec_w2, base + o.dec_b2}, gin.data());
  const double* g = gin.data();
  const DecoderGrad sel_grad{base + o.sel_w1, base + o.sel_b1, base + o.sel_w2, base + o.sel_b2};
  const int K = config_.parts();

  if (config_.variant == Variant::BaselineNarf) {
    const int e = config_.encoding.dim();
    const std::size_t width = static_cast<std::size_t>(K) * e;
    const double* dense = tape.arena.data() + rec.dense_at;
    const double* probs = dense + width;
    const double* masks = probs + K;
    double* gw = base + o.linear;
    for (int c = 0; c < kFeatureChannels; ++c) {
      double* row = gw + c * width;
      for (int k = 0; k < K; ++k) {
        const double s = g[c] * probs[k];
        if (s == 0.0) continue;
        const double* gk = dense + static_cast<std::size_t>(k) * e;
        double* rk = row + static_cast<std::size_t>(k) * e;
        for (int i = 0; i < e; ++i) rk[i] += s * gk[i];
      }
    }
    for (int k = 0; k < K; ++k) {
      if (masks[k] == 0.0) continue;
      const double* gk = dense + static_cast<std::size_t>(k) * e;
      double dp = 0.0;
      for (int c = 0; c < kFeatureChannels; ++c) {
        const double* wk = views_.linear.w.data() + c * width + static_cast<std::size_t>(k) * e;
        double acc_c = 0.0;
        for (int i = 0; i < e; ++i) acc_c += wk[i] * gk[i];
        dp += g[c] * acc_c;
      }
      selector_mlp_backward(views_.selector, k, gk, tape.selector[rec.sel_begin + k], dp, sel_grad,
                            nullptr);
    }
    return;
  }

  const std::size_t texels = config_.shape.texels_per_plane();
  const std::size_t fstride = texels * kFeatureChannels;
  const std::size_t lstride = texels * K;
  for (int r = 0; r < rec.part_count; ++r) {
    const PartRecord& pr = tape.parts[rec.part_begin + r];
    for (int q = 0; q < 3; ++q) {
      const BilinearTap& t = pr.taps[q];
      for (int j = 0; j < 4; ++j) {
        const double w = t.weight[j] * pr.prob;
        if (w == 0.0) continue;
        const std::size_t at = o.features + q * fstride +
                               static_cast<std::size_t>(t.texel[j]) * kFeatureChannels;
        acc.touch(at, kFeatureChannels);
        double* dst = base + at;
        for (int c = 0; c < kFeatureChannels; ++c) dst[c] += w * g[c];
      }
    }
    if (config_.variant == Variant::NoSelector) continue;
    double dp = 0.0;
    for (int c = 0; c < kFeatureChannels; ++c) dp += g[c] * pr.fk[c];
    if (config_.variant == Variant::MlpSelector) {
      selector_mlp_backward(views_.selector, pr.part, tape.arena.data() + pr.gamma_at, pr.sel, dp,
                            sel_grad, nullptr);
      continue;
    }
    for (int q = 0; q < 3; ++q) {
      const double dl = dp * pr.prob * (1.0 - pr.plane_prob[q]);
      const BilinearTap& t = pr.taps[q];
      for (int j = 0; j < 4; ++j) {
        if (t.weight[j] == 0.0) continue;
        const std::size_t at =
            o.logits + q * lstride + static_cast<std::size_t>(t.texel[j]) * K + pr.part;
        acc.touch(at, 1);
        base[at] += t.weight[j] * dl;
      }
    }
  }
}

}  // namespace enarf
