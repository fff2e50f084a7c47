#include <gtest/gtest.h>

#include <limits>

#include "enarf/decoder.hpp"
#include "test_util.hpp"

using namespace enarf;
using enarf::testing::Gen;

TEST(PositionalEncode, ZeroInput) {
  const auto v = positional_encode(Vec3::Zero(), PosEncConfig{10, true});
  ASSERT_EQ(v.size(), 63u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(v[i], 0.0);
  for (int i = 3; i < 63; i += 2) {
    EXPECT_EQ(v[i], 0.0);
    EXPECT_EQ(v[i + 1], 1.0);
  }
}

TEST(PositionalEncode, Dimensions) {
  EXPECT_EQ(positional_encode(Vec3::Ones(), PosEncConfig{10, true}).size(), 63u);
  EXPECT_EQ(positional_encode(Vec3::Ones(), PosEncConfig{10, false}).size(), 60u);
  EXPECT_EQ((PosEncConfig{4, true}.dim()), 27);
}

TEST(PositionalEncode, LayoutAndRange) {
  Gen g(1);
  for (int n = 0; n < 100; ++n) {
    const Vec3 x = g.vec();
    const auto v = positional_encode(x, PosEncConfig{6, true});
    for (int d = 0; d < 3; ++d) EXPECT_EQ(v[d], x[d]);
    for (int i = 0; i < 6; ++i)
      for (int d = 0; d < 3; ++d) {
        const double a = std::ldexp(kPi, i) * x[d];
        EXPECT_NEAR(v[3 + 6 * i + 2 * d], std::sin(a), 1e-12);
        EXPECT_NEAR(v[3 + 6 * i + 2 * d + 1], std::cos(a), 1e-12);
      }
    for (std::size_t i = 3; i < v.size(); ++i) {
      EXPECT_LE(std::abs(v[i]), 1.0);
    }
  }
}

TEST(Decode, ZeroWeights) {
  const DecoderWeights w = DecoderWeights::zeros(32);
  const std::vector<double> f(32, 0.3);
  const RadianceSample s = decode(f, w.view());
  EXPECT_EQ(s.color, Vec3(0.5, 0.5, 0.5));
  EXPECT_DOUBLE_EQ(s.density, std::log(2.0));
}

TEST(Decode, MatchesNaiveOracle) {
  Gen g(2);
  const DecoderWeights w = DecoderWeights::random(32, 3);
  for (int n = 0; n < 50; ++n) {
    const auto f = g.values(32, -2, 2);
    double o[4];
    std::vector<double> h(64);
    for (int j = 0; j < 64; ++j) {
      double a = w.b1[j];
      for (int i = 0; i < 32; ++i) a += w.w1[j * 32 + i] * f[i];
      h[j] = a > 0 ? a : 0;
    }
    for (int j = 0; j < 4; ++j) {
      o[j] = w.b2[j];
      for (int i = 0; i < 64; ++i) o[j] += w.w2[j * 64 + i] * h[i];
    }
    const RadianceSample s = decode(f, w.view());
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.color[c], 1.0 / (1.0 + std::exp(-o[c])), 1e-12);
    EXPECT_NEAR(s.density, std::log1p(std::exp(o[3])), 1e-12);
  }
}

TEST(Decode, DensityNonNegativeProperty) {
  Gen g(4);
  for (int n = 0; n < 200; ++n) {
    const DecoderWeights w = DecoderWeights::random(32, n);
    const RadianceSample s = decode(g.values(32, -50, 50), w.view());
    EXPECT_GE(s.density, 0.0);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(s.color[c], 0.0);
      EXPECT_LE(s.color[c], 1.0);
    }
  }
}

TEST(Decode, ViewDirectionWidth) {
  Gen g(5);
  const PosEncConfig enc{10, true};
  const DecoderWeights plain = DecoderWeights::random(32, 1);
  const DecoderWeights viewed = DecoderWeights::random(32 + enc.dim(), 1);
  EXPECT_EQ(viewed.in_dim - plain.in_dim, 3 * (2 * 10 + 1));
  const auto f = g.values(32);
  EXPECT_NO_THROW(decode(f, viewed.view(), Vec3::UnitZ(), enc));
  EXPECT_THROW(decode(f, viewed.view()), ShapeError);
  EXPECT_THROW(decode(f, plain.view(), Vec3::UnitZ(), enc), ShapeError);
}

TEST(Decode, RejectsNonFinite) {
  const DecoderWeights w = DecoderWeights::zeros(32);
  std::vector<double> f(32, 0.0);
  f[5] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(decode(f, w.view()), ValidationError);
}

TEST(DecodeBackward, FiniteDifference) {
  Gen g(6);
  const DecoderWeights w = DecoderWeights::random(32, 9);
  const auto f = g.values(32, -1, 1);
  const Vec3 gc(0.3, -0.7, 0.2);
  const double gd = 0.9;
  auto loss = [&](const DecoderWeights& ww, const std::vector<double>& in) {
    const RadianceSample s = decode_input(ww.view(), in.data(), nullptr);
    return gc.dot(s.color) + gd * s.density;
  };
  DecoderTrace tr;
  decode_input(w.view(), f.data(), &tr);
  DecoderWeights gw = DecoderWeights::zeros(32);
  std::vector<double> gin(32);
  decode_backward(w.view(), f.data(), tr, gc, gd, {gw.w1.data(), gw.b1.data(), gw.w2.data(), gw.b2.data()},
                  gin.data());
  const double h = 1e-6;
  for (int i = 0; i < 32; ++i) {
    auto p = f, m = f;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(gin[i], (loss(w, p) - loss(w, m)) / (2 * h), 1e-7);
  }
  for (int n = 0; n < 40; ++n) {
    const int i = g.integer(0, static_cast<int>(w.w1.size()) - 1);
    DecoderWeights p = w, m = w;
    p.w1[i] += h;
    m.w1[i] -= h;
    EXPECT_NEAR(gw.w1[i], (loss(p, f) - loss(m, f)) / (2 * h), 1e-7);
  }
  for (int i = 0; i < 4; ++i) {
    DecoderWeights p = w, m = w;
    p.b2[i] += h;
    m.b2[i] -= h;
    EXPECT_NEAR(gw.b2[i], (loss(p, f) - loss(m, f)) / (2 * h), 1e-7);
  }
}

namespace {

struct Baseline {
  int parts;
  PosEncConfig enc;
  std::vector<double> w, s_w1, s_b1, s_w2, s_b2;
  NarfLinearView lin() const { return {parts, enc.dim(), w}; }
  SelectorMlpView sel() const { return {parts, enc.dim(), s_w1, s_b1, s_w2, s_b2}; }
};

Baseline random_baseline(Gen& g, int K) {
  Baseline b{K, PosEncConfig{}, {}, {}, {}, {}, {}};
  const int e = b.enc.dim();
  b.w = g.values(static_cast<std::size_t>(kFeatureChannels) * K * e, -0.2, 0.2);
  b.s_w1 = g.values(static_cast<std::size_t>(K) * kSelectorHidden * e, -0.3, 0.3);
  b.s_b1 = g.values(static_cast<std::size_t>(K) * kSelectorHidden, -0.1, 0.1);
  b.s_w2 = g.values(static_cast<std::size_t>(K) * kSelectorHidden, -1, 1);
  b.s_b2 = g.values(K, -0.5, 0.5);
  return b;
}

}  // namespace

TEST(NarfBaseline, ConcatenatedEqualsDecomposed) {
  Gen g(7);
  const double inf = std::numeric_limits<double>::infinity();
  for (int K = 1; K <= 4; ++K) {
    const Baseline b = random_baseline(g, K);
    const PoseConfig pose = g.pose(K, 0.3);
    const CanonicalPose canon = CanonicalPose::from_pose(g.pose(K, 0.3));
    const auto frames = part_frames(pose, canon, false);
    for (int n = 0; n < 100; ++n) {
      const Vec3 x = g.vec(-0.5, 0.5);
      for (double a : {inf, 1.0 / 3.0}) {
        const Feature c = narf_baseline_feature(x, frames, b.lin(), b.sel(), b.enc, BaselinePath::Concatenated, a);
        const Feature d = narf_baseline_feature(x, frames, b.lin(), b.sel(), b.enc, BaselinePath::Decomposed, a);
        for (int i = 0; i < kFeatureChannels; ++i) EXPECT_NEAR(c[i], d[i], 1e-10);
      }
    }
  }
}

TEST(NarfBaseline, ZeroProbabilitiesGiveZero) {
  Gen g(8);
  Baseline b = random_baseline(g, 3);
  std::fill(b.s_b2.begin(), b.s_b2.end(), -2000.0);
  const PoseConfig pose = g.pose(3, 0.3);
  const auto frames = part_frames(pose, CanonicalPose::from_pose(pose), false);
  for (auto path : {BaselinePath::Concatenated, BaselinePath::Decomposed}) {
    const Feature f = narf_baseline_feature(g.vec(), frames, b.lin(), b.sel(), b.enc, path,
                                            std::numeric_limits<double>::infinity());
    for (double v : f) EXPECT_EQ(v, 0.0);
  }
}

TEST(NarfBaseline, SinglePartSaturated) {
  Gen g(9);
  Baseline b = random_baseline(g, 1);
  std::fill(b.s_w2.begin(), b.s_w2.end(), 0.0);
  b.s_b2[0] = 2000.0;
  const PoseConfig pose = g.pose(1, 0.3);
  const auto frames = part_frames(pose, CanonicalPose::from_pose(pose), false);
  const Vec3 x = g.vec(-0.2, 0.2);
  const auto gamma = positional_encode(to_local(x, pose.parts[0].transform), b.enc);
  const Feature f = narf_baseline_feature(x, frames, b.lin(), b.sel(), b.enc, BaselinePath::Concatenated,
                                          std::numeric_limits<double>::infinity());
  for (int r = 0; r < kFeatureChannels; ++r) {
    double want = 0.0;
    for (int i = 0; i < b.enc.dim(); ++i) want += b.w[r * b.enc.dim() + i] * gamma[i];
    EXPECT_NEAR(f[r], want, 1e-12);
  }
}

TEST(NarfLinear, DecomposedMatchesConcatProperty) {
  Gen g(10);
  for (int K = 1; K <= 4; ++K) {
    const int e = 9;
    const auto w = g.values(static_cast<std::size_t>(kFeatureChannels) * K * e);
    const NarfLinearView lin{K, e, w};
    for (int n = 0; n < 250; ++n) {
      const auto enc = g.values(static_cast<std::size_t>(K) * e, -3, 3);
      auto p = g.values(K, 0, 1);
      if (g.uniform() < 0.3) p[g.integer(0, K - 1)] = 0.0;
      std::vector<double> masked(enc);
      for (int k = 0; k < K; ++k)
        for (int i = 0; i < e; ++i) masked[k * e + i] *= p[k];
      double a[kFeatureChannels], b[kFeatureChannels];
      narf_linear_concat(lin, masked, a);
      narf_linear_decomposed(lin, enc, p, b);
      for (int i = 0; i < kFeatureChannels; ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
    }
  }
}

TEST(SelectorMlp, BackwardFiniteDifference) {
  Gen g(11);
  const Baseline b = random_baseline(g, 2);
  const auto in = g.values(b.enc.dim(), -1, 1);
  SelectorTrace tr;
  selector_mlp(b.sel(), 1, in.data(), &tr);
  std::vector<double> gw1(b.s_w1.size()), gb1(b.s_b1.size()), gw2(b.s_w2.size()), gb2(b.s_b2.size());
  std::vector<double> gin(in.size());
  selector_mlp_backward(b.sel(), 1, in.data(), tr, 1.0, {gw1.data(), gb1.data(), gw2.data(), gb2.data()}, gin.data());
  const double h = 1e-6;
  for (std::size_t i = 0; i < in.size(); i += 3) {
    auto p = in, m = in;
    p[i] += h;
    m[i] -= h;
    const double fd = (selector_mlp(b.sel(), 1, p.data(), nullptr) - selector_mlp(b.sel(), 1, m.data(), nullptr)) / (2 * h);
    EXPECT_NEAR(gin[i], fd, 1e-8);
  }
  for (int j = 0; j < kSelectorHidden; ++j) {
    Baseline p = b, m = b;
    p.s_w2[kSelectorHidden + j] += h;
    m.s_w2[kSelectorHidden + j] -= h;
    const double fd = (selector_mlp(p.sel(), 1, in.data(), nullptr) - selector_mlp(m.sel(), 1, in.data(), nullptr)) / (2 * h);
    EXPECT_NEAR(gw2[kSelectorHidden + j], fd, 1e-8);
    EXPECT_EQ(gw2[j], 0.0);
  }
}
