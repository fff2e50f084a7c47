#include <gtest/gtest.h>

#include "enarf/gan.hpp"
#include "enarf/losses.hpp"
#include "enarf/metrics.hpp"
#include "enarf/scene.hpp"
#include "enarf/train.hpp"
#include "test_util.hpp"

using namespace enarf;
using enarf::testing::Gen;

TEST(DsoLoss, Examples) {
  const std::vector<double> rgb{0.1, 0.2, 0.3}, mask{0.9};
  EXPECT_EQ(dso_loss(rgb, mask, rgb, mask), 0.0);
  const std::vector<double> off{0.2, 0.2, 0.3};
  EXPECT_NEAR(dso_loss(off, mask, rgb, mask), 0.01, 1e-15);
}

TEST(DsoLoss, MatchesNaiveOracle) {
  Gen g(1);
  const int n = 37;
  const auto pr = g.values(3 * n, 0, 1), tr = g.values(3 * n, 0, 1);
  const auto pm = g.values(n, 0, 1), tm = g.values(n, 0, 1);
  double want = 0.0;
  for (int r = 0; r < n; ++r) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += (pr[3 * r + c] - tr[3 * r + c]) * (pr[3 * r + c] - tr[3 * r + c]);
    s += (pm[r] - tm[r]) * (pm[r] - tm[r]);
    want += s / n;
  }
  std::vector<double> gr(3 * n), gm(n);
  EXPECT_NEAR(dso_loss(pr, pm, tr, tm, gr, gm), want, 1e-12);
  const double h = 1e-6;
  auto p2 = pm;
  p2[4] += h;
  auto p3 = pm;
  p3[4] -= h;
  EXPECT_NEAR(gm[4], (dso_loss(pr, p2, tr, tm) - dso_loss(pr, p3, tr, tm)) / (2 * h), 1e-8);
  EXPECT_THROW(dso_loss(pr, pm, tr, std::vector<double>(n - 1)), ShapeError);
}

namespace {

BoneImage bones_3x3(std::initializer_list<int> on) {
  BoneImage b;
  b.width = b.height = 3;
  b.pixels.assign(9, 0);
  for (int i : on) b.pixels[i] = 1;
  return b;
}

}  // namespace

TEST(BoneLoss, Examples) {
  const BoneImage b = bones_3x3({1, 4, 7});
  std::vector<double> m(9, 0.0);
  m[1] = m[4] = m[7] = 1.0;
  EXPECT_EQ(bone_loss(m, b), 0.0);
  std::fill(m.begin(), m.end(), 0.0);
  EXPECT_EQ(bone_loss(m, b), 1.0);
  std::fill(m.begin(), m.end(), 0.5);
  EXPECT_EQ(bone_loss(m, b), 0.25);
  EXPECT_EQ(bone_loss(m, bones_3x3({})), 0.0);
}

TEST(BoneLoss, MatchesOracleAndGradient) {
  Gen g(2);
  BoneImage b;
  b.width = 7;
  b.height = 5;
  b.pixels.resize(35);
  for (auto& p : b.pixels) p = g.uniform() < 0.3;
  b.pixels[3] = 1;
  const auto m = g.values(35, 0, 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 35; ++i) {
    num += (1 - m[i]) * (1 - m[i]) * b.pixels[i];
    den += b.pixels[i];
  }
  std::vector<double> grad(35);
  EXPECT_NEAR(bone_loss(m, b, grad), num / den, 1e-12);
  const double h = 1e-6;
  for (int i = 0; i < 35; ++i) {
    auto up = m, dn = m;
    up[i] += h;
    dn[i] -= h;
    EXPECT_NEAR(grad[i], (bone_loss(up, b) - bone_loss(dn, b)) / (2 * h), 1e-8);
  }
}

TEST(AdversarialLosses, Examples) {
  const std::vector<double> half{0.5};
  const AdversarialLosses l = adversarial_losses(half, half);
  EXPECT_NEAR(l.generator, std::log(2.0), 1e-15);
  EXPECT_NEAR(l.discriminator, 2 * std::log(2.0), 1e-15);
  const std::vector<double> sure{1.0};
  EXPECT_LT(adversarial_losses(half, sure).generator, 1e-6);
}

TEST(AdversarialLosses, MatchesOracle) {
  Gen g(3);
  const auto real = g.values(13, 0.01, 0.99), fake = g.values(9, 0.01, 0.99);
  double lg = 0.0, lr = 0.0, lf = 0.0;
  for (double s : fake) {
    lg -= std::log(s);
    lf -= std::log(1 - s);
  }
  for (double s : real) lr -= std::log(s);
  const AdversarialLosses l = adversarial_losses(real, fake);
  EXPECT_NEAR(l.generator, lg / 9, 1e-12);
  EXPECT_NEAR(l.discriminator, lr / 13 + lf / 9, 1e-12);
}

TEST(R1Penalty, Examples) {
  Gen g(4);
  std::vector<std::vector<double>> reals{g.values(12), g.values(12)};
  const DiscriminatorFn constant = [](std::span<const double>, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.3;
  };
  EXPECT_EQ(r1_penalty(constant, reals), 0.0);
  const DiscriminatorFn sum = [](std::span<const double> x, std::span<double> grad) {
    std::fill(grad.begin(), grad.end(), 1.0);
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  };
  EXPECT_EQ(r1_penalty(sum, reals), 12.0);
  const auto w = g.values(12);
  const DiscriminatorFn linear = [&](std::span<const double> x, std::span<double> grad) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      s += w[i] * x[i];
      grad[i] = w[i];
    }
    return s;
  };
  double w2 = 0.0;
  for (double v : w) w2 += v * v;
  EXPECT_NEAR(r1_penalty(linear, reals), w2, 1e-9);
}

TEST(Psnr, Examples) {
  const std::vector<double> a(12, 0.5), b(12, 0.6);
  const ImageView va{2, 2, 3, a}, vb{2, 2, 3, b};
  EXPECT_NEAR(psnr(va, vb), 20.0, 1e-9);
  EXPECT_EQ(psnr(va, va), kPsnrCap);
  EXPECT_NEAR(mse(va, vb), 0.01, 1e-15);
  const std::vector<double> c(9, 0.0);
  EXPECT_THROW(psnr(va, ImageView{3, 1, 3, c}), ShapeError);
}

namespace {

// Direct 2D-window SSIM, independent of the separable implementation.
double ssim_oracle(const ImageView& a, const ImageView& b) {
  const int W = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double kern[11][11], ksum = 0.0;
  for (int y = 0; y < W; ++y)
    for (int x = 0; x < W; ++x) {
      kern[y][x] = std::exp(-((x - 5) * (x - 5) + (y - 5) * (y - 5)) / (2 * sigma * sigma));
      ksum += kern[y][x];
    }
  double total = 0.0;
  int count = 0;
  for (int c = 0; c < a.channels; ++c)
    for (int oy = 0; oy + W <= a.height; ++oy)
      for (int ox = 0; ox + W <= a.width; ++ox) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = 0; y < W; ++y)
          for (int x = 0; x < W; ++x) {
            const double k = kern[y][x] / ksum;
            const double va = a.at(ox + x, oy + y, c), vb = b.at(ox + x, oy + y, c);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        const double vara = saa - ma * ma, varb = sbb - mb * mb, cov = sab - ma * mb;
        total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (vara + varb + c2));
        ++count;
      }
  return total / count;
}

}  // namespace

TEST(Ssim, IdenticalIsOne) {
  Gen g(5);
  const auto a = g.values(16 * 14 * 3, 0, 1);
  const ImageView v{16, 14, 3, a};
  EXPECT_NEAR(ssim(v, v), 1.0, 1e-12);
}

TEST(Ssim, MatchesDirectOracle) {
  Gen g(6);
  for (int n = 0; n < 5; ++n) {
    const int w = g.integer(11, 20), h = g.integer(11, 20), c = n % 2 ? 3 : 1;
    const auto a = g.values(w * h * c, 0, 1);
    auto b = a;
    for (double& v : b) v = std::clamp(v + g.uniform(-0.2, 0.2), 0.0, 1.0);
    const ImageView va{w, h, c, a}, vb{w, h, c, b};
    EXPECT_NEAR(ssim(va, vb), ssim_oracle(va, vb), 1e-6);
  }
}

TEST(Ssim, RejectsSmallImages) {
  const std::vector<double> a(10 * 10, 0.5);
  EXPECT_THROW(ssim(ImageView{10, 10, 1, a}, ImageView{10, 10, 1, a}), ShapeError);
}

namespace {

DsoDataset tiny_dataset() {
  const SyntheticScene scene = make_synthetic_scene(SceneSpec{}, 0);
  RigConfig rig;
  rig.resolution = 16;
  rig.views = 2;
  return make_dso_dataset(scene, rig, 3, 0.67, 32);
}

TrainConfig tiny_config(const DsoDataset& data) {
  TrainConfig cfg;
  cfg.model.shape = {8, 1.0, data.canon.size()};
  cfg.model.shape.extent = make_synthetic_scene(SceneSpec{}, 0).triplane_extent;
  cfg.sampling = {8, 8};
  cfg.batch = 32;
  cfg.iterations = 6;
  cfg.eval_every = 3;
  cfg.seed = 4;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST(TrainDso, DeterministicLogsAcrossThreadCounts) {
  const DsoDataset data = tiny_dataset();
  TrainConfig cfg = tiny_config(data);
  const TrainResult a = train_dso(data, cfg);
  cfg.threads = 2;
  const TrainResult b = train_dso(data, cfg);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss, b.log[i].loss);
    EXPECT_EQ(a.log[i].psnr_view, b.log[i].psnr_view);
    EXPECT_EQ(a.log[i].ssim_pose, b.log[i].ssim_pose);
  }
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_TRUE(std::equal(a.params.values().begin(), a.params.values().end(), b.params.values().begin()));
}

TEST(TrainDso, ResumeIsExact) {
  const DsoDataset data = tiny_dataset();
  TrainConfig cfg = tiny_config(data);
  const TrainResult full = train_dso(data, cfg);
  cfg.iterations = 3;
  const TrainResult half = train_dso(data, cfg);
  cfg.iterations = 6;
  const TrainResult rest = train_dso(data, cfg, &half.params, &half.adam);
  EXPECT_TRUE(std::equal(full.params.values().begin(), full.params.values().end(), rest.params.values().begin()));
}

TEST(TrainDso, LossDecreases) {
  const DsoDataset data = tiny_dataset();
  TrainConfig cfg = tiny_config(data);
  cfg.iterations = 60;
  cfg.eval_every = 60;
  cfg.adam.lr = 1e-2;
  const TrainResult r = train_dso(data, cfg);
  double first = 0, last = 0;
  for (int i = 0; i < 10; ++i) {
    first += r.losses[i];
    last += r.losses[50 + i];
  }
  EXPECT_LT(last, first);
}

TEST(Gan, SmokeTestFlowsGradients) {
  const GanSmokeResult r = gan_smoke_test(GanSmokeConfig{});
  ASSERT_EQ(r.steps.size(), 10u);
  EXPECT_TRUE(r.finite);
  EXPECT_GT(r.min_generator_grad_norm, 0.0);
  for (const auto& s : r.steps) {
    EXPECT_TRUE(std::isfinite(s.generator_adv));
    EXPECT_TRUE(std::isfinite(s.discriminator));
    EXPECT_TRUE(std::isfinite(s.r1));
  }
}
