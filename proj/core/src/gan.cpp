#include "enarf/gan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "enarf/losses.hpp"
#include "enarf/oracle.hpp"

namespace enarf {

namespace {

std::vector<double> with_background(const RenderOutput& r, const Vec3& bg) {
  std::vector<double> b(r.rgb.size());
  for (std::size_t p = 0; p < r.mask.size(); ++p)
    for (int c = 0; c < 3; ++c) b[3 * p + c] = bg[c];
  return composite_background(r, b);
}

double dot(const std::vector<double>& a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

GanSmokeResult gan_smoke_test(const GanSmokeConfig& cfg) {
  const SyntheticScene scene = make_synthetic_scene({cfg.preset}, cfg.seed);
  const CanonicalPose canon = scene.canonical();

  ModelConfig mc;
  mc.variant = Variant::Enarf;
  mc.shape = {cfg.triplane_resolution, scene.triplane_extent, scene.parts()};
  mc.normalize_length = true;
  mc.seed = cfg.seed;
  const Model model(mc);
  ParamStore gen = model.init_params();
  AdamState gen_adam(gen.size(), {});

  RigConfig rig;
  rig.resolution = cfg.resolution;
  const Camera camera = camera_ring(rig, 1, 0.0)[0];
  const int W = camera.width, H = camera.height;
  const std::size_t dim = 3 * static_cast<std::size_t>(W) * H;

  ParamLayout dl;
  dl.add("disc.w", dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  dl.add("disc.b", 1);
  ParamStore disc(dl);
  {
    std::mt19937_64 rng(derive_seed(cfg.seed, 77));
    std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    for (double& v : disc.slice("disc.w")) v = n(rng);
  }
  AdamState disc_adam(disc.size(), {});

  PosePrior prior;
  prior.root = scene.root;
  prior.random_yaw = true;
  for (int k = 0; k < scene.parts(); ++k)
    prior.joints.push_back({scene.animation.base[k], Mat3::Identity() * cfg.pose_std * cfg.pose_std});
  std::mt19937_64 pose_rng(derive_seed(cfg.seed, 78));

  auto score = [&](std::span<const double> x) {
    return dot(std::vector<double>(disc.slice("disc.w").begin(), disc.slice("disc.w").end()), x) +
           disc.slice("disc.b")[0];
  };
  const DiscriminatorFn d_fn = [&](std::span<const double> x, std::span<double> grad_x) {
    const auto w = disc.slice("disc.w");
    std::copy(w.begin(), w.end(), grad_x.begin());
    return score(x);
  };

  GanSmokeResult res;
  res.min_generator_grad_norm = std::numeric_limits<double>::infinity();
  GradStore ggrad(model.layout());
  BatchGradient bg(model, gen.size(), 4);
  std::vector<double> buffer(bg.buffer_size());
  RenderOptions opts;
  opts.sampling = cfg.sampling;

  for (int step = 0; step < cfg.steps; ++step) {
    GanStepLog log;
    const PoseSample fake_pose = sample_pose_gaussian(prior, scene.skeleton, scene.lengths, pose_rng);
    const PoseSample real_pose = sample_pose_gaussian(prior, scene.skeleton, scene.lengths, pose_rng);
    opts.seed = derive_seed(cfg.seed, 79, static_cast<std::uint64_t>(step));

    // Generator update.
    const PreparedFrame prepared(model, gen, fake_pose.pose, canon, 0.0);
    const RenderOutput fg = render_image(prepared.field(), camera, opts);
    const std::vector<double> fake = with_background(fg, cfg.background);
    const double s_fake = score(fake);
    const double d_fake = sigmoid(s_fake);
    const double p_fake = std::clamp(d_fake, kScoreEpsilon, 1.0 - kScoreEpsilon);
    log.generator_adv = adversarial_losses({}, std::span<const double>(&d_fake, 1)).generator;
    const BoneImage bones = rasterize_bones(fake_pose.pose, scene.skeleton, camera);
    std::vector<double> bone_grad(fg.mask.size());
    log.bone = bone_loss(fg.mask, bones, bone_grad);

    // d(-log sigmoid(s))/ds = -(1 - sigmoid(s)); zero once the clamp is active.
    const double ds = p_fake == d_fake ? -(1.0 - d_fake) : 0.0;
    const auto w = disc.slice("disc.w");
    const auto boxes = prepared.field().world_boxes();
    ggrad.zero();
    bg.run(W * H, 0, prepared.field(),
           [&](int p, RayWorkspace& ws, const GradSink& sink) {
             const Ray ray = pixel_ray(camera, p % W, p / W);
             if (!ray_hits_any(ray, boxes)) return 0.0;
             StreamRng rng(opts.seed, static_cast<std::uint64_t>(p));
             trace_ray(prepared.field(), ray, opts.sampling, rng, ws, nullptr);
             Vec3 g_rgb;
             double g_mask = cfg.weights.bone * bone_grad[p];
             for (int c = 0; c < 3; ++c) {
               g_rgb[c] = ds * w[3 * p + c];
               g_mask -= g_rgb[c] * cfg.background[c];
             }
             backprop_ray(prepared.field(), ws, g_rgb, g_mask, 0.0, sink);
             return 0.0;
           },
           buffer);
    finish_frame_backward(model, gen, prepared, buffer, ggrad);
    const auto feats = gen.slice(slice_names::kFeatures);
    auto gfeats = ggrad.slice(slice_names::kFeatures);
    for (std::size_t i = 0; i < feats.size(); ++i)
      gfeats[i] += 2.0 * cfg.weights.l2 * feats[i] / static_cast<double>(feats.size());
    double norm = 0.0;
    for (double g : ggrad.values()) norm += g * g;
    log.generator_grad_norm = std::sqrt(norm);
    adam_step(gen, ggrad, gen_adam);

    // Discriminator update with the R1 penalty on real images.
    const RenderOutput real_fg = oracle_render(scene, real_pose.pose, camera, 64);
    const std::vector<double> real = with_background(real_fg, cfg.background);
    const double s_real = score(real);
    const double s_fake_now = score(fake);
    const double d_real = sigmoid(s_real), d_fake_now = sigmoid(s_fake_now);
    const AdversarialLosses adv =
        adversarial_losses(std::span<const double>(&d_real, 1), std::span<const double>(&d_fake_now, 1));
    const std::vector<std::vector<double>> reals{real};
    log.r1 = r1_penalty(d_fn, reals);
    log.discriminator = adv.discriminator + 0.5 * cfg.weights.r1 * log.r1;

    GradStore dgrad(dl);
    auto gw = dgrad.slice("disc.w");
    const double a = -(1.0 - d_real), b = d_fake_now;
    for (std::size_t i = 0; i < dim; ++i) gw[i] = a * real[i] + b * fake[i] + cfg.weights.r1 * w[i];
    dgrad.slice("disc.b")[0] = a + b;
    adam_step(disc, dgrad, disc_adam);

    for (double v : {log.generator_adv, log.bone, log.discriminator, log.r1, log.generator_grad_norm})
      if (!std::isfinite(v)) res.finite = false;
    res.min_generator_grad_norm = std::min(res.min_generator_grad_norm, log.generator_grad_norm);
    res.steps.push_back(log);
  }
  return res;
}

}  // namespace enarf
