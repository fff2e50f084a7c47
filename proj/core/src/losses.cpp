#include "enarf/losses.hpp"

#include <algorithm>
#include <cmath>

namespace enarf {

double dso_loss(std::span<const double> pred_rgb, std::span<const double> pred_mask,
                std::span<const double> target_rgb, std::span<const double> target_mask,
                std::span<double> grad_rgb, std::span<double> grad_mask) {
  const std::size_t n = pred_mask.size();
  if (target_mask.size() != n || pred_rgb.size() != 3 * n || target_rgb.size() != 3 * n)
    throw ShapeError("dso_loss: prediction and target ray counts differ");
  if (n == 0) return 0.0;
  const bool want_grad = !grad_rgb.empty() || !grad_mask.empty();
  if (want_grad && (grad_rgb.size() != 3 * n || grad_mask.size() != n))
    throw ShapeError("dso_loss: gradient buffers have the wrong size");
  const double inv = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (int c = 0; c < 3; ++c) {
      const double d = pred_rgb[3 * r + c] - target_rgb[3 * r + c];
      sum += d * d;
      if (want_grad) grad_rgb[3 * r + c] = 2.0 * d * inv;
    }
    const double d = pred_mask[r] - target_mask[r];
    sum += d * d;
    if (want_grad) grad_mask[r] = 2.0 * d * inv;
  }
  return sum * inv;
}

double bone_loss(std::span<const double> mask, const BoneImage& bones, std::span<double> grad_mask) {
  const std::size_t n = static_cast<std::size_t>(bones.width) * bones.height;
  if (mask.size() != n || bones.pixels.size() != n) throw ShapeError("bone_loss: image sizes differ");
  if (!grad_mask.empty() && grad_mask.size() != n) throw ShapeError("bone_loss: gradient size");
  const std::size_t count = bones.count();
  if (!grad_mask.empty()) std::fill(grad_mask.begin(), grad_mask.end(), 0.0);
  if (count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!bones.pixels[i]) continue;
    const double d = 1.0 - mask[i];
    sum += d * d;
    if (!grad_mask.empty()) grad_mask[i] = -2.0 * d * inv;
  }
  return sum * inv;
}

AdversarialLosses adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake) {
  auto clamp = [](double s) { return std::clamp(s, kScoreEpsilon, 1.0 - kScoreEpsilon); };
  AdversarialLosses out;
  if (!d_fake.empty()) {
    double g = 0.0, d = 0.0;
    for (double s : d_fake) {
      g -= std::log(clamp(s));
      d -= std::log(1.0 - clamp(s));
    }
    out.generator = g / static_cast<double>(d_fake.size());
    out.discriminator = d / static_cast<double>(d_fake.size());
  }
  if (!d_real.empty()) {
    double d = 0.0;
    for (double s : d_real) d -= std::log(clamp(s));
    out.discriminator += d / static_cast<double>(d_real.size());
  }
  return out;
}

double r1_penalty(const DiscriminatorFn& d, std::span<const std::vector<double>> real_images) {
  if (real_images.empty()) return 0.0;
  double total = 0.0;
  std::vector<double> grad;
  for (const auto& x : real_images) {
    grad.assign(x.size(), 0.0);
    d(x, grad);
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    total += sq;
  }
  return total / static_cast<double>(real_images.size());
}

}  // namespace enarf
