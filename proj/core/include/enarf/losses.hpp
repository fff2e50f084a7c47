#pragma once

#include <functional>
#include <span>
#include <vector>

#include "enarf/common.hpp"
#include "enarf/kinematics.hpp"

namespace enarf {

// Mean over rays of |C - C^|^2 + (M - M^)^2. Colors are B x 3, masks B.
// Gradients with respect to the predictions go to the optional outputs.
double dso_loss(std::span<const double> pred_rgb, std::span<const double> pred_mask,
                std::span<const double> target_rgb, std::span<const double> target_mask,
                std::span<double> grad_rgb = {}, std::span<double> grad_mask = {});

// sum (1 - M)^2 B / sum B, or 0 when no bone pixel is set.
double bone_loss(std::span<const double> mask, const BoneImage& bones,
                 std::span<double> grad_mask = {});

struct AdversarialLosses {
  double generator = 0.0;
  double discriminator = 0.0;
};

inline constexpr double kScoreEpsilon = 1e-7;

// Non-saturating losses on post-logistic scores, clamped to [eps, 1 - eps].
AdversarialLosses adversarial_losses(std::span<const double> d_real, std::span<const double> d_fake);

// Discriminator output (pre-logistic) at x; writes dD/dx into grad_x.
using DiscriminatorFn = std::function<double(std::span<const double> x, std::span<double> grad_x)>;

// E over real images of |grad_x D(x)|^2.
double r1_penalty(const DiscriminatorFn& d, std::span<const std::vector<double>> real_images);

}  // namespace enarf
