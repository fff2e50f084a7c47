#pragma once

#include "enarf/common.hpp"

namespace enarf {

inline constexpr double kPsnrCap = 99.0;

double mse(const ImageView& a, const ImageView& b);
// -10 log10(MSE) for images in [0, 1]; identical images report kPsnrCap.
double psnr(const ImageView& pred, const ImageView& target);

struct SsimConfig {
  int window = 11;
  double sigma = 1.5;
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

// Mean single-scale SSIM over all fully-contained Gaussian windows and
// channels. Images must be at least window x window.
double ssim(const ImageView& pred, const ImageView& target, const SsimConfig& cfg = {});

}  // namespace enarf
