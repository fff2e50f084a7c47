#include "enarf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace enarf {

namespace {

void check_same(const ImageView& a, const ImageView& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ShapeError("images differ in shape");
  if (a.data.size() != a.size() || b.data.size() != b.size())
    throw ShapeError("image buffer does not match its shape");
}

std::vector<double> gaussian_kernel(int n, double sigma) {
  std::vector<double> k(n);
  const double c = 0.5 * (n - 1);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    k[i] = std::exp(-((i - c) * (i - c)) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Valid-mode separable filtering of a W x H single-channel image.
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double mse(const ImageView& a, const ImageView& b) {
  check_same(a, b);
  if (a.size() == 0) throw ShapeError("empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double psnr(const ImageView& pred, const ImageView& target) {
  const double m = mse(pred, target);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(m));
}

double ssim(const ImageView& pred, const ImageView& target, const SsimConfig& cfg) {
  check_same(pred, target);
  if (pred.width < cfg.window || pred.height < cfg.window)
    throw ShapeError("image smaller than the SSIM window");
  const int w = pred.width, h = pred.height;
  const auto k = gaussian_kernel(cfg.window, cfg.sigma);
  const std::size_t px = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> x(px), y(px), xx(px), yy(px), xy(px);
  for (int c = 0; c < pred.channels; ++c) {
    for (std::size_t i = 0; i < px; ++i) {
      x[i] = pred.data[i * pred.channels + c];
      y[i] = target.data[i * pred.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, w, h, k), my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k), syy = filter_valid(yy, w, h, k);
    const auto sxy = filter_valid(xy, w, h, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      total += ((2 * mx[i] * my[i] + cfg.c1) * (2 * cxy + cfg.c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + cfg.c1) * (vx + vy + cfg.c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace enarf
