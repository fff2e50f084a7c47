#include "enarf/deformation.hpp"

#include <algorithm>
#include <cmath>

namespace enarf {

int deform_input_dim(const DeformConfig& cfg, int parts) {
  return 2 * cfg.time_frequencies + 1 + 9 * parts;
}

int deform_output_dim(const DeformConfig& cfg) { return 3 * cfg.grid * cfg.grid * 2; }

std::vector<double> deform_generator_input(const DeformConfig& cfg, double time,
                                           const PoseConfig& pose) {
  std::vector<double> in;
  in.reserve(deform_input_dim(cfg, pose.size()));
  in.push_back(time);
  for (int i = 0; i < cfg.time_frequencies; ++i) {
    const double a = std::ldexp(kPi * time, i);
    in.push_back(std::sin(a));
    in.push_back(std::cos(a));
  }
  for (const auto& part : pose.parts) {
    const Mat3& r = part.transform.rotation;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) in.push_back(r(i, j));
  }
  return in;
}

DeformForward run_deform_generator(const DeformGeneratorView& gen, double time,
                                   const PoseConfig& pose) {
  const int in_dim = deform_input_dim(gen.config, gen.parts);
  const int hidden = gen.config.hidden;
  const int out_dim = deform_output_dim(gen.config);
  if (pose.size() != gen.parts) throw ShapeError("deformation generator part count mismatch");

  DeformForward fwd;
  fwd.input = deform_generator_input(gen.config, time, pose);
  fwd.hidden_pre.assign(hidden, 0.0);
  for (int h = 0; h < hidden; ++h) {
    double acc = gen.b1[h];
    const double* row = gen.w1.data() + static_cast<std::size_t>(h) * in_dim;
    for (int i = 0; i < in_dim; ++i) acc += row[i] * fwd.input[i];
    fwd.hidden_pre[h] = acc;
  }
  fwd.grid.assign(out_dim, 0.0);
  for (int o = 0; o < out_dim; ++o) {
    double acc = gen.b2[o];
    const double* row = gen.w2.data() + static_cast<std::size_t>(o) * hidden;
    for (int h = 0; h < hidden; ++h) acc += row[h] * std::max(fwd.hidden_pre[h], 0.0);
    fwd.grid[o] = acc;
  }
  return fwd;
}

void deform_generator_backward(const DeformGeneratorView& gen, const DeformForward& fwd,
                               std::span<const double> grad_grid, const DeformGeneratorGrad& grad) {
  const int in_dim = deform_input_dim(gen.config, gen.parts);
  const int hidden = gen.config.hidden;
  const int out_dim = deform_output_dim(gen.config);
  std::vector<double> dh(hidden, 0.0);
  for (int o = 0; o < out_dim; ++o) {
    const double g = grad_grid[o];
    if (g == 0.0) continue;
    grad.b2[o] += g;
    const double* row = gen.w2.data() + static_cast<std::size_t>(o) * hidden;
    double* grow = grad.w2.data() + static_cast<std::size_t>(o) * hidden;
    for (int h = 0; h < hidden; ++h) {
      grow[h] += g * std::max(fwd.hidden_pre[h], 0.0);
      dh[h] += g * row[h];
    }
  }
  for (int h = 0; h < hidden; ++h) {
    if (fwd.hidden_pre[h] <= 0.0) continue;
    grad.b1[h] += dh[h];
    double* grow = grad.w1.data() + static_cast<std::size_t>(h) * in_dim;
    for (int i = 0; i < in_dim; ++i) grow[i] += dh[h] * fwd.input[i];
  }
}

namespace {

struct UpsampleTap {
  int i0;
  double f;
};

UpsampleTap upsample_tap(int grid, int resolution, int i) {
  const double g = static_cast<double>(i) * (grid - 1) / (resolution - 1);
  const int i0 = std::min(static_cast<int>(g), grid - 2);
  return {i0, g - i0};
}

}  // namespace

void upsample_grid(int grid, int resolution, std::span<const double> src, std::span<double> dst) {
  const std::size_t gstride = static_cast<std::size_t>(grid) * grid * 2;
  const std::size_t rstride = static_cast<std::size_t>(resolution) * resolution * 2;
  for (int p = 0; p < 3; ++p) {
    const double* s = src.data() + p * gstride;
    double* d = dst.data() + p * rstride;
    for (int v = 0; v < resolution; ++v) {
      const UpsampleTap tv = upsample_tap(grid, resolution, v);
      for (int u = 0; u < resolution; ++u) {
        const UpsampleTap tu = upsample_tap(grid, resolution, u);
        const std::size_t out = (static_cast<std::size_t>(v) * resolution + u) * 2;
        for (int c = 0; c < 2; ++c) {
          auto at = [&](int y, int x) { return s[(static_cast<std::size_t>(y) * grid + x) * 2 + c]; };
          d[out + c] = (1 - tv.f) * ((1 - tu.f) * at(tv.i0, tu.i0) + tu.f * at(tv.i0, tu.i0 + 1)) +
                       tv.f * ((1 - tu.f) * at(tv.i0 + 1, tu.i0) + tu.f * at(tv.i0 + 1, tu.i0 + 1));
        }
      }
    }
  }
}

void upsample_grid_backward(int grid, int resolution, std::span<const double> grad_dst,
                            std::span<double> grad_src) {
  const std::size_t gstride = static_cast<std::size_t>(grid) * grid * 2;
  const std::size_t rstride = static_cast<std::size_t>(resolution) * resolution * 2;
  for (int p = 0; p < 3; ++p) {
    double* s = grad_src.data() + p * gstride;
    const double* d = grad_dst.data() + p * rstride;
    for (int v = 0; v < resolution; ++v) {
      const UpsampleTap tv = upsample_tap(grid, resolution, v);
      for (int u = 0; u < resolution; ++u) {
        const UpsampleTap tu = upsample_tap(grid, resolution, u);
        const std::size_t out = (static_cast<std::size_t>(v) * resolution + u) * 2;
        for (int c = 0; c < 2; ++c) {
          const double g = d[out + c];
          auto at = [&](int y, int x) -> double& {
            return s[(static_cast<std::size_t>(y) * grid + x) * 2 + c];
          };
          at(tv.i0, tu.i0) += (1 - tv.f) * (1 - tu.f) * g;
          at(tv.i0, tu.i0 + 1) += (1 - tv.f) * tu.f * g;
          at(tv.i0 + 1, tu.i0) += tv.f * (1 - tu.f) * g;
          at(tv.i0 + 1, tu.i0 + 1) += tv.f * tu.f * g;
        }
      }
    }
  }
}

DeformationField generate_deformation(const DeformGeneratorView& gen, int resolution, double time,
                                      const PoseConfig& pose) {
  const DeformForward fwd = run_deform_generator(gen, time, pose);
  DeformationField field = DeformationField::zeros(resolution);
  upsample_grid(gen.config.grid, resolution, fwd.grid, field.data);
  return field;
}

}  // namespace enarf
