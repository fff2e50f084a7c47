#pragma once

#include <span>
#include <vector>

#include "enarf/kinematics.hpp"
#include "enarf/triplane.hpp"

namespace enarf {

// Small fully-connected generator mapping (encoded time, per-part rotations)
// to a coarse G x G six-channel deformation grid, bilinearly upsampled to the
// tri-plane resolution.
struct DeformConfig {
  int grid = 8;
  int hidden = 32;
  int time_frequencies = 4;
};

int deform_input_dim(const DeformConfig& cfg, int parts);
int deform_output_dim(const DeformConfig& cfg);

struct DeformGeneratorView {
  DeformConfig config;
  int parts = 1;
  std::span<const double> w1;  // [hidden][input]
  std::span<const double> b1;  // [hidden]
  std::span<const double> w2;  // [output][hidden]
  std::span<const double> b2;  // [output]
};

struct DeformGeneratorGrad {
  std::span<double> w1, b1, w2, b2;
};

struct DeformForward {
  std::vector<double> input;
  std::vector<double> hidden_pre;
  std::vector<double> grid;  // [3][G][G][2]
};

std::vector<double> deform_generator_input(const DeformConfig& cfg, double time,
                                           const PoseConfig& pose);
DeformForward run_deform_generator(const DeformGeneratorView& gen, double time,
                                   const PoseConfig& pose);
// Accumulates parameter gradients given d(loss)/d(grid).
void deform_generator_backward(const DeformGeneratorView& gen, const DeformForward& fwd,
                               std::span<const double> grad_grid, const DeformGeneratorGrad& grad);

// Align-corners bilinear upsampling of a [3][G][G][2] grid to [3][R][R][2].
void upsample_grid(int grid, int resolution, std::span<const double> src, std::span<double> dst);
void upsample_grid_backward(int grid, int resolution, std::span<const double> grad_dst,
                            std::span<double> grad_src);

DeformationField generate_deformation(const DeformGeneratorView& gen, int resolution, double time,
                                      const PoseConfig& pose);

}  // namespace enarf
