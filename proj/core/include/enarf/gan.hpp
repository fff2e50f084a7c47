#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "enarf/train.hpp"

namespace enarf {

// Adversarial training loop in miniature: an ENARF generator driven by
// sampled poses and a linear discriminator on composited images. Used to
// check that every loss term produces finite values and reaches the
// generator parameters.
struct GanSmokeConfig {
  std::string preset = "capsule2";
  int steps = 10;
  int resolution = 16;
  int triplane_resolution = 16;
  SamplingConfig sampling{16, 16};
  LossWeights weights;
  Vec3 background = Vec3(0.9, 0.9, 0.9);
  double pose_std = 0.2;
  std::uint64_t seed = 0;
};

struct GanStepLog {
  double generator_adv = 0.0;
  double bone = 0.0;
  double discriminator = 0.0;
  double r1 = 0.0;
  double generator_grad_norm = 0.0;
};

struct GanSmokeResult {
  std::vector<GanStepLog> steps;
  bool finite = true;
  double min_generator_grad_norm = 0.0;
};

GanSmokeResult gan_smoke_test(const GanSmokeConfig& cfg);

}  // namespace enarf
