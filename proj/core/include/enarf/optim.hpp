#pragma once

#include <cstdint>

#include "enarf/memory.hpp"
#include "enarf/params.hpp"

namespace enarf {

struct AdamConfig {
  double lr = 1e-3;
  // Multiplicative learning-rate decay applied once per step.
  double decay = 0.99995;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  tracked_vector<double> m;
  tracked_vector<double> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg) : config(cfg), m(size, 0.0), v(size, 0.0) {}
};

// Learning rate the next update applies to a slice:
// lr * decay^step * slice.lr_scale.
double effective_lr(const AdamState& state, const ParamSlice& slice);

// Bias-corrected Adam update. Throws NumericalError naming the slice if any
// gradient is NaN or infinite; parameters are left untouched in that case.
void adam_step(ParamStore& params, const GradStore& grads, AdamState& state);

}  // namespace enarf
