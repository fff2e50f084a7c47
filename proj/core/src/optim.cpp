#include "enarf/optim.hpp"

#include <cmath>

#include "enarf/common.hpp"

namespace enarf {

double effective_lr(const AdamState& state, const ParamSlice& slice) {
  return state.config.lr * std::pow(state.config.decay, static_cast<double>(state.step)) *
         slice.lr_scale;
}

void adam_step(ParamStore& params, const GradStore& grads, AdamState& state) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment sizes differ");

  const auto g = grads.values();
  for (const auto& slice : params.layout().slices()) {
    for (std::size_t i = slice.offset; i < slice.offset + slice.size; ++i) {
      if (!std::isfinite(g[i]))
        throw NumericalError("non-finite gradient in parameter slice '" + slice.name + "'");
    }
  }

  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step + 1);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  auto p = params.values();
  for (const auto& slice : params.layout().slices()) {
    const double lr = effective_lr(state, slice);
    for (std::size_t i = slice.offset; i < slice.offset + slice.size; ++i) {
      state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
      state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = state.m[i] / bc1;
      const double vhat = state.v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  ++state.step;
}

}  // namespace enarf
