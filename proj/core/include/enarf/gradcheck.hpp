#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "enarf/params.hpp"

namespace enarf {

// Loss evaluated at `params`; when `grad` is non-null the analytic gradient is
// accumulated into it as well.
using LossWithGrad = std::function<double(const ParamStore& params, GradStore* grad)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Central differences on the given flat coordinates. The relative error of a
// coordinate is |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
GradCheckResult finite_diff_check(const LossWithGrad& loss, const ParamStore& params,
                                  std::span<const std::size_t> coords, double step);

// Same, on `n_coords` coordinates drawn uniformly without replacement.
GradCheckResult finite_diff_check(const LossWithGrad& loss, const ParamStore& params,
                                  std::size_t n_coords, double step, std::uint64_t seed);

double relative_error(double analytic, double numeric);

}  // namespace enarf
