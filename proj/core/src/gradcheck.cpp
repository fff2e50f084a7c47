#include "enarf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace enarf {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult finite_diff_check(const LossWithGrad& loss, const ParamStore& params,
                                  std::span<const std::size_t> coords, double step) {
  GradStore analytic(params.layout());
  loss(params, &analytic);

  ParamStore probe = params;
  GradCheckResult result;
  for (std::size_t idx : coords) {
    const double saved = probe.values()[idx];
    probe.values()[idx] = saved + step;
    const double up = loss(probe, nullptr);
    probe.values()[idx] = saved - step;
    const double down = loss(probe, nullptr);
    probe.values()[idx] = saved;

    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic.values()[idx], numeric);
    if (err > result.max_rel_error || result.checked == 0) {
      result.max_rel_error = std::max(result.max_rel_error, err);
      if (err >= result.max_rel_error) {
        result.worst_index = idx;
        result.worst_analytic = analytic.values()[idx];
        result.worst_numeric = numeric;
      }
    }
    ++result.checked;
  }
  return result;
}

GradCheckResult finite_diff_check(const LossWithGrad& loss, const ParamStore& params,
                                  std::size_t n_coords, double step, std::uint64_t seed) {
  std::vector<std::size_t> all(params.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(n_coords, all.size()));
  return finite_diff_check(loss, params, all, step);
}

}  // namespace enarf
