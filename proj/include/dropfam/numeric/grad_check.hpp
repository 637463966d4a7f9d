#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dropfam/numeric/errors.hpp"

namespace dropfam {

// Central-difference gradient check. Returns the max over coordinates of
// |fd - grad| / max(1, |fd|, |grad|).
inline double finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> params,
                                      std::span<const double> analytic_grad,
                                      double epsilon = 1e-6) {
  if (params.size() != analytic_grad.size())
    throw ContractError("finite_difference_check: gradient length differs from parameter count");
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
    throw DomainError("finite_difference_check: epsilon must lie in [1e-7, 1e-3]");

  std::vector<double> theta(params.begin(), params.end());
  const double first = f(theta);
  const double second = f(theta);
  if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second))
    throw ContractError("finite_difference_check: objective is not deterministic");

  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + epsilon;
    const double up = f(theta);
    theta[i] = saved - epsilon;
    const double down = f(theta);
    theta[i] = saved;
    const double fd = (up - down) / (2.0 * epsilon);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic_grad[i])});
    worst = std::max(worst, std::abs(fd - analytic_grad[i]) / scale);
  }
  return worst;
}

}  // namespace dropfam
