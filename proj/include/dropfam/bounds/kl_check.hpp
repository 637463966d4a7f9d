#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "dropfam/numeric/errors.hpp"
#include "dropfam/numeric/log_ops.hpp"
#include "dropfam/numeric/rng.hpp"

namespace dropfam {

// q'(w) = p N(w | 0, s^2 I) + (1 - p) N(w | theta, s^2 I)
struct DropoutMixture {
  double drop_probability = 0.0;
  std::vector<double> theta;
  double sigma = 1.0;
};

struct KlFactorisation {
  std::size_t steps = 1;
  double kl_product_mc = 0.0;
  double kl_product_se = 0.0;
  double kl_single_mc = 0.0;
  double kl_single_se = 0.0;
  double ratio = 0.0;  // kl_product_mc / kl_single_mc
  double ratio_se = 0.0;
  double ratio_over_steps = 0.0;
  std::optional<double> closed_form_single;  // pure Gaussian (p = 0) only
  std::optional<double> closed_form_product;
};

namespace detail {

inline double log_isotropic_normal(const std::vector<double>& w, const std::vector<double>* mean,
                                   double sigma) {
  double sq = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double d = w[j] - (mean ? (*mean)[j] : 0.0);
    sq += d * d;
  }
  const double dim = static_cast<double>(w.size());
  return -0.5 * dim * std::log(2.0 * std::numbers::pi * sigma * sigma) - sq / (2.0 * sigma * sigma);
}

inline double log_mixture(const DropoutMixture& q, const std::vector<double>& w) {
  const double p = q.drop_probability;
  if (p <= 0.0) return log_isotropic_normal(w, &q.theta, q.sigma);
  if (p >= 1.0) return log_isotropic_normal(w, nullptr, q.sigma);
  const double parts[2] = {std::log(p) + log_isotropic_normal(w, nullptr, q.sigma),
                           std::log1p(-p) + log_isotropic_normal(w, &q.theta, q.sigma)};
  return log_sum_exp(std::span<const double>(parts, 2));
}

inline void draw_mixture(const DropoutMixture& q, RandomStream& rng, std::vector<double>& w) {
  const bool dropped = rng.uniform() < q.drop_probability;
  for (std::size_t j = 0; j < w.size(); ++j)
    w[j] = (dropped ? 0.0 : q.theta[j]) + q.sigma * rng.normal();
}

// MC estimate of KL(prod_t q' || prod_t p') with its standard error.
inline std::pair<double, double> kl_product_estimate(const DropoutMixture& q, double sigma_p,
                                                     std::size_t steps, std::size_t n,
                                                     const SplitSeed& seed) {
  RandomStream rng = seed.stream();
  std::vector<double> w(q.theta.size());
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double log_ratio = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      draw_mixture(q, rng, w);
      log_ratio += log_mixture(q, w) - log_isotropic_normal(w, nullptr, sigma_p);
    }
    sum += log_ratio;
    sum_sq += log_ratio * log_ratio;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace detail

// KL(N(theta, s^2 I) || N(0, sp^2 I)) = sum_j ln(sp/s) + (s^2 + theta_j^2) / (2 sp^2) - 1/2.
inline double gaussian_kl(const std::vector<double>& theta, double sigma, double sigma_p) {
  double kl = 0.0;
  for (double t : theta)
    kl += std::log(sigma_p / sigma) + (sigma * sigma + t * t) / (2.0 * sigma_p * sigma_p) - 0.5;
  return kl;
}

// Checks that the KL between T-fold products of the per-step posterior and
// prior is T times the single-step KL, by independent MC estimates of both.
inline KlFactorisation kl_factorization_check(const DropoutMixture& q, double sigma_p,
                                              std::size_t steps, std::size_t mc_samples,
                                              const SplitSeed& seed) {
  if (!(q.sigma > 0.0) || !(sigma_p > 0.0)) throw DomainError("kl check: sigmas must be > 0");
  if (!(q.drop_probability >= 0.0 && q.drop_probability <= 1.0))
    throw DomainError("kl check: drop probability must lie in [0,1]");
  if (q.theta.empty() || q.theta.size() > 8) throw DomainError("kl check: dimension must be 1..8");
  if (steps == 0 || mc_samples < 2) throw DomainError("kl check: need steps >= 1 and >= 2 samples");

  KlFactorisation r;
  r.steps = steps;
  std::tie(r.kl_product_mc, r.kl_product_se) =
      detail::kl_product_estimate(q, sigma_p, steps, mc_samples, seed.child(0));
  std::tie(r.kl_single_mc, r.kl_single_se) =
      detail::kl_product_estimate(q, sigma_p, 1, mc_samples, seed.child(1));
  r.ratio = r.kl_product_mc / r.kl_single_mc;
  const double rel_p = r.kl_product_mc != 0.0 ? r.kl_product_se / r.kl_product_mc : 0.0;
  const double rel_s = r.kl_single_mc != 0.0 ? r.kl_single_se / r.kl_single_mc : 0.0;
  r.ratio_se = std::abs(r.ratio) * std::sqrt(rel_p * rel_p + rel_s * rel_s);
  r.ratio_over_steps = r.ratio / static_cast<double>(steps);
  if (q.drop_probability == 0.0) {
    r.closed_form_single = gaussian_kl(q.theta, q.sigma, sigma_p);
    r.closed_form_product = static_cast<double>(steps) * *r.closed_form_single;
  }
  return r;
}

}  // namespace dropfam
