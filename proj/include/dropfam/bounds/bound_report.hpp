#pragma once

#include <cmath>
#include <vector>

#include "dropfam/bounds/enumerate.hpp"
#include "dropfam/family/evaluator.hpp"

namespace dropfam {

// Monte Carlo decomposition of the MAP lower bound over a dataset.
//   data_term        sum_i mean_s ln p(y_i | x_i, w_s)
//   power_mean_term  sum_i ln M_alpha(y_i)
//   log_Z_term       sum_i ln Z(x_i)                 (<= 0)
//   jensen_gap       power_mean_term - data_term     (>= 0)
// All three terms share the same S mask draws per example. The *_se fields
// are delta-method standard errors.
struct BoundReport {
  double alpha = 1.0;
  double lambda = 1.0;
  std::size_t samples = 0;
  std::size_t targets = 0;
  double data_term = 0.0;
  double power_mean_term = 0.0;
  double log_Z_term = 0.0;
  double jensen_gap = 0.0;
  double prior_term = 0.0;
  double data_term_se = 0.0;
  double power_mean_term_se = 0.0;
  double log_Z_term_se = 0.0;
};

namespace detail {

inline double sample_variance_of_mean(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - m) * (v - m);
  var /= static_cast<double>(x.size());
  return var / static_cast<double>(x.size());
}

}  // namespace detail

template <class Params, class Data>
BoundReport bound_report(const DropoutNet<Params>& net, const Data& data, double alpha,
                         double lambda, std::size_t samples, const SplitSeed& seed,
                         double weight_decay, unsigned threads = 1) {
  require_alpha(alpha);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("lambda must lie in [0,1]");
  if (samples == 0) throw DomainError("samples must be >= 1");
  if (data.size() == 0) throw DomainError("bound_report: dataset is empty");

  struct Partial {
    double data = 0, pm = 0, lz = 0, var_data = 0, var_pm = 0, var_lz = 0;
    std::size_t targets = 0;
  };
  std::vector<Partial> parts(data.size());
  const bool geometric = alpha < kAlphaSwitch;

  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto input = example_input(net.params, data, i);
    const auto targets = example_targets(data, i);
    const auto logits = sample_logits(net, input, lambda, samples, seed.child(i), 1);
    Partial& part = parts[i];
    part.targets = targets.size();
    // per-sample influence values, summed over positions of this example
    std::vector<double> infl_data(samples, 0.0), infl_pm(samples, 0.0), infl_lz(samples, 0.0);
    for (std::size_t pos = 0; pos < targets.size(); ++pos) {
      const auto y = static_cast<std::size_t>(targets[pos]);
      const PredictionMatrix P = prediction_matrix(logits, pos, 1.0);
      const AggregateResult agg = power_mean_aggregate(P, alpha);
      // offset by the first sample so identical samples give that value exactly
      const double v0 = P.at(0, y);
      double shift = 0.0;
      for (std::size_t s = 0; s < samples; ++s) shift += P.at(s, y) - v0;
      const double mean_log = v0 + shift / static_cast<double>(samples);
      part.data += mean_log;
      part.pm += agg.unnormalized_log[y];
      part.lz += agg.log_Z;

      // d ln M(c) / d mean(p_c^alpha) = 1 / (alpha M(c)^alpha); geometric: d/d mean(ln p_c) = 1.
      // d ln Z / d ln M(c) = M(c) / Z.
      for (std::size_t s = 0; s < samples; ++s) {
        infl_data[s] += P.at(s, y);
        if (geometric) {
          infl_pm[s] += P.at(s, y);
          for (std::size_t c = 0; c < P.classes(); ++c)
            infl_lz[s] += std::exp(agg.normalized_log[c]) * P.at(s, c);
        } else {
          infl_pm[s] += std::exp(alpha * (P.at(s, y) - agg.unnormalized_log[y])) / alpha;
          for (std::size_t c = 0; c < P.classes(); ++c)
            infl_lz[s] += std::exp(agg.normalized_log[c]) *
                          std::exp(alpha * (P.at(s, c) - agg.unnormalized_log[c])) / alpha;
        }
      }
    }
    part.var_data = detail::sample_variance_of_mean(infl_data);
    part.var_pm = detail::sample_variance_of_mean(infl_pm);
    part.var_lz = detail::sample_variance_of_mean(infl_lz);
  });

  BoundReport r;
  r.alpha = alpha;
  r.lambda = lambda;
  r.samples = samples;
  double vd = 0, vp = 0, vz = 0;
  for (const auto& p : parts) {
    r.data_term += p.data;
    r.power_mean_term += p.pm;
    r.log_Z_term += p.lz;
    r.targets += p.targets;
    vd += p.var_data;
    vp += p.var_pm;
    vz += p.var_lz;
  }
  r.jensen_gap = r.power_mean_term - r.data_term;
  r.data_term_se = std::sqrt(vd);
  r.power_mean_term_se = std::sqrt(vp);
  r.log_Z_term_se = std::sqrt(vz);
  r.prior_term = 0.5 * weight_decay * squared_norm(net.params);
  return r;
}

}  // namespace dropfam
