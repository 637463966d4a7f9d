#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dropfam/numeric/errors.hpp"
#include "dropfam/numeric/log_ops.hpp"

namespace dropfam {

// S x C per-sample log class probabilities for one prediction.
class PredictionMatrix {
 public:
  PredictionMatrix() = default;
  PredictionMatrix(std::size_t samples, std::size_t classes)
      : samples_(samples), classes_(classes), log_probs_(samples * classes, 0.0) {}
  PredictionMatrix(std::size_t samples, std::size_t classes, std::vector<double> log_probs)
      : samples_(samples), classes_(classes), log_probs_(std::move(log_probs)) {
    if (log_probs_.size() != samples * classes)
      throw ContractError("PredictionMatrix: data length does not match S x C");
  }

  // Builds from probabilities (rows must sum to one).
  static PredictionMatrix from_probabilities(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ContractError("PredictionMatrix: no rows");
    PredictionMatrix m(rows.size(), rows[0].size());
    for (std::size_t s = 0; s < rows.size(); ++s) {
      if (rows[s].size() != m.classes_) throw ContractError("PredictionMatrix: ragged rows");
      for (std::size_t c = 0; c < m.classes_; ++c) m.at(s, c) = std::log(rows[s][c]);
    }
    return m;
  }

  std::size_t samples() const noexcept { return samples_; }
  std::size_t classes() const noexcept { return classes_; }
  double& at(std::size_t s, std::size_t c) noexcept { return log_probs_[s * classes_ + c]; }
  double at(std::size_t s, std::size_t c) const noexcept { return log_probs_[s * classes_ + c]; }
  std::span<double> row(std::size_t s) noexcept { return {log_probs_.data() + s * classes_, classes_}; }
  std::span<const double> row(std::size_t s) const noexcept {
    return {log_probs_.data() + s * classes_, classes_};
  }
  const std::vector<double>& values() const noexcept { return log_probs_; }

  // Each row a distribution within tol, entries <= 0.
  void validate(double tol = 1e-9) const {
    if (samples_ == 0 || classes_ == 0) throw ContractError("PredictionMatrix: empty");
    for (std::size_t s = 0; s < samples_; ++s) {
      double sum = 0.0;
      for (double v : row(s)) {
        if (std::isnan(v) || v > 0.0) throw ContractError("PredictionMatrix: entry > 0 or NaN");
        sum += std::exp(v);
      }
      if (std::abs(sum - 1.0) > tol) throw ContractError("PredictionMatrix: row does not sum to 1");
    }
  }

 private:
  std::size_t samples_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> log_probs_;
};

struct AggregateResult {
  std::vector<double> unnormalized_log;  // ln M_alpha per class
  double log_Z = 0.0;
  std::vector<double> normalized_log;
};

// Below this alpha the geometric (mean of logs) path is used.
inline constexpr double kAlphaSwitch = 1e-4;

inline void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("alpha must lie in [0,1]: for alpha > 1 the normaliser exceeds 1 and the "
                      "dropout objective is no longer a lower bound");
}

// Log power mean (1/alpha) ln mean_s exp(alpha v_s) of one column, computed as
// m + log1p(mean expm1(alpha (v_s - m))) / alpha with m = max_s v_s.
inline double log_power_mean(std::span<const double> column, double alpha) {
  const double n = static_cast<double>(column.size());
  if (alpha < kAlphaSwitch) {
    const double ref = column[0];
    if (ref == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double v : column) acc += v - ref;
    return ref + acc / n;
  }
  double hi = kNegInf;
  for (double v : column) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double v : column) acc += std::expm1(alpha * (v - hi));
  return hi + std::log1p(acc / n) / alpha;
}

// Renormalised power mean over the sampled predictions:
//   ln M_alpha(c) - ln Z,  Z = sum_c M_alpha(c) <= 1 for alpha <= 1.
inline AggregateResult power_mean_aggregate(const PredictionMatrix& P, double alpha) {
  require_alpha(alpha);
  if (P.samples() == 0 || P.classes() == 0) throw ContractError("power_mean_aggregate: empty matrix");
  const std::size_t S = P.samples(), C = P.classes();
  AggregateResult out;
  out.unnormalized_log.resize(C);
  std::vector<double> column(S);
  bool constant = true;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t s = 0; s < S; ++s) {
      column[s] = P.at(s, c);
      if (std::bit_cast<std::uint64_t>(column[s]) != std::bit_cast<std::uint64_t>(column[0]))
        constant = false;
    }
    out.unnormalized_log[c] = log_power_mean(column, alpha);
  }
  // Identical samples: the mean is the sample itself, already normalised.
  out.log_Z = constant ? 0.0 : log_sum_exp(out.unnormalized_log);
  out.normalized_log.resize(C);
  for (std::size_t c = 0; c < C; ++c) out.normalized_log[c] = out.unnormalized_log[c] - out.log_Z;
  return out;
}

}  // namespace dropfam
