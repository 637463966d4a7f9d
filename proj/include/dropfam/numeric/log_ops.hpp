#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "dropfam/numeric/errors.hpp"

namespace dropfam {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ln sum_i exp(v_i) by max-shift. Entries must be finite or -inf, not all -inf.
inline double log_sum_exp(std::span<const double> v) {
  if (v.empty()) throw DomainError("log_sum_exp: empty input");
  double hi = kNegInf;
  for (double x : v) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
      throw DomainError("log_sum_exp: entries must be finite or -inf");
    hi = std::max(hi, x);
  }
  if (hi == kNegInf) throw DomainError("log_sum_exp: all entries are -inf");
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

inline double log_sum_exp(const std::vector<double>& v) {
  return log_sum_exp(std::span<const double>(v));
}

inline void require_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw DomainError("temperature must be finite and > 0");
}

// log softmax(logits / T), written into out (may alias logits).
inline void log_softmax_into(std::span<const double> logits, double temperature,
                             std::span<double> out) {
  require_temperature(temperature);
  double hi = kNegInf;
  for (double z : logits) hi = std::max(hi, z / temperature);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z / temperature - hi);
  const double log_norm = hi + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] / temperature - log_norm;
}

inline std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> out(logits.size());
  log_softmax_into(logits, temperature, out);
  return out;
}

inline std::vector<double> softmax_with_temperature(std::span<const double> logits,
                                                    double temperature) {
  require_temperature(temperature);
  if (logits.empty()) throw DomainError("softmax_with_temperature: empty logits");
  double hi = kNegInf;
  for (double z : logits) hi = std::max(hi, z / temperature);
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / temperature - hi);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

inline std::vector<double> softmax_with_temperature(const std::vector<double>& logits,
                                                    double temperature) {
  return softmax_with_temperature(std::span<const double>(logits), temperature);
}

// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace dropfam
