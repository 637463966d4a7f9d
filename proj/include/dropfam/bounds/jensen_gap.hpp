#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "dropfam/numeric/errors.hpp"

namespace dropfam {

// h(l; mu) = (phi(l) - phi(mu)) / (l - mu)^2 - phi'(mu) / (l - mu), phi = -ln.
// Near l = mu the removable singularity is evaluated by its series
//   h = (1/mu^2) sum_{k>=2} (-r)^(k-2) / k,  r = (l - mu) / mu,
// whose leading term is phi''(mu) / 2 = 1 / (2 mu^2).
inline double h_function(double l, double mu) {
  if (!(l > 0.0) || !(mu > 0.0)) throw DomainError("h_function: l and mu must be > 0");
  const double d = l - mu;
  const double r = d / mu;
  if (std::abs(r) < 1e-3) {
    double sum = 0.0, pow = 1.0;
    for (int k = 2; k <= 9; ++k) {
      sum += pow / k;
      pow *= -r;
    }
    return sum / (mu * mu);
  }
  return -std::log1p(r) / (d * d) + 1.0 / (mu * d);
}

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // population form (denominator n)
};

inline SampleMoments moments(std::span<const double> x) {
  if (x.empty()) throw DomainError("moments: no samples");
  SampleMoments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.variance += (v - m.mean) * (v - m.mean);
  m.variance /= static_cast<double>(x.size());
  return m;
}

inline void require_positive_samples(std::span<const double> x, const char* who) {
  if (x.empty()) throw DomainError(std::string(who) + ": no samples");
  for (double v : x)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(who) + ": samples must be positive");
}

// ln(mean L) - mean(ln L) on the finite sample.
inline double exact_jensen_gap(std::span<const double> samples) {
  require_positive_samples(samples, "exact_jensen_gap");
  const auto m = moments(samples);
  double mean_log = 0.0;
  for (double v : samples) mean_log += std::log(v);
  mean_log /= static_cast<double>(samples.size());
  return std::log(m.mean) - mean_log;
}

// Second-order approximation var(L) / (2 (E L)^2).
inline double jensen_gap_approx(std::span<const double> samples) {
  require_positive_samples(samples, "jensen_gap_approx");
  const auto m = moments(samples);
  if (m.mean == 0.0) throw DomainError("jensen_gap_approx: mean is zero");
  return m.variance / (2.0 * m.mean * m.mean);
}

struct Support {
  double lower = 0.0;
  double upper = 0.0;
};

struct GapBounds {
  double lower = 0.0;
  double upper = 0.0;
  double variance = 0.0;
  double mean = 0.0;
  Support support;
  bool monotone = true;  // h(.; mu) was nonincreasing on the check grid
};

// Variance-scaled sandwich of the Jensen gap of -ln:
//   inf_{(a,b)} h(.; mu) var <= ln E L - E ln L <= sup_{(a,b)} h(.; mu) var.
// The default support is the sample range widened by a 1e-9 relative margin.
inline GapBounds liao_gap_bounds(std::span<const double> samples,
                                 std::optional<Support> support = std::nullopt) {
  require_positive_samples(samples, "liao_gap_bounds");
  const auto m = moments(samples);
  GapBounds out;
  out.mean = m.mean;
  out.variance = m.variance;
  if (support) {
    out.support = *support;
    if (!(out.support.lower > 0.0) || !(out.support.lower < out.support.upper))
      throw DomainError("liao_gap_bounds: support must satisfy 0 < a < b");
  } else {
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    out.support = {*lo * (1.0 - 1e-9), *hi * (1.0 + 1e-9)};
  }
  const double a = out.support.lower, b = out.support.upper, mu = m.mean;

  double h_min = std::min({h_function(a, mu), h_function(b, mu), h_function(mu, mu)});
  double h_max = std::max({h_function(a, mu), h_function(b, mu), h_function(mu, mu)});

  constexpr int kGrid = 1000;
  double prev = h_function(a, mu);
  double g_min = prev, g_max = prev;
  for (int k = 1; k < kGrid; ++k) {
    const double l = a + (b - a) * k / (kGrid - 1);
    const double h = h_function(l, mu);
    if (h > prev * (1.0 + 1e-9) + 1e-15) out.monotone = false;
    prev = h;
    g_min = std::min(g_min, h);
    g_max = std::max(g_max, h);
  }
  if (!out.monotone) {
    h_min = std::min(h_min, g_min);
    h_max = std::max(h_max, g_max);
  }
  out.lower = h_min * m.variance;
  out.upper = h_max * m.variance;
  return out;
}

}  // namespace dropfam
