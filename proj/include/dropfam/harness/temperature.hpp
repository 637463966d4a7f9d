#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dropfam/family/evaluator.hpp"

namespace dropfam {

struct TemperatureGrid {
  double t_min = 1.0;
  double t_max = 1.0;
  std::size_t steps = 1;

  std::vector<double> points() const {
    if (!(t_min > 0.0) || !std::isfinite(t_min) || !std::isfinite(t_max) || t_max < t_min ||
        steps == 0)
      throw ConfigError("temperature grid must satisfy 0 < t_min <= t_max and steps >= 1");
    if (steps == 1) return {t_min};
    std::vector<double> out(steps);
    for (std::size_t k = 0; k < steps; ++k)
      out[k] = t_min + (t_max - t_min) * static_cast<double>(k) / static_cast<double>(steps - 1);
    return out;
  }
};

// "tmin,tmax,n"
inline TemperatureGrid parse_temperature_grid(const std::string& s) {
  TemperatureGrid g;
  char c1 = 0, c2 = 0;
  double n = 0;
  std::istringstream in(s);
  if (!(in >> g.t_min >> c1 >> g.t_max >> c2 >> n) || c1 != ',' || c2 != ',' || n < 1 ||
      n != std::floor(n))
    throw ConfigError("temperature grid must look like tmin,tmax,n");
  g.steps = static_cast<std::size_t>(n);
  g.points();
  return g;
}

struct TemperatureSearch {
  double t_opt = 1.0;
  double xe_at_t_opt = 0.0;
  std::vector<double> temperatures;
  std::vector<double> xes;
};

// argmin over the grid; ties go to the lowest temperature.
inline TemperatureSearch pick_temperature(std::vector<double> temps, std::vector<double> xes) {
  TemperatureSearch r;
  std::size_t best = 0;
  for (std::size_t k = 1; k < xes.size(); ++k) {
    if (xes[k] < xes[best] || (xes[k] == xes[best] && temps[k] < temps[best])) best = k;
  }
  r.t_opt = temps[best];
  r.xe_at_t_opt = xes[best];
  r.temperatures = std::move(temps);
  r.xes = std::move(xes);
  return r;
}

// Linear search for the softmax temperature minimising XE on `data`. The
// forward passes (DET, or S sampled passes) run once and are reused across
// the grid; fp.temperature is ignored.
template <class Params, class Data>
TemperatureSearch temperature_linear_search(const DropoutNet<Params>& net, const Data& data,
                                            const FamilyParams& fp, const TemperatureGrid& grid,
                                            const SplitSeed& seed, unsigned threads = 1) {
  const auto temps = grid.points();
  FamilyParams check = fp;
  check.temperature = 1.0;
  check.validate();
  std::vector<AlphaTemperature> queries;
  for (double t : temps) queries.push_back({fp.alpha, t});
  const PassSpec pass{fp.deterministic, fp.lambda, fp.deterministic ? 1 : fp.samples};
  const auto nll = per_target_nll(net, data, pass, queries, seed, threads);
  std::vector<double> xes;
  for (const auto& v : nll) xes.push_back(mean_of(v));
  return pick_temperature(temps, xes);
}

}  // namespace dropfam
