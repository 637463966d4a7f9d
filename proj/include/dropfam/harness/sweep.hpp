#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "dropfam/family/evaluator.hpp"
#include "dropfam/harness/config.hpp"

namespace dropfam {

struct SweepPoint {
  bool deterministic = false;
  double alpha = 1.0;
  double lambda = 1.0;
  double temperature = 1.0;
  std::size_t samples = 1;  // 0 for DET rows
};

struct SweepGrid {
  std::vector<SweepPoint> points;
  std::vector<std::string> splits{"valid"};
  std::optional<std::uint64_t> seed;
  std::size_t max_targets = 0;
};

// Grid file: either a cartesian product
//   {"alphas": [0, 0.5, 1, "det"], "lambdas": [...], "temperatures": [...], "samples": [...]}
// or an explicit "points" list; plus optional "splits", "seed", "max_targets".
inline SweepGrid parse_sweep_grid(const json& j) {
  detail::reject_unknown(j, {"alphas", "lambdas", "temperatures", "samples", "points", "splits",
                             "seed", "max_targets"},
                         "grid");
  SweepGrid g;
  detail::read(j, "splits", g.splits, "grid");
  detail::read(j, "max_targets", g.max_targets, "grid");
  if (j.contains("seed")) g.seed = j["seed"].get<std::uint64_t>();

  auto parse_alpha = [](const json& a, SweepPoint& p) {
    if (a.is_string()) {
      if (a.get<std::string>() != "det") throw ConfigError("grid: alpha must be a number or \"det\"");
      p.deterministic = true;
      p.samples = 0;
    } else if (a.is_number()) {
      p.alpha = a.get<double>();
    } else {
      throw ConfigError("grid: alpha must be a number or \"det\"");
    }
  };

  if (j.contains("points")) {
    for (const auto& pj : j["points"]) {
      detail::reject_unknown(pj, {"alpha", "lambda", "temperature", "samples"}, "grid.points");
      SweepPoint p;
      if (pj.contains("alpha")) parse_alpha(pj["alpha"], p);
      detail::read(pj, "lambda", p.lambda, "grid.points");
      detail::read(pj, "temperature", p.temperature, "grid.points");
      if (!p.deterministic) detail::read(pj, "samples", p.samples, "grid.points");
      g.points.push_back(p);
    }
  } else {
    const json alphas = j.value("alphas", json::array({1.0}));
    const auto lambdas = j.value("lambdas", std::vector<double>{1.0});
    const auto temps = j.value("temperatures", std::vector<double>{1.0});
    const auto samples = j.value("samples", std::vector<std::size_t>{200});
    for (const auto& a : alphas) {
      SweepPoint base;
      parse_alpha(a, base);
      for (double l : lambdas)
        for (double t : temps) {
          if (base.deterministic) {
            g.points.push_back({true, 1.0, l, t, 0});
            continue;
          }
          for (auto s : samples) g.points.push_back({false, base.alpha, l, t, s});
        }
    }
  }
  if (g.points.empty()) throw ConfigError("grid: no points");
  if (g.splits.empty()) throw ConfigError("grid: no splits");
  for (const auto& p : g.points) {
    FamilyParams fp{p.alpha, p.lambda, p.temperature, p.deterministic ? 1 : p.samples, p.deterministic};
    fp.validate();
  }
  return g;
}

struct SweepRow {
  std::string split;
  SweepPoint point;
  double xe = 0.0;
  double perplexity = 0.0;
};

// Evaluates every grid point on one split. Points sharing their forward
// passes (DET, or the same lambda and S) are evaluated together.
template <class Params, class Data>
std::vector<SweepRow> sweep_split(const DropoutNet<Params>& net, const Data& data,
                                  const std::string& split, const std::vector<SweepPoint>& points,
                                  const SplitSeed& seed, unsigned threads = 1) {
  std::vector<SweepRow> rows(points.size());
  std::map<std::tuple<bool, double, std::size_t>, std::vector<std::size_t>> groups;
  std::vector<std::tuple<bool, double, std::size_t>> order;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    const auto key = p.deterministic ? std::make_tuple(true, 0.0, std::size_t{0})
                                     : std::make_tuple(false, p.lambda, p.samples);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(k);
  }
  for (const auto& key : order) {
    const auto& idx = groups[key];
    const PassSpec pass{std::get<0>(key), std::get<1>(key), std::max<std::size_t>(1, std::get<2>(key))};
    std::vector<AlphaTemperature> queries;
    for (auto k : idx) queries.push_back({points[k].alpha, points[k].temperature});
    const auto nll = per_target_nll(net, data, pass, queries, seed, threads);
    for (std::size_t q = 0; q < idx.size(); ++q) {
      SweepRow& r = rows[idx[q]];
      r.split = split;
      r.point = points[idx[q]];
      r.xe = mean_of(nll[q]);
      r.perplexity = std::exp(r.xe);
    }
  }
  return rows;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline const char* kSweepHeader = "split,alpha,lambda,temperature,samples,xe,perplexity";

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = std::string(kSweepHeader) + "\n";
  char buf[64];
  for (const auto& r : rows) {
    out += r.split + ",";
    out += (r.point.deterministic ? std::string("det") : format_real(r.point.alpha)) + ",";
    out += format_real(r.point.lambda) + "," + format_real(r.point.temperature) + ",";
    out += std::to_string(r.point.deterministic ? 0 : r.point.samples) + ",";
    std::snprintf(buf, sizeof buf, "%.10f,%.10f\n", r.xe, r.perplexity);
    out += buf;
  }
  return out;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  if (x.size() != y.size() || x.size() < 2) throw DomainError("spearman: need two equal-length series");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace dropfam
