#pragma once

#include <string>
#include <vector>

#include "dropfam/family/evaluator.hpp"

namespace dropfam {

// A frequency predicate on a target's training-split count: "> n" or "< n".
struct FrequencyThreshold {
  bool greater = true;
  double value = 0.0;

  bool matches(double freq) const { return greater ? freq > value : freq < value; }
  std::string label() const {
    const std::string v = std::to_string(static_cast<long long>(value));
    return greater ? ">" + v : "<" + v;
  }
};

// Accepts ">25000", "<500" and the table-style "25000<" (meaning more than 25000).
inline FrequencyThreshold parse_threshold(std::string s) {
  auto number = [&](const std::string& t) {
    try {
      std::size_t used = 0;
      double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad frequency threshold '" + s + "'");
    }
  };
  if (s.size() < 2) throw ConfigError("bad frequency threshold '" + s + "'");
  if (s.front() == '>') return {true, number(s.substr(1))};
  if (s.front() == '<') return {false, number(s.substr(1))};
  if (s.back() == '<') return {true, number(s.substr(0, s.size() - 1))};
  if (s.back() == '>') return {false, number(s.substr(0, s.size() - 1))};
  throw ConfigError("bad frequency threshold '" + s + "'");
}

inline std::vector<FrequencyThreshold> default_thresholds() {
  return {{true, 25000}, {true, 5000}, {true, 500}, {false, 500}, {false, 100}, {false, 20}};
}

struct BucketRow {
  std::string bucket;
  std::string split;
  std::size_t method = 0;  // index into the FamilyParams list
  std::size_t targets = 0;
  double xe = 0.0;  // 0 for an empty bucket
};

struct BucketReport {
  std::vector<FamilyParams> methods;
  std::vector<BucketRow> rows;
};

// Per-frequency-bucket XE. A target joins every bucket whose predicate its
// training frequency satisfies, so buckets may overlap.
template <class Params>
BucketReport frequency_bucket_report(const DropoutNet<Params>& net, const SequenceSet& train,
                                     const SequenceSet& valid,
                                     const std::vector<std::size_t>& train_frequency,
                                     const std::vector<FamilyParams>& methods,
                                     const std::vector<FrequencyThreshold>& thresholds,
                                     const SplitSeed& seed, unsigned threads = 1) {
  if (thresholds.empty()) throw DomainError("frequency_bucket_report: no thresholds given");
  if (methods.empty()) throw DomainError("frequency_bucket_report: no evaluation methods given");
  BucketReport report;
  report.methods = methods;
  const std::pair<const char*, const SequenceSet*> splits[] = {{"train", &train}, {"valid", &valid}};

  for (const auto& [name, data] : splits) {
    std::vector<double> freq;
    for (std::size_t i = 0; i < data->size(); ++i)
      for (int t : example_targets(*data, i))
        freq.push_back(static_cast<std::size_t>(t) < train_frequency.size()
                           ? static_cast<double>(train_frequency[static_cast<std::size_t>(t)])
                           : 0.0);
    std::vector<std::vector<double>> nll_by_method;
    for (const auto& fp : methods) {
      fp.validate();
      const PassSpec pass{fp.deterministic, fp.lambda, fp.deterministic ? 1 : fp.samples};
      const AlphaTemperature q{fp.alpha, fp.temperature};
      nll_by_method.push_back(
          per_target_nll(net, *data, pass, std::span<const AlphaTemperature>(&q, 1), seed, threads)[0]);
    }
    for (const auto& th : thresholds) {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < freq.size(); ++k) {
          if (!th.matches(freq[k])) continue;
          sum += nll_by_method[m][k];
          ++n;
        }
        report.rows.push_back({th.label(), name, m, n, n ? sum / static_cast<double>(n) : 0.0});
      }
    }
  }
  return report;
}

}  // namespace dropfam
