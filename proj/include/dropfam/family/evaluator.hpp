#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dropfam/family/power_mean.hpp"
#include "dropfam/model/loss.hpp"
#include "dropfam/numeric/parallel.hpp"

namespace dropfam {

// A trained parameter set together with the dropout rates it was trained at.
template <class Params>
struct DropoutNet {
  Params params;
  DropoutSpec dropout;
};

using MlpNet = DropoutNet<MlpParams>;
using LstmNet = DropoutNet<LstmParams>;

// A point in the extended dropout family plus the MC sample budget.
struct FamilyParams {
  double alpha = 1.0;
  double lambda = 1.0;
  double temperature = 1.0;
  std::size_t samples = 200;
  bool deterministic = false;

  static FamilyParams det(double temperature = 1.0, double lambda = 0.0) {
    return {1.0, lambda, temperature, 1, true};
  }

  void validate() const {
    if (!deterministic) require_alpha(alpha);
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw DomainError("lambda must lie in [0,1]");
    require_temperature(temperature);
    if (!deterministic && samples == 0) throw DomainError("samples must be >= 1");
  }
};

// ---- datasets ------------------------------------------------------------

struct ClassificationSet {
  Tensor features;  // N x F
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t targets() const { return labels.size(); }
  ClassBatch batch() const { return {features, labels}; }
};

// Windows of a token stream; window i predicts tokens 1.. from tokens ..n-2.
struct SequenceSet {
  std::vector<std::vector<int>> sequences;
  std::size_t vocab = 0;

  std::size_t size() const { return sequences.size(); }
  std::size_t targets() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size() - 1;
    return n;
  }
  SequenceBatch batch() const { return {sequences}; }
};

inline std::span<const double> example_input(const MlpParams&, const ClassificationSet& d,
                                             std::size_t i) {
  return d.features.row(i);
}
inline std::span<const int> example_input(const LstmParams&, const SequenceSet& d, std::size_t i) {
  return std::span<const int>(d.sequences[i]).first(d.sequences[i].size() - 1);
}
inline std::vector<int> example_targets(const ClassificationSet& d, std::size_t i) {
  return {d.labels[i]};
}
inline std::vector<int> example_targets(const SequenceSet& d, std::size_t i) {
  return {d.sequences[i].begin() + 1, d.sequences[i].end()};
}

// ---- forward dispatch ----------------------------------------------------

inline Tensor net_logits(const MlpParams& p, std::span<const double> x, const RowScales& s) {
  auto z = mlp_forward(p, x, s);
  const std::size_t c = z.size();
  return Tensor({1, c}, std::move(z));
}
inline Tensor net_logits(const LstmParams& p, std::span<const int> tokens, const RowScales& s) {
  return lstm_forward(p, tokens, s);
}
inline std::size_t input_steps(std::span<const double>) { return 1; }
inline std::size_t input_steps(std::span<const int> tokens) { return tokens.size(); }

// Logits of S stochastic passes at rate lambda * p; sample s uses masks
// drawn from seed.child(s).
template <class Params, class Input>
std::vector<Tensor> sample_logits(const DropoutNet<Params>& net, const Input& input,
                                  double lambda, std::size_t samples, const SplitSeed& seed,
                                  unsigned threads = 1) {
  const SiteLayouts layout = site_layout(net.params);
  std::vector<Tensor> out(samples);
  parallel_for(samples, threads, [&](std::size_t s) {
    const MaskSet masks = sample_masks(layout, net.dropout, seed.child(s), input_steps(input), lambda);
    out[s] = net_logits(net.params, input, stochastic_scales(layout, net.dropout, masks, lambda));
  });
  return out;
}

// One pass with every row scaled by its keep probability; returns per-position
// log probabilities of softmax(logits / T).
template <class Params, class Input>
Tensor deterministic_predict(const DropoutNet<Params>& net, const Input& input,
                             double temperature = 1.0) {
  require_temperature(temperature);
  Tensor z = net_logits(net.params, input, deterministic_scales(site_layout(net.params), net.dropout));
  for (std::size_t r = 0; r < z.rows(); ++r) log_softmax_into(z.row(r), temperature, z.row(r));
  return z;
}

// Per-position PredictionMatrix from cached sample logits at temperature T.
inline PredictionMatrix prediction_matrix(const std::vector<Tensor>& logits, std::size_t position,
                                          double temperature) {
  const std::size_t C = logits.front().cols();
  PredictionMatrix P(logits.size(), C);
  for (std::size_t s = 0; s < logits.size(); ++s)
    log_softmax_into(logits[s].row(position), temperature, P.row(s));
  return P;
}

struct McPrediction {
  std::vector<AggregateResult> aggregates;  // one per position
  std::vector<PredictionMatrix> matrices;
};

// MC dropout prediction at family point fp. Temperature is applied inside
// every sampled pass, before its softmax; rows of each PredictionMatrix are in
// sample-index order.
template <class Params, class Input>
McPrediction mc_predict(const DropoutNet<Params>& net, const Input& input, const FamilyParams& fp,
                        const SplitSeed& seed, unsigned threads = 1) {
  fp.validate();
  if (fp.deterministic) throw ContractError("mc_predict: family point is deterministic");
  const auto logits = sample_logits(net, input, fp.lambda, fp.samples, seed, threads);
  McPrediction out;
  for (std::size_t pos = 0; pos < logits.front().rows(); ++pos) {
    out.matrices.push_back(prediction_matrix(logits, pos, fp.temperature));
    out.aggregates.push_back(power_mean_aggregate(out.matrices.back(), fp.alpha));
  }
  return out;
}

// ---- dataset evaluation --------------------------------------------------

// The forward passes needed for a set of (alpha, T) queries: a DET pass or S
// stochastic passes at one lambda.
struct PassSpec {
  bool deterministic = false;
  double lambda = 1.0;
  std::size_t samples = 1;
};

struct AlphaTemperature {
  double alpha = 1.0;
  double temperature = 1.0;
};

// nll of every target (dataset order) for each query, sharing the forward
// passes across queries. Example i draws its masks from seed.child(i).
template <class Params, class Data>
std::vector<std::vector<double>> per_target_nll(const DropoutNet<Params>& net, const Data& data,
                                                const PassSpec& pass,
                                                std::span<const AlphaTemperature> queries,
                                                const SplitSeed& seed, unsigned threads = 1) {
  if (data.size() == 0) throw DomainError("evaluation dataset is empty");
  for (const auto& q : queries) {
    if (!pass.deterministic) require_alpha(q.alpha);
    require_temperature(q.temperature);
  }
  // per example: queries x positions
  std::vector<std::vector<std::vector<double>>> per_example(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto input = example_input(net.params, data, i);
    const auto targets = example_targets(data, i);
    auto& res = per_example[i];
    res.assign(queries.size(), std::vector<double>(targets.size()));
    std::vector<Tensor> logits;
    if (pass.deterministic) {
      logits.push_back(net_logits(net.params, input,
                                  deterministic_scales(site_layout(net.params), net.dropout)));
    } else {
      logits = sample_logits(net, input, pass.lambda, pass.samples, seed.child(i), 1);
    }
    std::vector<double> lp(logits.front().cols());
    for (std::size_t q = 0; q < queries.size(); ++q) {
      for (std::size_t pos = 0; pos < targets.size(); ++pos) {
        const auto y = static_cast<std::size_t>(targets[pos]);
        if (pass.deterministic) {
          log_softmax_into(logits[0].row(pos), queries[q].temperature, lp);
          res[q][pos] = -lp[y];
        } else {
          const auto P = prediction_matrix(logits, pos, queries[q].temperature);
          res[q][pos] = -power_mean_aggregate(P, queries[q].alpha).normalized_log[y];
        }
      }
    }
  });
  std::vector<std::vector<double>> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q)
    for (const auto& ex : per_example) out[q].insert(out[q].end(), ex[q].begin(), ex[q].end());
  return out;
}

// Index-order sum; the reduction order is fixed.
inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct EvalResult {
  double xe = 0.0;
  double perplexity = 0.0;
  std::size_t targets = 0;
};

template <class Params, class Data>
EvalResult evaluate_dataset(const DropoutNet<Params>& net, const Data& data, const FamilyParams& fp,
                            const SplitSeed& seed, unsigned threads = 1) {
  fp.validate();
  const PassSpec pass{fp.deterministic, fp.lambda, fp.deterministic ? 1 : fp.samples};
  const AlphaTemperature q{fp.alpha, fp.temperature};
  const auto nll = per_target_nll(net, data, pass, std::span<const AlphaTemperature>(&q, 1), seed,
                                  threads);
  EvalResult r;
  r.targets = nll[0].size();
  r.xe = mean_of(nll[0]);
  r.perplexity = std::exp(r.xe);
  return r;
}

}  // namespace dropfam
