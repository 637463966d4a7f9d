#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <variant>

#include "dropfam/harness/checkpoint.hpp"
#include "dropfam/harness/data.hpp"

namespace dropfam {

struct LanguageData {
  Corpus corpus;
};

struct ClassificationData {
  ClassificationSet train, valid, test;
};

using ExperimentData = std::variant<LanguageData, ClassificationData>;

inline ExperimentData load_data(const ExperimentConfig& c) {
  const DataConfig& d = c.data;
  if (d.is_language_model()) return LanguageData{ingest_text_corpus(d.corpus, d.splits, d.tokenization)};
  ClassificationData out;
  if (d.two_moons) {
    const SplitSeed s(d.moons_seed);
    out.train = two_moons(d.moons_train, d.moons_noise, s.child(0));
    out.valid = two_moons(d.moons_valid, d.moons_noise, s.child(1));
    out.test = two_moons(d.moons_test, d.moons_noise, s.child(2));
    return out;
  }
  out.train = ingest_classification_csv(d.train_csv, d.classes);
  const std::size_t classes = d.classes ? d.classes : out.train.classes;
  out.train.classes = classes;
  if (!d.valid_csv.empty()) out.valid = ingest_classification_csv(d.valid_csv, classes);
  if (!d.test_csv.empty()) out.test = ingest_classification_csv(d.test_csv, classes);
  return out;
}

// Evaluation set for a named split; LM splits are cut into windows.
inline SequenceSet language_split(const ExperimentConfig& c, const LanguageData& d,
                                  const std::string& split, std::size_t max_targets) {
  const auto& tokens = d.corpus.split(split);
  if (tokens.size() < 2) throw ConfigError("split '" + split + "' has fewer than two tokens");
  return make_windows(tokens, c.eval_window(), d.corpus.vocab_size(),
                      max_targets ? max_targets : c.eval.max_targets);
}

inline ClassificationSet classification_split(const ClassificationData& d, const std::string& split,
                                              std::size_t max_targets) {
  const ClassificationSet* s = nullptr;
  if (split == "train") s = &d.train;
  else if (split == "valid") s = &d.valid;
  else if (split == "test") s = &d.test;
  else throw ConfigError("unknown split '" + split + "' (expected train, valid or test)");
  if (s->size() == 0) throw ConfigError("split '" + split + "' is empty");
  if (max_targets == 0 || max_targets >= s->size()) return *s;
  ClassificationSet out;
  out.classes = s->classes;
  const std::size_t F = s->features.cols();
  out.features = Tensor({max_targets, F},
                        std::vector<double>(s->features.values().begin(),
                                            s->features.values().begin() +
                                                static_cast<std::ptrdiff_t>(max_targets * F)));
  out.labels.assign(s->labels.begin(), s->labels.begin() + static_cast<std::ptrdiff_t>(max_targets));
  return out;
}

// Seed paths below the experiment seed.
enum SeedStream : std::uint64_t { kInitStream = 1, kBatchStream = 2, kMaskStream = 3 };

inline AnyNet initial_net(const ExperimentConfig& c, const ExperimentData& data) {
  const SplitSeed seed = SplitSeed(c.seed).child(kInitStream);
  if (const auto* lm = std::get_if<LanguageData>(&data)) {
    return LstmNet{init_lstm(lm->corpus.vocab_size(), c.model.embed, c.model.hidden, c.model.tied, seed),
                   c.dropout};
  }
  const auto& cls = std::get<ClassificationData>(data);
  auto sizes = c.model.layers;
  if (sizes.front() == 0) sizes.front() = cls.train.features.cols();
  if (sizes.back() == 0) sizes.back() = cls.train.classes;
  if (sizes.front() != cls.train.features.cols())
    throw ConfigError("model.layers[0] does not match the feature count");
  if (sizes.back() < cls.train.classes)
    throw ConfigError("model.layers output is smaller than the class count");
  return MlpNet{init_mlp(sizes, seed), c.dropout};
}

template <ParamSet Params>
class Optimizer {
 public:
  explicit Optimizer(const ExperimentConfig& c) : c_(c), adam_(c.optimizer_type() == "adam") {}

  void step(Params& params, const Params& grad) {
    auto theta = flatten(params);
    auto g = flatten(grad);
    const double clip = c_.clip_norm();
    if (clip > 0.0) {
      double norm = 0.0;
      for (double v : g) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > clip)
        for (double& v : g) v *= clip / norm;
    }
    const double lr = c_.learning_rate();
    if (!adam_) {
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr * g[k];
    } else {
      if (m_.empty()) {
        m_.assign(theta.size(), 0.0);
        v_.assign(theta.size(), 0.0);
      }
      ++t_;
      const double b1 = c_.optimizer.beta1, b2 = c_.optimizer.beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m_[k] = b1 * m_[k] + (1.0 - b1) * g[k];
        v_[k] = b2 * v_[k] + (1.0 - b2) * g[k] * g[k];
        theta[k] -= lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + c_.optimizer.eps);
      }
    }
    unflatten(theta, params);
  }

 private:
  const ExperimentConfig& c_;
  bool adam_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct TrainLogEntry {
  std::size_t step = 0;
  double xe = 0.0;  // mean nll per target of that step's batch
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogEntry> log;
};

namespace detail {

inline std::vector<std::vector<int>> lm_batch(const ExperimentConfig& c, const Corpus& corpus,
                                              RandomStream& rng) {
  const auto& tokens = corpus.train;
  if (tokens.size() < 2) throw ConfigError("training split has fewer than two tokens");
  const std::size_t len = std::min(c.bptt + 1, tokens.size());
  std::vector<std::vector<int>> batch;
  for (std::size_t b = 0; b < c.batch_size; ++b) {
    const std::size_t start = rng.below(tokens.size() - len + 1);
    batch.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                       tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
  }
  return batch;
}

}  // namespace detail

// Minimises the per-target mean of the MAP loss with a fresh mask draw per
// batch element (or per batch) at every step. Deterministic given the seed.
inline TrainResult train(const ExperimentConfig& c, const ExperimentData& data,
                         std::ostream* log = nullptr) {
  TrainResult result;
  result.checkpoint.config = c;
  result.checkpoint.rng_base = c.seed;
  result.checkpoint.net = initial_net(c, data);
  const SplitSeed root(c.seed);

  std::visit(
      [&](auto& net) {
        using Params = std::decay_t<decltype(net.params)>;
        Optimizer<Params> opt(c);
        for (std::size_t step = 0; step < c.steps; ++step) {
          RandomStream batch_rng = root.child(kBatchStream).child(step).stream();
          const SplitSeed mask_seed = root.child(kMaskStream).child(step);
          LossBreakdown loss;
          Params grad;
          if constexpr (std::is_same_v<Params, LstmParams>) {
            const auto& corpus = std::get<LanguageData>(data).corpus;
            const auto seqs = detail::lm_batch(c, corpus, batch_rng);
            const SequenceBatch batch{seqs};
            const auto masks = sample_batch_masks(net.params, net.dropout, batch, mask_seed, c.masks_per_batch);
            grad = backward(net.params, net.dropout, batch, masks, c.weight_decay, &loss);
          } else {
            const auto& train_set = std::get<ClassificationData>(data).train;
            const std::size_t F = train_set.features.cols();
            Tensor x({c.batch_size, F});
            std::vector<int> y(c.batch_size);
            for (std::size_t b = 0; b < c.batch_size; ++b) {
              const std::size_t idx = batch_rng.below(train_set.size());
              std::copy_n(train_set.features.row(idx).begin(), F, x.row(b).begin());
              y[b] = train_set.labels[idx];
            }
            const ClassBatch batch{x, y};
            const auto masks = sample_batch_masks(net.params, net.dropout, batch, mask_seed, c.masks_per_batch);
            grad = backward(net.params, net.dropout, batch, masks, c.weight_decay, &loss);
          }
          if (!std::isfinite(loss.total))
            throw TrainingDiverged("training diverged at step " + std::to_string(step) +
                                   ": loss is not finite");
          const double xe = loss.nll / static_cast<double>(loss.targets);
          if (c.log_every && (step % c.log_every == 0 || step + 1 == c.steps)) {
            result.log.push_back({step, xe});
            if (log) *log << "step " << step << " train_xe " << xe << "\n";
          }
          // per-target mean objective
          auto g = flatten(grad);
          for (double& v : g) v /= static_cast<double>(loss.targets);
          unflatten(g, grad);
          opt.step(net.params, grad);
        }
      },
      result.checkpoint.net);
  result.checkpoint.step = c.steps;
  return result;
}

}  // namespace dropfam
