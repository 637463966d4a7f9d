#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "dropfam/harness/data.hpp"
#include "dropfam/model/dropout.hpp"
#include "json.hpp"

namespace dropfam {

using json = nlohmann::json;

struct ModelConfig {
  std::string type = "mlp";  // "mlp" | "lstm"
  std::vector<std::size_t> layers;  // mlp: input, hidden..., classes (input/classes may be 0 = infer)
  std::size_t embed = 16;
  std::size_t hidden = 32;
  bool tied = false;
};

struct OptimizerConfig {
  std::string type;  // "sgd" | "adam"; empty = architecture default
  double lr = 0.0;   // 0 = architecture default
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = -1.0;  // < 0 = architecture default; 0 disables
};

struct DataConfig {
  // language modelling
  std::string corpus;
  Tokenization tokenization = Tokenization::character;
  std::vector<double> splits{0.8, 0.1, 0.1};
  // classification
  std::string train_csv, valid_csv, test_csv;
  std::size_t classes = 0;
  bool two_moons = false;
  std::size_t moons_train = 512, moons_valid = 256, moons_test = 256;
  double moons_noise = 0.15;
  std::uint64_t moons_seed = 1;

  bool is_language_model() const { return !corpus.empty(); }
};

struct EvalConfig {
  std::vector<double> alphas{0.0, 0.5, 1.0};
  std::vector<double> lambdas{0.8, 0.9, 1.0};
  std::vector<double> temperatures{1.0};
  std::size_t samples = 200;
  std::size_t window = 0;  // 0 = bptt
  std::size_t max_targets = 0;
};

struct ExperimentConfig {
  ModelConfig model;
  DropoutSpec dropout;
  OptimizerConfig optimizer;
  double weight_decay = 0.0;
  std::size_t batch_size = 16;
  std::size_t steps = 1000;
  std::size_t bptt = 32;
  std::uint64_t seed = 1;
  std::size_t log_every = 100;
  bool masks_per_batch = false;
  unsigned threads = 1;
  DataConfig data;
  EvalConfig eval;
  std::vector<std::string> buckets{">25000", ">5000", ">500", "<500", "<100", "<20"};

  std::string optimizer_type() const {
    if (!optimizer.type.empty()) return optimizer.type;
    return model.type == "lstm" ? "adam" : "sgd";
  }
  double learning_rate() const {
    if (optimizer.lr > 0.0) return optimizer.lr;
    return model.type == "lstm" ? 2e-3 : 0.1;
  }
  double clip_norm() const {
    if (optimizer.clip >= 0.0) return optimizer.clip;
    return model.type == "lstm" ? 5.0 : 0.0;
  }
  std::size_t eval_window() const { return eval.window ? eval.window : bptt; }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                           const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal().string();
}

}  // namespace detail

// Parses a config object; relative data paths are resolved against base_dir.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
  using detail::read;
  detail::reject_unknown(j,
                         {"model", "dropout", "optimizer", "weight_decay", "batch_size", "steps",
                          "bptt", "seed", "log_every", "masks_per_batch", "threads", "data", "eval",
                          "buckets"},
                         "config");
  ExperimentConfig c;
  if (!j.contains("model")) throw ConfigError("config: missing 'model'");
  const json& m = j["model"];
  detail::reject_unknown(m, {"type", "layers", "embed", "hidden", "tied"}, "model");
  read(m, "type", c.model.type, "model");
  if (c.model.type != "mlp" && c.model.type != "lstm")
    throw ConfigError("model.type must be 'mlp' or 'lstm'");
  read(m, "layers", c.model.layers, "model");
  read(m, "embed", c.model.embed, "model");
  read(m, "hidden", c.model.hidden, "model");
  read(m, "tied", c.model.tied, "model");
  if (c.model.type == "mlp" && c.model.layers.size() < 2)
    throw ConfigError("model.layers needs at least input and output sizes");

  if (j.contains("dropout")) {
    const json& d = j["dropout"];
    detail::reject_unknown(d, {"rates", "sharing"}, "dropout");
    read(d, "rates", c.dropout.rates, "dropout");
    std::string sharing = to_string(c.dropout.sharing);
    read(d, "sharing", sharing, "dropout");
    c.dropout.sharing = parse_sharing(sharing);
    c.dropout.validate();
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    detail::reject_unknown(o, {"type", "lr", "beta1", "beta2", "eps", "clip"}, "optimizer");
    read(o, "type", c.optimizer.type, "optimizer");
    read(o, "lr", c.optimizer.lr, "optimizer");
    read(o, "beta1", c.optimizer.beta1, "optimizer");
    read(o, "beta2", c.optimizer.beta2, "optimizer");
    read(o, "eps", c.optimizer.eps, "optimizer");
    read(o, "clip", c.optimizer.clip, "optimizer");
    if (!c.optimizer.type.empty() && c.optimizer.type != "sgd" && c.optimizer.type != "adam")
      throw ConfigError("optimizer.type must be 'sgd' or 'adam'");
  }
  read(j, "weight_decay", c.weight_decay, "config");
  read(j, "batch_size", c.batch_size, "config");
  read(j, "steps", c.steps, "config");
  read(j, "bptt", c.bptt, "config");
  read(j, "seed", c.seed, "config");
  read(j, "log_every", c.log_every, "config");
  read(j, "masks_per_batch", c.masks_per_batch, "config");
  read(j, "threads", c.threads, "config");
  read(j, "buckets", c.buckets, "config");
  if (c.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (c.bptt == 0) throw ConfigError("bptt must be >= 1");
  if (c.threads == 0) c.threads = 1;

  if (!j.contains("data")) throw ConfigError("config: missing 'data'");
  const json& d = j["data"];
  detail::reject_unknown(d, {"corpus", "tokenization", "splits", "train_csv", "valid_csv",
                             "test_csv", "classes", "two_moons"},
                         "data");
  read(d, "corpus", c.data.corpus, "data");
  std::string tok = to_string(c.data.tokenization);
  read(d, "tokenization", tok, "data");
  c.data.tokenization = parse_tokenization(tok);
  read(d, "splits", c.data.splits, "data");
  read(d, "train_csv", c.data.train_csv, "data");
  read(d, "valid_csv", c.data.valid_csv, "data");
  read(d, "test_csv", c.data.test_csv, "data");
  read(d, "classes", c.data.classes, "data");
  if (d.contains("two_moons")) {
    const json& tm = d["two_moons"];
    detail::reject_unknown(tm, {"train", "valid", "test", "noise", "seed"}, "data.two_moons");
    c.data.two_moons = true;
    read(tm, "train", c.data.moons_train, "data.two_moons");
    read(tm, "valid", c.data.moons_valid, "data.two_moons");
    read(tm, "test", c.data.moons_test, "data.two_moons");
    read(tm, "noise", c.data.moons_noise, "data.two_moons");
    read(tm, "seed", c.data.moons_seed, "data.two_moons");
  }
  c.data.corpus = detail::resolve(c.data.corpus, base_dir);
  c.data.train_csv = detail::resolve(c.data.train_csv, base_dir);
  c.data.valid_csv = detail::resolve(c.data.valid_csv, base_dir);
  c.data.test_csv = detail::resolve(c.data.test_csv, base_dir);
  const int sources = !c.data.corpus.empty() + !c.data.train_csv.empty() + c.data.two_moons;
  if (sources != 1)
    throw ConfigError("data: give exactly one of 'corpus', 'train_csv' or 'two_moons'");
  if (c.data.is_language_model() != (c.model.type == "lstm"))
    throw ConfigError("data: a corpus needs an lstm model, classification data an mlp");

  if (j.contains("eval")) {
    const json& e = j["eval"];
    detail::reject_unknown(e, {"alphas", "lambdas", "temperatures", "samples", "window", "max_targets"},
                           "eval");
    read(e, "alphas", c.eval.alphas, "eval");
    read(e, "lambdas", c.eval.lambdas, "eval");
    read(e, "temperatures", c.eval.temperatures, "eval");
    read(e, "samples", c.eval.samples, "eval");
    read(e, "window", c.eval.window, "eval");
    read(e, "max_targets", c.eval.max_targets, "eval");
    for (double a : c.eval.alphas)
      if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("eval.alphas must lie in [0,1]");
    for (double l : c.eval.lambdas)
      if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("eval.lambdas must lie in [0,1]");
    for (double t : c.eval.temperatures)
      if (!(t > 0.0)) throw ConfigError("eval.temperatures must be > 0");
    if (c.eval.samples == 0) throw ConfigError("eval.samples must be >= 1");
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"type", c.model.type}};
  if (c.model.type == "mlp") {
    j["model"]["layers"] = c.model.layers;
  } else {
    j["model"]["embed"] = c.model.embed;
    j["model"]["hidden"] = c.model.hidden;
    j["model"]["tied"] = c.model.tied;
  }
  j["dropout"] = {{"rates", c.dropout.rates}, {"sharing", to_string(c.dropout.sharing)}};
  j["optimizer"] = {{"type", c.optimizer.type}, {"lr", c.optimizer.lr},
                    {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps}, {"clip", c.optimizer.clip}};
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["bptt"] = c.bptt;
  j["seed"] = c.seed;
  j["log_every"] = c.log_every;
  j["masks_per_batch"] = c.masks_per_batch;
  j["threads"] = c.threads;
  json d;
  if (c.data.is_language_model()) {
    d["corpus"] = c.data.corpus;
    d["tokenization"] = to_string(c.data.tokenization);
    d["splits"] = c.data.splits;
  } else if (c.data.two_moons) {
    d["two_moons"] = {{"train", c.data.moons_train}, {"valid", c.data.moons_valid},
                      {"test", c.data.moons_test}, {"noise", c.data.moons_noise},
                      {"seed", c.data.moons_seed}};
  } else {
    d["train_csv"] = c.data.train_csv;
    if (!c.data.valid_csv.empty()) d["valid_csv"] = c.data.valid_csv;
    if (!c.data.test_csv.empty()) d["test_csv"] = c.data.test_csv;
    d["classes"] = c.data.classes;
  }
  j["data"] = d;
  j["eval"] = {{"alphas", c.eval.alphas},   {"lambdas", c.eval.lambdas},
               {"temperatures", c.eval.temperatures}, {"samples", c.eval.samples},
               {"window", c.eval.window},   {"max_targets", c.eval.max_targets}};
  j["buckets"] = c.buckets;
  return j;
}

}  // namespace dropfam
