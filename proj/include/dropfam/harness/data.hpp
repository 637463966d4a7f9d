#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dropfam/family/evaluator.hpp"
#include "dropfam/numeric/rng.hpp"

namespace dropfam {

enum class Tokenization { character, word };

inline Tokenization parse_tokenization(const std::string& s) {
  if (s == "char") return Tokenization::character;
  if (s == "word") return Tokenization::word;
  throw ConfigError("tokenization must be 'char' or 'word', got '" + s + "'");
}

inline std::string to_string(Tokenization t) { return t == Tokenization::character ? "char" : "word"; }

// Tokenised corpus. The vocabulary comes from the training split only and is
// sorted; "<unk>" is appended when validation or test text needs it.
struct Corpus {
  std::vector<std::string> vocab;
  std::vector<int> train, valid, test;
  std::vector<std::size_t> train_frequency;  // indexed by token id
  std::optional<int> unk;

  std::size_t vocab_size() const { return vocab.size(); }

  const std::vector<int>& split(const std::string& name) const {
    if (name == "train") return train;
    if (name == "valid") return valid;
    if (name == "test") return test;
    throw ConfigError("unknown split '" + name + "' (expected train, valid or test)");
  }
};

inline std::vector<std::string> tokenize(std::string_view text, Tokenization mode) {
  std::vector<std::string> out;
  if (mode == Tokenization::character) {
    out.reserve(text.size());
    for (char ch : text) out.emplace_back(1, ch);
    return out;
  }
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Split boundaries at floor(cumulative fraction * n); a final fraction
// reaching 1 takes the remainder.
inline std::vector<std::size_t> split_sizes(std::size_t n, const std::vector<double>& fractions) {
  if (fractions.empty() || fractions.size() > 3)
    throw ConfigError("split fractions: need 1 to 3 values (train, valid, test)");
  double cumulative = 0.0;
  std::vector<std::size_t> bounds;
  for (double f : fractions) {
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be > 0");
    cumulative += f;
    if (cumulative > 1.0 + 1e-9) throw ConfigError("split fractions sum to more than 1");
    const double x = cumulative * static_cast<double>(n);
    const double nearest = std::round(x);
    bounds.push_back(std::abs(x - nearest) < 1e-6 ? static_cast<std::size_t>(nearest)
                                                  : static_cast<std::size_t>(std::floor(x)));
  }
  if (std::abs(cumulative - 1.0) <= 1e-9) bounds.back() = n;
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (auto b : bounds) {
    sizes.push_back(b - prev);
    prev = b;
  }
  if (sizes[0] == 0) throw ConfigError("training split is empty");
  return sizes;
}

inline Corpus build_corpus(std::string_view text, const std::vector<double>& fractions,
                           Tokenization mode) {
  const auto tokens = tokenize(text, mode);
  if (tokens.empty()) throw ConfigError("corpus is empty");
  const auto sizes = split_sizes(tokens.size(), fractions);

  Corpus c;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < sizes[0]; ++i) index.emplace(tokens[i], 0);
  for (auto& [tok, id] : index) {
    id = static_cast<int>(c.vocab.size());
    c.vocab.push_back(tok);
  }
  auto lookup = [&](const std::string& tok) {
    auto it = index.find(tok);
    if (it != index.end()) return it->second;
    if (!c.unk) {
      c.unk = static_cast<int>(c.vocab.size());
      c.vocab.push_back("<unk>");
    }
    return *c.unk;
  };
  std::size_t pos = 0;
  std::vector<int>* parts[] = {&c.train, &c.valid, &c.test};
  for (std::size_t s = 0; s < sizes.size(); ++s)
    for (std::size_t k = 0; k < sizes[s]; ++k) parts[s]->push_back(lookup(tokens[pos++]));

  c.train_frequency.assign(c.vocab.size(), 0);
  for (int t : c.train) ++c.train_frequency[static_cast<std::size_t>(t)];
  return c;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Corpus ingest_text_corpus(const std::string& path, const std::vector<double>& fractions,
                                 Tokenization mode) {
  return build_corpus(read_file(path), fractions, mode);
}

// Consecutive windows of `window` targets; window k covers tokens
// [k*window, (k+1)*window] so every token after the first is predicted once.
// max_targets > 0 truncates the stream first.
inline SequenceSet make_windows(std::span<const int> tokens, std::size_t window, std::size_t vocab,
                                std::size_t max_targets = 0) {
  if (window == 0) throw ConfigError("evaluation window must be >= 1");
  if (max_targets > 0 && tokens.size() > max_targets + 1) tokens = tokens.first(max_targets + 1);
  SequenceSet set;
  set.vocab = vocab;
  for (std::size_t start = 0; start + 1 < tokens.size(); start += window) {
    const std::size_t end = std::min(tokens.size(), start + window + 1);
    set.sequences.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                               tokens.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return set;
}

// Numeric CSV, last column an integer label. classes == 0 infers max label + 1.
inline ClassificationSet parse_classification_csv(std::string_view text, std::size_t classes = 0,
                                                  const std::string& source = "<csv>") {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t");
      const std::string trimmed = b == std::string::npos ? "" : cell.substr(b, e - b + 1);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(trimmed, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (trimmed.empty() || used != trimmed.size() || !std::isfinite(v))
        throw InputError(source + ":" + std::to_string(line_no) + ": non-numeric cell '" + trimmed + "'");
      cells.push_back(v);
    }
    if (!line.empty() && line.back() == ',')
      throw InputError(source + ":" + std::to_string(line_no) + ": empty trailing cell");
    if (cells.size() < 2)
      throw InputError(source + ":" + std::to_string(line_no) + ": need features and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw InputError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " columns, got " + std::to_string(cells.size()));
    const double label = cells.back();
    if (label != std::floor(label) || label < 0)
      throw InputError(source + ":" + std::to_string(line_no) + ": label must be a non-negative integer");
    labels.push_back(static_cast<int>(label));
    values.insert(values.end(), cells.begin(), cells.end() - 1);
  }
  if (labels.empty()) throw InputError(source + ": no data rows");
  ClassificationSet set;
  set.features = Tensor({labels.size(), width - 1}, std::move(values));
  set.labels = std::move(labels);
  const int max_label = *std::max_element(set.labels.begin(), set.labels.end());
  set.classes = classes ? classes : static_cast<std::size_t>(max_label) + 1;
  for (std::size_t i = 0; i < set.labels.size(); ++i)
    if (static_cast<std::size_t>(set.labels[i]) >= set.classes)
      throw InputError(source + ": label " + std::to_string(set.labels[i]) + " on row " +
                       std::to_string(i + 1) + " outside [0, " + std::to_string(set.classes) + ")");
  return set;
}

inline ClassificationSet ingest_classification_csv(const std::string& path, std::size_t classes = 0) {
  return parse_classification_csv(read_file(path), classes, path);
}

// Two interleaving half circles with Gaussian noise; labels alternate 0, 1.
inline ClassificationSet two_moons(std::size_t n, double noise, const SplitSeed& seed) {
  ClassificationSet set;
  set.classes = 2;
  set.features = Tensor({n, 2});
  set.labels.resize(n);
  RandomStream rng = seed.stream();
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += noise * rng.normal();
    y += noise * rng.normal();
    set.features(i, 0) = x;
    set.features(i, 1) = y;
    set.labels[i] = label;
  }
  return set;
}

}  // namespace dropfam
