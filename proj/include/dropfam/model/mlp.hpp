#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dropfam/model/dropout.hpp"
#include "dropfam/numeric/log_ops.hpp"
#include "dropfam/numeric/rng.hpp"
#include "dropfam/numeric/tensor.hpp"

namespace dropfam {

// Fully connected classifier: tanh hidden layers, linear output logits.
// weights[l] is sizes[l] x sizes[l+1]; row i holds the outgoing weights of
// unit i of layer l, which is the unit dropout drops.
struct MlpParams {
  std::vector<std::size_t> sizes;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t inputs() const { return sizes.front(); }
  std::size_t classes() const { return sizes.back(); }

  template <class F>
  void for_each_tensor(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f("w" + std::to_string(l), weights[l]);
      f("b" + std::to_string(l), biases[l]);
    }
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f("w" + std::to_string(l), weights[l]);
      f("b" + std::to_string(l), biases[l]);
    }
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

inline MlpParams zero_mlp(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw ConfigError("mlp needs at least an input and an output layer");
  for (auto n : sizes)
    if (n == 0) throw ConfigError("mlp layer sizes must be positive");
  MlpParams p;
  p.sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    p.weights.emplace_back(std::vector<std::size_t>{sizes[l], sizes[l + 1]});
    p.biases.emplace_back(std::vector<std::size_t>{sizes[l + 1]});
  }
  return p;
}

// Glorot-uniform weights, zero biases.
inline MlpParams init_mlp(const std::vector<std::size_t>& sizes, const SplitSeed& seed) {
  MlpParams p = zero_mlp(sizes);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    RandomStream rng = seed.child(l).stream();
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
    for (double& w : p.weights[l].values()) w = rng.uniform(-limit, limit);
  }
  return p;
}

inline SiteLayouts site_layout(const MlpParams& p) {
  SiteLayouts layout;
  layout.push_back({"input", p.sizes[0]});
  for (std::size_t l = 1; l + 1 < p.sizes.size(); ++l)
    layout.push_back({"hidden" + std::to_string(l), p.sizes[l]});
  return layout;
}

namespace detail {

inline void check_scales(const SiteLayouts& layout, const RowScales& scales) {
  if (scales.size() != layout.size())
    throw ContractError("row scales do not match the model's dropout sites");
  for (std::size_t s = 0; s < layout.size(); ++s)
    if (scales[s].rows != layout[s].rows)
      throw ContractError("row scales for site '" + layout[s].name + "' have the wrong size");
}

// Forward pass; when grad is non-null also backpropagates
// d(-ln softmax(z)[label]) and returns that nll.
inline double mlp_pass(const MlpParams& p, std::span<const double> x, const RowScales& scales,
                       std::vector<double>* logits_out, int label, MlpParams* grad) {
  const std::size_t layers = p.weights.size();
  // scaled[l] = row-scaled input of layer l; act[l] = its unscaled activation
  std::vector<std::vector<double>> act(layers), scaled(layers);
  std::vector<double> z;
  for (std::size_t l = 0; l < layers; ++l) {
    act[l] = l == 0 ? std::vector<double>(x.begin(), x.end()) : z;
    if (l > 0)
      for (double& a : act[l]) a = std::tanh(a);
    const SiteScale& sc = scales[l];
    scaled[l].resize(act[l].size());
    for (std::size_t i = 0; i < act[l].size(); ++i) scaled[l][i] = sc.values[i] * act[l][i];

    const Tensor& w = p.weights[l];
    const std::size_t out = w.cols();
    z.assign(p.biases[l].values().begin(), p.biases[l].values().end());
    for (std::size_t i = 0; i < scaled[l].size(); ++i) {
      const double u = scaled[l][i];
      if (u == 0.0) continue;
      const double* wr = w.row(i).data();
      for (std::size_t j = 0; j < out; ++j) z[j] += u * wr[j];
    }
  }
  if (logits_out) *logits_out = z;
  if (!grad) return 0.0;

  std::vector<double> dz = softmax_with_temperature(z, 1.0);
  const double nll = -(log_softmax(z, 1.0)[static_cast<std::size_t>(label)]);
  dz[static_cast<std::size_t>(label)] -= 1.0;
  for (std::size_t l = layers; l-- > 0;) {
    const Tensor& w = p.weights[l];
    Tensor& gw = grad->weights[l];
    const std::size_t out = w.cols();
    for (std::size_t j = 0; j < out; ++j) grad->biases[l][j] += dz[j];
    std::vector<double> da(scaled[l].size(), 0.0);
    for (std::size_t i = 0; i < scaled[l].size(); ++i) {
      const double u = scaled[l][i];
      const double* wr = w.row(i).data();
      double* gr = gw.row(i).data();
      double du = 0.0;
      for (std::size_t j = 0; j < out; ++j) {
        gr[j] += u * dz[j];
        du += wr[j] * dz[j];
      }
      da[i] = scales[l].values[i] * du;
    }
    if (l == 0) break;
    dz.assign(da.size(), 0.0);
    for (std::size_t i = 0; i < da.size(); ++i) dz[i] = da[i] * (1.0 - act[l][i] * act[l][i]);
  }
  return nll;
}

}  // namespace detail

// Logits for one input vector under the given row scales (mask bits times
// keep ratio for stochastic passes, keep probabilities for DET).
inline std::vector<double> mlp_forward(const MlpParams& p, std::span<const double> x,
                                       const RowScales& scales) {
  if (x.size() != p.inputs())
    throw ContractError("mlp_forward: input has " + std::to_string(x.size()) +
                        " features, model expects " + std::to_string(p.inputs()));
  detail::check_scales(site_layout(p), scales);
  std::vector<double> logits;
  detail::mlp_pass(p, x, scales, &logits, 0, nullptr);
  return logits;
}

// Adds d nll / d params for one labelled example into grad; returns the nll.
inline double mlp_accumulate_gradient(const MlpParams& p, std::span<const double> x, int label,
                                      const RowScales& scales, MlpParams& grad) {
  if (x.size() != p.inputs()) throw ContractError("mlp: input width mismatch");
  if (label < 0 || static_cast<std::size_t>(label) >= p.classes())
    throw InputError("mlp: label out of range");
  detail::check_scales(site_layout(p), scales);
  return detail::mlp_pass(p, x, scales, nullptr, label, &grad);
}

}  // namespace dropfam
