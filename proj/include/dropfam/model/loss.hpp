#pragma once

#include <span>
#include <vector>

#include "dropfam/model/lstm.hpp"
#include "dropfam/model/mlp.hpp"

namespace dropfam {

template <class Params>
concept ParamSet = requires(Params& p, const Params& cp) {
  p.for_each_tensor([](const std::string&, Tensor&) {});
  cp.for_each_tensor([](const std::string&, const Tensor&) {});
};

template <ParamSet Params>
Params zeros_like(const Params& p) {
  Params z = p;
  z.for_each_tensor([](const std::string&, Tensor& t) { t.fill(0.0); });
  return z;
}

template <ParamSet Params>
double squared_norm(const Params& p) {
  double s = 0.0;
  p.for_each_tensor([&](const std::string&, const Tensor& t) { s += t.squared_norm(); });
  return s;
}

template <ParamSet Params>
std::size_t parameter_count(const Params& p) {
  std::size_t n = 0;
  p.for_each_tensor([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

template <ParamSet Params>
std::vector<double> flatten(const Params& p) {
  std::vector<double> out;
  p.for_each_tensor([&](const std::string&, const Tensor& t) {
    out.insert(out.end(), t.values().begin(), t.values().end());
  });
  return out;
}

template <ParamSet Params>
void unflatten(std::span<const double> flat, Params& p) {
  if (flat.size() != parameter_count(p)) throw ContractError("unflatten: length mismatch");
  std::size_t off = 0;
  p.for_each_tensor([&](const std::string&, Tensor& t) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), t.size(), t.values().begin());
    off += t.size();
  });
}

// nll = -sum ln p(y_i | x_i, w_i); prior_term = 0.5 * wd * |Theta|^2.
struct LossBreakdown {
  double nll = 0.0;
  double prior_term = 0.0;
  double total = 0.0;
  std::size_t targets = 0;
};

// Labelled feature rows for the MLP.
struct ClassBatch {
  const Tensor& features;  // N x F
  std::span<const int> labels;
  std::size_t size() const { return labels.size(); }
};

// Token sequences for the LSTM; element i contributes size()-1 targets.
struct SequenceBatch {
  std::span<const std::vector<int>> sequences;
  std::size_t size() const { return sequences.size(); }
};

namespace detail {

inline std::size_t mask_steps(const ClassBatch&, std::size_t) { return 1; }
inline std::size_t mask_steps(const SequenceBatch& b, std::size_t i) {
  return b.sequences[i].size() - 1;
}

inline double example_gradient(const MlpParams& p, const ClassBatch& b, std::size_t i,
                               const RowScales& scales, MlpParams& grad, std::size_t& targets) {
  ++targets;
  return mlp_accumulate_gradient(p, b.features.row(i), b.labels[i], scales, grad);
}

inline double example_gradient(const LstmParams& p, const SequenceBatch& b, std::size_t i,
                               const RowScales& scales, LstmParams& grad, std::size_t& targets) {
  const auto& seq = b.sequences[i];
  if (seq.size() < 2) throw ContractError("sequence needs at least two tokens");
  std::span<const int> s(seq);
  targets += seq.size() - 1;
  return lstm_accumulate_gradient(p, s.first(seq.size() - 1), s.subspan(1), scales, grad);
}

template <class Params, class Batch>
LossBreakdown loss_and_gradient(const Params& p, const DropoutSpec& spec, const Batch& batch,
                                std::span<const MaskSet> masks, double weight_decay,
                                Params* grad_out) {
  if (weight_decay < 0.0) throw DomainError("weight_decay must be >= 0");
  if (masks.size() != batch.size() && masks.size() != 1)
    throw ContractError("need one MaskSet per batch element or one for the whole batch");
  const SiteLayouts layout = site_layout(p);
  Params grad = zeros_like(p);
  LossBreakdown out;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const MaskSet& m = masks.size() == 1 ? masks[0] : masks[i];
    const RowScales scales = stochastic_scales(layout, spec, m, 1.0);
    out.nll += example_gradient(p, batch, i, scales, grad, out.targets);
  }
  out.prior_term = 0.5 * weight_decay * squared_norm(p);
  out.total = out.nll + out.prior_term;
  if (grad_out) {
    // prior gradient wd * Theta
    auto g = flatten(grad);
    const auto theta = flatten(p);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += weight_decay * theta[k];
    unflatten(g, grad);
    *grad_out = std::move(grad);
  }
  return out;
}

}  // namespace detail

// MAP training loss for fixed mask draws (masks at the trained rate).
template <class Params, class Batch>
LossBreakdown map_loss(const Params& p, const DropoutSpec& spec, const Batch& batch,
                       std::span<const MaskSet> masks, double weight_decay) {
  return detail::loss_and_gradient<Params, Batch>(p, spec, batch, masks, weight_decay, nullptr);
}

// d total / d Theta, aligned with the parameter tensors.
template <class Params, class Batch>
Params backward(const Params& p, const DropoutSpec& spec, const Batch& batch,
                std::span<const MaskSet> masks, double weight_decay,
                LossBreakdown* loss = nullptr) {
  Params grad;
  auto l = detail::loss_and_gradient<Params, Batch>(p, spec, batch, masks, weight_decay, &grad);
  if (loss) *loss = l;
  return grad;
}

// Fresh masks for every batch element (or one shared draw when per_batch).
template <class Params, class Batch>
std::vector<MaskSet> sample_batch_masks(const Params& p, const DropoutSpec& spec,
                                        const Batch& batch, const SplitSeed& seed,
                                        bool per_batch = false) {
  const SiteLayouts layout = site_layout(p);
  std::vector<MaskSet> masks;
  if (per_batch) {
    std::size_t longest = 1;
    for (std::size_t i = 0; i < batch.size(); ++i)
      longest = std::max(longest, detail::mask_steps(batch, i));
    masks.push_back(sample_masks(layout, spec, seed, longest, 1.0));
    return masks;
  }
  for (std::size_t i = 0; i < batch.size(); ++i)
    masks.push_back(sample_masks(layout, spec, seed.child(i), detail::mask_steps(batch, i), 1.0));
  return masks;
}

}  // namespace dropfam
