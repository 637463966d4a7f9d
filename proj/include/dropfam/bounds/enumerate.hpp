#pragma once

#include <cmath>
#include <vector>

#include "dropfam/family/evaluator.hpp"

namespace dropfam {

// Streaming log-sum-exp in a fixed accumulation order.
class LogSumAccumulator {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    if (x <= hi_) {
      sum_ += std::exp(x - hi_);
    } else {
      sum_ = sum_ * std::exp(hi_ - x) + 1.0;
      hi_ = x;
    }
  }
  double value() const { return hi_ == kNegInf ? kNegInf : hi_ + std::log(sum_); }

 private:
  double hi_ = kNegInf;
  double sum_ = 0.0;
};

// Exact expectations over every mask configuration, for one prediction position.
struct ExactPosition {
  std::vector<double> log_mean_pow;    // ln E p(c)^alpha   (0 when alpha = 0)
  std::vector<double> mean_log;        // E ln p(c)
  std::vector<double> log_power_mean;  // ln M_alpha(c)
  double log_Z = 0.0;
  std::vector<double> expected_logits;
};

struct ExactEnumeration {
  std::size_t droppable_rows = 0;
  std::size_t configurations = 0;
  std::vector<ExactPosition> positions;
};

inline constexpr std::size_t kMaxEnumeratedRows = 20;

// Enumerates all 2^k masks over rows whose effective rate lambda * p lies
// strictly inside (0, 1), weighting each by prod rate^drop (1 - rate)^keep.
// Scaling of kept rows matches the stochastic evaluation passes.
template <class Params, class Input>
ExactEnumeration enumerate_masks_exact(const DropoutNet<Params>& net, const Input& input,
                                       double alpha, double lambda = 1.0,
                                       double temperature = 1.0) {
  require_alpha(alpha);
  const SiteLayouts layout = site_layout(net.params);
  const std::size_t steps =
      net.dropout.sharing == MaskSharing::per_step ? input_steps(input) : 1;

  struct Free {
    std::size_t site, index;
    double log_keep, log_drop;
  };
  std::vector<Free> free_rows;
  MaskSet base;
  for (std::size_t s = 0; s < layout.size(); ++s) {
    const double rate = lambda * net.dropout.rate(layout[s].name);
    SiteMask m{steps, layout[s].rows, std::vector<std::uint8_t>(steps * layout[s].rows, 1)};
    for (std::size_t i = 0; i < m.bits.size(); ++i) {
      if (rate >= 1.0) m.bits[i] = 0;
      else if (rate > 0.0) free_rows.push_back({s, i, std::log1p(-rate), std::log(rate)});
    }
    base.push_back(std::move(m));
  }
  if (free_rows.size() > kMaxEnumeratedRows)
    throw DomainError("enumerate_masks_exact: " + std::to_string(free_rows.size()) +
                      " droppable rows exceeds the limit of " + std::to_string(kMaxEnumeratedRows));

  const std::size_t configs = std::size_t{1} << free_rows.size();
  std::vector<std::vector<LogSumAccumulator>> pow_acc;
  std::vector<std::vector<double>> mean_log, exp_logits;
  for (std::size_t cfg = 0; cfg < configs; ++cfg) {
    MaskSet masks = base;
    double log_w = 0.0;
    for (std::size_t k = 0; k < free_rows.size(); ++k) {
      const bool keep = ((cfg >> k) & 1U) == 0;
      masks[free_rows[k].site].bits[free_rows[k].index] = keep ? 1 : 0;
      log_w += keep ? free_rows[k].log_keep : free_rows[k].log_drop;
    }
    const double w = std::exp(log_w);
    const Tensor z =
        net_logits(net.params, input, stochastic_scales(layout, net.dropout, masks, lambda));
    if (cfg == 0) {
      pow_acc.assign(z.rows(), std::vector<LogSumAccumulator>(z.cols()));
      mean_log.assign(z.rows(), std::vector<double>(z.cols(), 0.0));
      exp_logits.assign(z.rows(), std::vector<double>(z.cols(), 0.0));
    }
    std::vector<double> lp(z.cols());
    for (std::size_t pos = 0; pos < z.rows(); ++pos) {
      log_softmax_into(z.row(pos), temperature, lp);
      for (std::size_t c = 0; c < z.cols(); ++c) {
        pow_acc[pos][c].add(log_w + alpha * lp[c]);
        mean_log[pos][c] += w * lp[c];
        exp_logits[pos][c] += w * z(pos, c);
      }
    }
  }

  ExactEnumeration out;
  out.droppable_rows = free_rows.size();
  out.configurations = configs;
  for (std::size_t pos = 0; pos < mean_log.size(); ++pos) {
    ExactPosition e;
    const std::size_t C = mean_log[pos].size();
    e.mean_log = mean_log[pos];
    e.expected_logits = exp_logits[pos];
    e.log_mean_pow.resize(C);
    e.log_power_mean.resize(C);
    for (std::size_t c = 0; c < C; ++c) {
      e.log_mean_pow[c] = alpha < kAlphaSwitch ? 0.0 : pow_acc[pos][c].value();
      e.log_power_mean[c] = alpha < kAlphaSwitch ? e.mean_log[c] : e.log_mean_pow[c] / alpha;
    }
    e.log_Z = log_sum_exp(e.log_power_mean);
    out.positions.push_back(std::move(e));
  }
  return out;
}

}  // namespace dropfam
