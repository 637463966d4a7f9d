#pragma once

#include <ostream>

#include "dropfam/bounds/enumerate.hpp"
#include "dropfam/bounds/jensen_gap.hpp"
#include "dropfam/family/power_mean.hpp"

namespace dropfam {

// Random MLP with at most max_rows droppable rows: inputs x hidden x classes.
inline MlpNet random_small_mlp(const SplitSeed& seed, std::size_t max_rows = 12) {
  RandomStream rng = seed.stream();
  const std::size_t inputs = 2 + rng.below(4);  // 2..5
  const std::size_t hidden = 2 + rng.below(std::min<std::size_t>(max_rows - inputs, 6) - 1);
  const std::size_t classes = 2 + rng.below(4);
  MlpNet net{init_mlp({inputs, hidden, classes}, seed.child(1)), {}};
  for (double& b : net.params.biases[0].values()) b = rng.normal(0.0, 0.5);
  for (double& b : net.params.biases[1].values()) b = rng.normal(0.0, 0.5);
  for (double& w : net.params.weights[1].values()) w *= 2.0;
  net.dropout.rates = {{"input", rng.uniform(0.1, 0.6)}, {"hidden1", rng.uniform(0.1, 0.6)}};
  return net;
}

inline std::vector<double> random_input(const MlpNet& net, const SplitSeed& seed) {
  RandomStream rng = seed.stream();
  std::vector<double> x(net.params.inputs());
  for (double& v : x) v = rng.normal();
  return x;
}

// Exact chain E ln p(y) <= ln M_alpha(y) <= ln M_alpha(y) - ln Z, ln Z <= 0.
inline bool enumeration_chain_holds(const MlpNet& net, std::span<const double> x, double alpha,
                                    double slack = 1e-12) {
  const auto ex = enumerate_masks_exact(net, x, alpha);
  const auto& e = ex.positions[0];
  bool ok = e.log_Z <= slack;
  if (alpha == 1.0) ok = ok && std::abs(e.log_Z) <= slack;
  for (std::size_t c = 0; c < e.mean_log.size(); ++c) {
    ok = ok && e.mean_log[c] <= e.log_power_mean[c] + slack;
    ok = ok && e.log_power_mean[c] <= e.log_power_mean[c] - e.log_Z + slack;
  }
  return ok;
}

inline bool run_selftest(std::ostream& out) {
  bool all = true;
  auto report = [&](const std::string& name, bool ok) {
    out << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
    all = all && ok;
  };

  const SplitSeed root(20240611);
  bool chain = true;
  for (std::uint64_t k = 0; k < 8; ++k) {
    const auto net = random_small_mlp(root.child(0).child(k));
    const auto x = random_input(net, root.child(1).child(k));
    for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) chain = chain && enumeration_chain_holds(net, x, a);
  }
  report("enumeration oracle: E ln p <= ln M_alpha <= ln M_alpha - ln Z", chain);

  bool sandwich = true;
  {
    const std::vector<double> worked{0.4, 0.6};
    const auto b = liao_gap_bounds(worked);
    const double gap = exact_jensen_gap(worked);
    sandwich = b.lower <= gap && gap <= b.upper && std::abs(b.lower - 0.0176784) < 1e-6 &&
               std::abs(b.upper - 0.0231436) < 1e-6 && std::abs(gap - 0.0204110) < 1e-6;
  }
  for (std::uint64_t k = 0; k < 50; ++k) {
    RandomStream rng = root.child(2).child(k).stream();
    std::vector<double> s(2 + rng.below(40));
    for (double& v : s) v = rng.uniform(0.01, 1.0);
    const auto b = liao_gap_bounds(s);
    const double gap = exact_jensen_gap(s);
    sandwich = sandwich && b.lower <= gap * (1 + 1e-12) && gap <= b.upper * (1 + 1e-12);
  }
  report("gap sandwich: inf h var <= ln E L - E ln L <= sup h var", sandwich);

  bool identities = true;
  for (std::uint64_t k = 0; k < 50; ++k) {
    RandomStream rng = root.child(3).child(k).stream();
    const std::size_t S = 1 + rng.below(16), C = 2 + rng.below(10);
    PredictionMatrix P(S, C);
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<double> z(C);
      for (double& v : z) v = rng.normal(0.0, 2.0);
      log_softmax_into(z, 1.0, P.row(s));
    }
    identities = identities && std::abs(power_mean_aggregate(P, 1.0).log_Z) <= 1e-12;
    double prev = kNegInf;
    for (int g = 0; g <= 10; ++g) {
      const double lz = power_mean_aggregate(P, g / 10.0).log_Z;
      identities = identities && lz >= prev - 1e-12 && lz <= 1e-12;
      prev = lz;
    }
  }
  report("power mean: Z = 1 at alpha = 1, ln Z nondecreasing in alpha and <= 0", identities);
  return all;
}

}  // namespace dropfam
