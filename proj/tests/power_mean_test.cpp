#include <gtest/gtest.h>

#include <cmath>

#include "dropfam/family/power_mean.hpp"
#include "dropfam/numeric/rng.hpp"

using namespace dropfam;

namespace {

// Direct evaluation in probability space with long double.
struct Oracle {
  std::vector<long double> m, normalized;
  long double z = 0;
};

Oracle direct_power_mean(const std::vector<std::vector<double>>& rows, double alpha) {
  const std::size_t S = rows.size(), C = rows[0].size();
  Oracle o;
  o.m.assign(C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    long double acc = 0;
    if (alpha == 0.0) {
      for (std::size_t s = 0; s < S; ++s) acc += std::log((long double)rows[s][c]);
      o.m[c] = std::exp(acc / S);
    } else {
      for (std::size_t s = 0; s < S; ++s) acc += std::pow((long double)rows[s][c], (long double)alpha);
      o.m[c] = std::pow(acc / S, 1.0L / alpha);
    }
    o.z += o.m[c];
  }
  for (auto v : o.m) o.normalized.push_back(v / o.z);
  return o;
}

std::vector<std::vector<double>> random_rows(RandomStream& rng, std::size_t S, std::size_t C) {
  std::vector<std::vector<double>> rows(S, std::vector<double>(C));
  for (auto& r : rows) {
    double sum = 0;
    for (double& v : r) sum += (v = std::exp(rng.normal(0.0, 2.0)));
    for (double& v : r) v /= sum;
  }
  return rows;
}

}  // namespace

TEST(PowerMean, WorkedExampleGeometric) {
  const auto P = PredictionMatrix::from_probabilities({{0.2, 0.8}, {0.6, 0.4}});
  const auto r = power_mean_aggregate(P, 0.0);
  const auto o = direct_power_mean({{0.2, 0.8}, {0.6, 0.4}}, 0.0);
  EXPECT_NEAR(std::exp(r.unnormalized_log[0]), std::sqrt(0.12), 1e-15);
  EXPECT_NEAR(std::exp(r.unnormalized_log[1]), std::sqrt(0.32), 1e-15);
  EXPECT_NEAR(std::exp(r.log_Z), (double)o.z, 1e-15);
  EXPECT_NEAR(std::exp(r.log_Z), 0.91210, 5e-6);
  EXPECT_NEAR(std::exp(r.normalized_log[0]), 0.37979, 1e-5);
  EXPECT_NEAR(std::exp(r.normalized_log[1]), 0.62021, 1e-5);
  EXPECT_NEAR(std::exp(r.normalized_log[0]), (double)o.normalized[0], 1e-15);
}

TEST(PowerMean, WorkedExampleArithmetic) {
  const auto P = PredictionMatrix::from_probabilities({{0.2, 0.8}, {0.6, 0.4}});
  const auto r = power_mean_aggregate(P, 1.0);
  EXPECT_NEAR(std::exp(r.normalized_log[0]), 0.4, 1e-15);
  EXPECT_NEAR(std::exp(r.normalized_log[1]), 0.6, 1e-15);
  EXPECT_NEAR(r.log_Z, 0.0, 1e-15);
}

TEST(PowerMean, IdenticalRowsReturnTheRow) {
  const std::vector<double> d{0.1, 0.7, 0.2};
  const auto P = PredictionMatrix::from_probabilities({d, d, d, d});
  for (double a : {0.0, 1e-6, 0.3, 0.5, 1.0}) {
    const auto r = power_mean_aggregate(P, a);
    EXPECT_EQ(r.log_Z, 0.0);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(r.normalized_log[c], std::log(d[c]));
  }
}

TEST(PowerMean, SingleSampleReturnsThatSample) {
  const auto P = PredictionMatrix::from_probabilities({{0.25, 0.5, 0.25}});
  for (double a : {0.0, 0.5, 1.0}) {
    const auto r = power_mean_aggregate(P, a);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(r.normalized_log[c], P.at(0, c));
  }
}

TEST(PowerMean, AlphaOutsideUnitIntervalRejected) {
  const auto P = PredictionMatrix::from_probabilities({{0.5, 0.5}});
  EXPECT_THROW(power_mean_aggregate(P, 1.5), DomainError);
  EXPECT_THROW(power_mean_aggregate(P, -0.1), DomainError);
  EXPECT_THROW(power_mean_aggregate(P, std::nan("")), DomainError);
}

TEST(PowerMean, MatchesDirectOracle) {
  auto rng = SplitSeed(31).stream();
  for (int k = 0; k < 200; ++k) {
    const std::size_t S = 1 + rng.below(20), C = 2 + rng.below(10);
    const auto rows = random_rows(rng, S, C);
    const auto P = PredictionMatrix::from_probabilities(rows);
    for (double a : {0.0, 0.1, 0.5, 0.9, 1.0}) {
      const auto r = power_mean_aggregate(P, a);
      const auto o = direct_power_mean(rows, a);
      EXPECT_NEAR(r.log_Z, (double)std::log(o.z), 1e-12);
      for (std::size_t c = 0; c < C; ++c)
        EXPECT_NEAR(r.normalized_log[c], (double)std::log(o.normalized[c]), 1e-11);
    }
  }
}

TEST(PowerMean, Invariants) {
  auto rng = SplitSeed(32).stream();
  for (int k = 0; k < 300; ++k) {
    const std::size_t S = 1 + rng.below(64), C = 2 + rng.below(49);
    const auto P = PredictionMatrix::from_probabilities(random_rows(rng, S, C));
    P.validate();
    double prev_lz = -1e300;
    std::vector<double> prev_m(C, -1e300);
    for (int g = 0; g <= 10; ++g) {
      const double a = g / 10.0;
      const auto r = power_mean_aggregate(P, a);
      double total = 0;
      for (double v : r.normalized_log) total += std::exp(v);
      EXPECT_NEAR(total, 1.0, 1e-9);
      EXPECT_LE(r.log_Z, 1e-12);
      if (a == 1.0) EXPECT_NEAR(r.log_Z, 0.0, 1e-12);
      EXPECT_GE(r.log_Z, prev_lz - 1e-12);
      for (std::size_t c = 0; c < C; ++c) {
        EXPECT_GE(r.unnormalized_log[c], prev_m[c] - 1e-12);
        prev_m[c] = r.unnormalized_log[c];
      }
      prev_lz = r.log_Z;
    }
  }
}

TEST(PowerMean, SmallAlphaApproachesGeometric) {
  auto rng = SplitSeed(33).stream();
  for (int k = 0; k < 100; ++k) {
    const auto P = PredictionMatrix::from_probabilities(random_rows(rng, 1 + rng.below(64), 2 + rng.below(49)));
    const auto g = power_mean_aggregate(P, 0.0);
    const auto r = power_mean_aggregate(P, 1e-6);
    for (std::size_t c = 0; c < P.classes(); ++c)
      EXPECT_NEAR(r.normalized_log[c], g.normalized_log[c], 1e-4);
  }
}

TEST(PowerMean, ContinuousAcrossSwitch) {
  auto rng = SplitSeed(34).stream();
  const auto rows = random_rows(rng, 16, 5);
  const auto P = PredictionMatrix::from_probabilities(rows);
  const auto below = power_mean_aggregate(P, kAlphaSwitch * 0.999);
  const auto above = power_mean_aggregate(P, kAlphaSwitch * 1.001);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(below.normalized_log[c], above.normalized_log[c], 1e-3);
}

TEST(PowerMean, TinyProbabilitiesStayFinite) {
  PredictionMatrix P(3, 2, {-800.0, std::log1p(-std::exp(-800.0)), -700.0, 0.0, -900.0, 0.0});
  for (double a : {0.0, 0.5, 1.0}) {
    const auto r = power_mean_aggregate(P, a);
    for (double v : r.normalized_log) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(PredictionMatrix, ValidateRejectsBadRows) {
  EXPECT_THROW(PredictionMatrix::from_probabilities({{0.5, 0.6}}).validate(), ContractError);
  EXPECT_THROW(PredictionMatrix(2, 2, {0.0, 0.0, 0.0}), ContractError);
  EXPECT_NO_THROW(PredictionMatrix::from_probabilities({{0.3, 0.7}}).validate());
}
