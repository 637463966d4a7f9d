#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "dropfam/family/buckets.hpp"
#include "dropfam/family/evaluator.hpp"

using namespace dropfam;

namespace {

MlpNet small_mlp(std::uint64_t seed, double p_in = 0.3, double p_hid = 0.4) {
  MlpNet net{init_mlp({4, 6, 3}, SplitSeed(seed)), {}};
  net.dropout.rates = {{"input", p_in}, {"hidden1", p_hid}};
  return net;
}

LstmNet small_lstm(std::uint64_t seed, MaskSharing sharing) {
  LstmNet net{init_lstm(7, 4, 5, false, SplitSeed(seed)), {}};
  net.dropout.rates = {{"input", 0.3}, {"hidden", 0.4}};
  net.dropout.sharing = sharing;
  return net;
}

ClassificationSet random_classification(std::uint64_t seed, std::size_t n, std::size_t f, std::size_t c) {
  auto rng = SplitSeed(seed).stream();
  ClassificationSet d;
  std::vector<double> x(n * f);
  for (double& v : x) v = rng.normal();
  d.features = Tensor({n, f}, x);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng.below(c)));
  d.classes = c;
  return d;
}

SequenceSet random_sequences(std::uint64_t seed, std::size_t n, std::size_t len, std::size_t vocab) {
  auto rng = SplitSeed(seed).stream();
  SequenceSet d;
  d.vocab = vocab;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<int> s(len);
    for (int& t : s) t = static_cast<int>(rng.below(vocab));
    d.sequences.push_back(s);
  }
  return d;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace

TEST(FamilyParams, Domains) {
  FamilyParams fp;
  fp.alpha = 1.5;
  EXPECT_THROW(fp.validate(), DomainError);
  fp = {};
  fp.lambda = -0.1;
  EXPECT_THROW(fp.validate(), DomainError);
  fp = {};
  fp.samples = 0;
  EXPECT_THROW(fp.validate(), DomainError);
  fp = {};
  fp.temperature = 0.0;
  EXPECT_THROW(fp.validate(), DomainError);
  EXPECT_NO_THROW(FamilyParams::det(2.0).validate());
}

TEST(Deterministic, LinearUnitExpectationScaling) {
  MlpNet net{zero_mlp({1, 1}), {}};
  net.params.weights[0](0, 0) = 2.0;
  net.dropout.rates = {{"input", 0.5}};
  const std::vector<double> x{1.0};
  const Tensor z = net_logits(net.params, std::span<const double>(x),
                              deterministic_scales(site_layout(net.params), net.dropout));
  EXPECT_EQ(z(0, 0), 1.0);
}

TEST(Deterministic, RateZeroIsPlainForward) {
  const MlpNet net = small_mlp(1, 0.0, 0.0);
  const std::vector<double> x{0.1, 0.2, -0.3, 1.0};
  const Tensor lp = deterministic_predict(net, std::span<const double>(x));
  const auto plain = log_softmax(mlp_forward(net.params, x, unit_scales(site_layout(net.params))));
  EXPECT_TRUE(bitwise_equal(lp.values(), plain));
}

TEST(Deterministic, TemperatureKeepsArgmax) {
  const MlpNet net = small_mlp(2);
  const std::vector<double> x{0.5, -0.2, 0.3, 0.9};
  const Tensor a = deterministic_predict(net, std::span<const double>(x), 1.0);
  const Tensor b = deterministic_predict(net, std::span<const double>(x), 2.0);
  EXPECT_EQ(argmax(a.row(0)), argmax(b.row(0)));
}

TEST(McPredict, LambdaZeroEqualsDeterministicBitwise) {
  const MlpNet mlp = small_mlp(3);
  const std::vector<double> x{0.5, -0.2, 0.3, 0.9};
  const LstmNet lstm = small_lstm(4, MaskSharing::per_step);
  const std::vector<int> tokens{1, 4, 2, 6, 0};
  const Tensor det_mlp = deterministic_predict(mlp, std::span<const double>(x), 1.3);
  const Tensor det_lstm = deterministic_predict(lstm, std::span<const int>(tokens), 1.3);
  for (double a : {0.0, 0.5, 1.0}) {
    for (std::size_t S : {1u, 7u}) {
      const FamilyParams fp{a, 0.0, 1.3, S, false};
      const auto m = mc_predict(mlp, std::span<const double>(x), fp, SplitSeed(5));
      EXPECT_TRUE(bitwise_equal(m.aggregates[0].normalized_log, det_mlp.row(0)));
      const auto l = mc_predict(lstm, std::span<const int>(tokens), fp, SplitSeed(5));
      for (std::size_t pos = 0; pos < tokens.size(); ++pos)
        EXPECT_TRUE(bitwise_equal(l.aggregates[pos].normalized_log, det_lstm.row(pos)));
    }
  }
}

TEST(McPredict, SingleSampleIsThatSample) {
  const MlpNet net = small_mlp(6);
  const std::vector<double> x{0.5, -0.2, 0.3, 0.9};
  for (double a : {0.0, 0.5, 1.0}) {
    const auto m = mc_predict(net, std::span<const double>(x), FamilyParams{a, 1.0, 1.0, 1, false}, SplitSeed(7));
    EXPECT_TRUE(bitwise_equal(m.aggregates[0].normalized_log, m.matrices[0].row(0)));
  }
}

TEST(McPredict, RowsAreDistributions) {
  const LstmNet net = small_lstm(8, MaskSharing::shared_across_time);
  const std::vector<int> tokens{1, 2, 3};
  const auto m = mc_predict(net, std::span<const int>(tokens), FamilyParams{0.5, 0.8, 1.0, 9, false}, SplitSeed(9));
  ASSERT_EQ(m.matrices.size(), 3u);
  for (const auto& P : m.matrices) {
    EXPECT_EQ(P.samples(), 9u);
    EXPECT_NO_THROW(P.validate());
  }
}

TEST(McPredict, ThreadCountDoesNotChangeResult) {
  const LstmNet net = small_lstm(10, MaskSharing::per_step);
  const std::vector<int> tokens{1, 2, 3, 4};
  const FamilyParams fp{0.3, 0.9, 1.0, 17, false};
  const auto a = mc_predict(net, std::span<const int>(tokens), fp, SplitSeed(11), 1);
  const auto b = mc_predict(net, std::span<const int>(tokens), fp, SplitSeed(11), 4);
  for (std::size_t pos = 0; pos < tokens.size(); ++pos)
    EXPECT_TRUE(bitwise_equal(a.aggregates[pos].normalized_log, b.aggregates[pos].normalized_log));
}

TEST(McPredict, RejectsDeterministicPoint) {
  const MlpNet net = small_mlp(1);
  const std::vector<double> x{0, 0, 0, 0};
  EXPECT_THROW(mc_predict(net, std::span<const double>(x), FamilyParams::det(), SplitSeed(1)), ContractError);
}

TEST(Evaluate, UniformPredictorGivesLogC) {
  MlpNet net{zero_mlp({4, 5}), {}};
  net.dropout.rates = {{"input", 0.5}};
  const auto data = random_classification(12, 20, 4, 5);
  EXPECT_DOUBLE_EQ(evaluate_dataset(net, data, FamilyParams::det(), SplitSeed(1)).xe, std::log(5.0));
  EXPECT_DOUBLE_EQ(evaluate_dataset(net, data, FamilyParams{0.0, 1.0, 1.0, 5, false}, SplitSeed(1)).xe,
                   std::log(5.0));
}

TEST(Evaluate, EmptyDatasetRejected) {
  const MlpNet net = small_mlp(1);
  ClassificationSet empty;
  empty.features = Tensor({0, 4});
  empty.classes = 3;
  EXPECT_THROW(evaluate_dataset(net, empty, FamilyParams::det(), SplitSeed(1)), DomainError);
}

TEST(Evaluate, PerplexityIsExpXe) {
  const LstmNet net = small_lstm(13, MaskSharing::shared_across_time);
  const auto data = random_sequences(14, 6, 9, 7);
  const auto r = evaluate_dataset(net, data, FamilyParams{1.0, 1.0, 1.0, 8, false}, SplitSeed(2));
  EXPECT_EQ(r.targets, 6u * 8u);
  EXPECT_EQ(r.perplexity, std::exp(r.xe));
  EXPECT_GE(r.xe, 0.0);
}

TEST(Evaluate, ThreadCountDoesNotChangeResult) {
  const MlpNet net = small_mlp(15);
  const auto data = random_classification(16, 37, 4, 3);
  const FamilyParams fp{0.5, 0.7, 1.0, 11, false};
  const auto a = evaluate_dataset(net, data, fp, SplitSeed(3), 1);
  const auto b = evaluate_dataset(net, data, fp, SplitSeed(3), 3);
  EXPECT_EQ(std::bit_cast<std::uint64_t>(a.xe), std::bit_cast<std::uint64_t>(b.xe));
}

TEST(Evaluate, SharedPassesMatchSingleQueries) {
  const MlpNet net = small_mlp(17);
  const auto data = random_classification(18, 10, 4, 3);
  const std::vector<AlphaTemperature> qs{{0.0, 1.0}, {0.5, 2.0}, {1.0, 0.7}};
  const auto all = per_target_nll(net, data, PassSpec{false, 0.9, 6}, std::span<const AlphaTemperature>(qs), SplitSeed(4));
  for (std::size_t q = 0; q < qs.size(); ++q) {
    const auto r = evaluate_dataset(net, data, FamilyParams{qs[q].alpha, 0.9, qs[q].temperature, 6, false}, SplitSeed(4));
    EXPECT_EQ(r.xe, mean_of(all[q]));
  }
}

TEST(Buckets, ParseThresholds) {
  EXPECT_TRUE(parse_threshold(">25000").greater);
  EXPECT_FALSE(parse_threshold("<500").greater);
  EXPECT_TRUE(parse_threshold("25000<").greater);
  EXPECT_EQ(parse_threshold("20>").value, 20.0);
  EXPECT_THROW(parse_threshold("abc"), ConfigError);
  EXPECT_THROW(parse_threshold(">"), ConfigError);
  EXPECT_EQ(default_thresholds().size(), 6u);
}

TEST(Buckets, SingleBucketEqualsDatasetXe) {
  const LstmNet net = small_lstm(19, MaskSharing::shared_across_time);
  const auto train = random_sequences(20, 4, 6, 7);
  const auto valid = random_sequences(21, 3, 6, 7);
  const std::vector<std::size_t> freq(7, 10);
  const std::vector<FamilyParams> methods{FamilyParams::det(), FamilyParams{1.0, 1.0, 1.0, 5, false}};
  const auto rep = frequency_bucket_report(net, train, valid, freq, methods, {parse_threshold(">5")}, SplitSeed(6));
  ASSERT_EQ(rep.rows.size(), 4u);
  for (const auto& row : rep.rows) {
    const auto& data = row.split == "train" ? train : valid;
    const auto r = evaluate_dataset(net, data, methods[row.method], SplitSeed(6));
    EXPECT_EQ(row.targets, data.targets());
    EXPECT_NEAR(row.xe, r.xe, 1e-12);
  }
}

TEST(Buckets, DisjointBucketsPartitionTargets) {
  const LstmNet net = small_lstm(22, MaskSharing::shared_across_time);
  const auto train = random_sequences(23, 5, 8, 7);
  const auto valid = random_sequences(24, 5, 8, 7);
  const std::vector<std::size_t> freq{0, 3, 9, 2, 15, 6, 1};
  const auto rep = frequency_bucket_report(net, train, valid, freq, {FamilyParams::det()},
                                           {parse_threshold(">4"), parse_threshold("<5")}, SplitSeed(7));
  std::size_t train_total = 0, valid_total = 0;
  for (const auto& row : rep.rows) {
    (row.split == "train" ? train_total : valid_total) += row.targets;
    EXPECT_GE(row.xe, 0.0);
  }
  EXPECT_EQ(train_total, train.targets());
  EXPECT_EQ(valid_total, valid.targets());
}

TEST(Buckets, EmptyThresholdListRejected) {
  const LstmNet net = small_lstm(25, MaskSharing::shared_across_time);
  const auto d = random_sequences(26, 2, 4, 7);
  EXPECT_THROW(frequency_bucket_report(net, d, d, std::vector<std::size_t>(7, 1), {FamilyParams::det()}, {}, SplitSeed(1)),
               DomainError);
}
