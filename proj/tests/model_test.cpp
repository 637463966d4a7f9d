#include <gtest/gtest.h>

#include <cmath>

#include "dropfam/model/loss.hpp"
#include "dropfam/numeric/grad_check.hpp"

using namespace dropfam;

namespace {

DropoutSpec rates(std::map<std::string, double> r, MaskSharing sharing = MaskSharing::shared_across_time) {
  DropoutSpec s;
  s.rates = std::move(r);
  s.sharing = sharing;
  return s;
}

template <class Params, class Batch>
double gradient_error(const Params& p, const DropoutSpec& spec, const Batch& batch,
                      const std::vector<MaskSet>& masks, double wd) {
  const Params g = backward(p, spec, batch, std::span<const MaskSet>(masks), wd);
  const auto theta = flatten(p);
  const auto grad = flatten(g);
  auto f = [&](std::span<const double> t) {
    Params q = p;
    unflatten(t, q);
    return map_loss(q, spec, batch, std::span<const MaskSet>(masks), wd).total;
  };
  return finite_difference_check(f, theta, grad, 1e-5);
}

double direct_lstm_cell_logit(const LstmParams& p, int token, std::size_t v) {
  const std::size_t H = p.hidden;
  std::vector<double> h(H);
  for (std::size_t j = 0; j < H; ++j) {
    auto gate = [&](std::size_t k) {
      double a = p.b[k * H + j];
      for (std::size_t r = 0; r < p.embed; ++r) a += p.embedding(token, r) * p.w_x(r, k * H + j);
      return a;
    };
    const double i = 1 / (1 + std::exp(-gate(0)));
    const double o = 1 / (1 + std::exp(-gate(2)));
    const double g = std::tanh(gate(3));
    h[j] = o * std::tanh(i * g);
  }
  double z = p.b_out[v];
  for (std::size_t j = 0; j < H; ++j) z += h[j] * p.w_out(j, v);
  return z;
}

}  // namespace

TEST(Masks, RateZeroKeepsAllRateOneDropsAll) {
  const SiteLayouts layout{{"input", 50}, {"hidden1", 20}};
  auto keep = sample_masks(layout, rates({{"input", 0.0}, {"hidden1", 0.0}}), SplitSeed(1), 1, 1.0);
  for (const auto& m : keep)
    for (auto b : m.bits) EXPECT_EQ(b, 1);
  auto drop = sample_masks(layout, rates({{"input", 1.0}, {"hidden1", 1.0}}), SplitSeed(1), 1, 1.0);
  for (const auto& m : drop)
    for (auto b : m.bits) EXPECT_EQ(b, 0);
}

TEST(Masks, KeptFractionBinomial) {
  const SiteLayouts layout{{"input", 10000}};
  const auto m = sample_masks(layout, rates({{"input", 0.5}}), SplitSeed(2), 1, 1.0);
  double kept = 0;
  for (auto b : m[0].bits) kept += b;
  EXPECT_NEAR(kept / 10000, 0.5, 3 * std::sqrt(0.25 / 10000));
}

TEST(Masks, SharingShapes) {
  const SiteLayouts layout{{"input", 4}, {"hidden", 3}};
  auto shared = sample_masks(layout, rates({{"input", 0.5}}), SplitSeed(3), 7, 1.0);
  EXPECT_EQ(shared[0].steps, 1u);
  EXPECT_EQ(shared[0].bits.size(), 4u);
  auto per = sample_masks(layout, rates({{"input", 0.5}}, MaskSharing::per_step), SplitSeed(3), 7, 1.0);
  EXPECT_EQ(per[0].steps, 7u);
  EXPECT_EQ(per[1].bits.size(), 21u);
}

TEST(Masks, CoupledAcrossRateScale) {
  const SiteLayouts layout{{"input", 500}};
  const auto spec = rates({{"input", 0.6}});
  const auto lo = sample_masks(layout, spec, SplitSeed(4), 1, 0.3);
  const auto hi = sample_masks(layout, spec, SplitSeed(4), 1, 0.9);
  for (std::size_t r = 0; r < 500; ++r)
    if (!lo[0].bits[r]) EXPECT_FALSE(hi[0].bits[r]);
}

TEST(Masks, EffectiveRateDomain) {
  DropoutSpec bad = rates({{"input", 1.5}});
  EXPECT_THROW(bad.validate(), DomainError);
  EXPECT_THROW(sample_masks({{"input", 2}}, rates({{"input", 0.5}}), SplitSeed(1), 1, 1.5), DomainError);
}

TEST(Scales, KeptRowScaleEndpoints) {
  EXPECT_EQ(kept_row_scale(0.3, 1.0), 1.0);
  EXPECT_EQ(kept_row_scale(0.3, 0.0), 1.0 - 0.3);
  EXPECT_EQ(kept_row_scale(0.0, 0.4), 1.0);
  // expected multiplier is the trained keep probability for every lambda
  for (double lam : {0.1, 0.5, 0.9})
    EXPECT_NEAR((1 - lam * 0.3) * kept_row_scale(0.3, lam), 0.7, 1e-15);
}

TEST(Mlp, ZeroWeightsGiveZeroLogits) {
  const MlpParams p = zero_mlp({3, 4, 5});
  const std::vector<double> x{1, -2, 3};
  const auto z = mlp_forward(p, x, unit_scales(site_layout(p)));
  for (double v : z) EXPECT_EQ(v, 0.0);
  for (double v : softmax_with_temperature(z, 1.0)) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Mlp, RateZeroDeterministicEqualsStochastic) {
  const MlpParams p = init_mlp({3, 6, 4}, SplitSeed(5));
  const auto spec = rates({});
  const auto layout = site_layout(p);
  const std::vector<double> x{0.3, -1.0, 2.0};
  const auto det = mlp_forward(p, x, deterministic_scales(layout, spec));
  for (std::uint64_t k = 0; k < 5; ++k) {
    const auto m = sample_masks(layout, spec, SplitSeed(k), 1, 1.0);
    EXPECT_EQ(mlp_forward(p, x, stochastic_scales(layout, spec, m, 1.0)), det);
  }
}

TEST(Mlp, ShapeMismatchIsContractError) {
  const MlpParams p = init_mlp({3, 4, 2}, SplitSeed(5));
  const std::vector<double> x{1, 2};
  EXPECT_THROW(mlp_forward(p, x, unit_scales(site_layout(p))), ContractError);
  EXPECT_THROW(mlp_forward(p, std::vector<double>{1, 2, 3}, RowScales{}), ContractError);
}

TEST(Lstm, SingleStepMatchesDirectCell) {
  const LstmParams p = init_lstm(6, 3, 4, false, SplitSeed(6));
  const std::vector<int> tok{2};
  const Tensor z = lstm_forward(p, tok, unit_scales(site_layout(p)));
  ASSERT_EQ(z.rows(), 1u);
  for (std::size_t v = 0; v < 6; ++v) EXPECT_NEAR(z(0, v), direct_lstm_cell_logit(p, 2, v), 1e-14);
}

TEST(Lstm, OutOfVocabTokenIsInputError) {
  const LstmParams p = init_lstm(6, 3, 4, false, SplitSeed(6));
  EXPECT_THROW(lstm_forward(p, std::vector<int>{1, 6}, unit_scales(site_layout(p))), InputError);
  EXPECT_THROW(lstm_forward(p, std::vector<int>{-1}, unit_scales(site_layout(p))), InputError);
}

TEST(Lstm, TiedNeedsMatchingSizes) {
  EXPECT_THROW(init_lstm(6, 3, 4, true, SplitSeed(6)), ConfigError);
  const LstmParams p = init_lstm(6, 4, 4, true, SplitSeed(6));
  EXPECT_TRUE(p.w_out.values().empty());
}

TEST(MapLoss, Examples) {
  // two classes, zero logits
  MlpParams p = zero_mlp({1, 2});
  const Tensor x({1, 1}, std::vector<double>{0.7});
  for (int label : {0, 1}) {
    const std::vector<int> y{label};
    const ClassBatch b{x, y};
    const std::vector<MaskSet> m{sample_masks(site_layout(p), rates({}), SplitSeed(1), 1, 1.0)};
    const auto l = map_loss(p, rates({}), b, std::span<const MaskSet>(m), 0.0);
    EXPECT_NEAR(l.nll, 0.6931471805599453, 1e-15);
    EXPECT_EQ(l.total, l.nll + l.prior_term);
  }
  // one weight of value 2, weight decay 0.1
  p.weights[0](0, 0) = 2.0;
  const std::vector<int> y{0};
  const ClassBatch b{x, y};
  const std::vector<MaskSet> m{sample_masks(site_layout(p), rates({}), SplitSeed(1), 1, 1.0)};
  EXPECT_NEAR(map_loss(p, rates({}), b, std::span<const MaskSet>(m), 0.1).prior_term, 0.2, 1e-15);
}

TEST(MapLoss, PerfectPredictionAtZeroParametersIsZero) {
  // single class: softmax is one-hot by construction
  const MlpParams p = zero_mlp({2, 1});
  const Tensor x({1, 2}, std::vector<double>{1, 2});
  const std::vector<int> y{0};
  const std::vector<MaskSet> m{sample_masks(site_layout(p), rates({}), SplitSeed(1), 1, 1.0)};
  const auto l = map_loss(p, rates({}), ClassBatch{x, y}, std::span<const MaskSet>(m), 0.5);
  EXPECT_EQ(l.total, 0.0);
}

TEST(MapLoss, InvariantToBatchOrder) {
  const MlpParams p = init_mlp({3, 5, 4}, SplitSeed(7));
  const auto spec = rates({{"input", 0.2}, {"hidden1", 0.4}});
  auto rng = SplitSeed(8).stream();
  std::vector<double> xs(8 * 3);
  for (double& v : xs) v = rng.normal();
  const Tensor x({8, 3}, xs);
  std::vector<int> y(8);
  for (int& v : y) v = static_cast<int>(rng.below(4));
  const ClassBatch batch{x, y};
  const auto masks = sample_batch_masks(p, spec, batch, SplitSeed(9));
  const double forward = map_loss(p, spec, batch, std::span<const MaskSet>(masks), 1e-3).total;

  std::vector<double> rx;
  std::vector<int> ry;
  std::vector<MaskSet> rm;
  for (std::size_t i = 8; i-- > 0;) {
    rx.insert(rx.end(), x.row(i).begin(), x.row(i).end());
    ry.push_back(y[i]);
    rm.push_back(masks[i]);
  }
  const Tensor xr({8, 3}, rx);
  const double reversed = map_loss(p, spec, ClassBatch{xr, ry}, std::span<const MaskSet>(rm), 1e-3).total;
  EXPECT_NEAR(forward, reversed, 1e-12);
}

TEST(Backward, MlpMatchesFiniteDifferences) {
  for (std::uint64_t k = 0; k < 10; ++k) {
    const SplitSeed s = SplitSeed(100).child(k);
    auto rng = s.stream();
    const std::size_t in = 2 + rng.below(3), hid = 2 + rng.below(4), cls = 2 + rng.below(3);
    const MlpParams p = init_mlp({in, hid, cls}, s.child(0));
    const auto spec = rates({{"input", 0.3}, {"hidden1", 0.5}});
    std::vector<double> xs(4 * in);
    for (double& v : xs) v = rng.normal();
    const Tensor x({4, in}, xs);
    std::vector<int> y(4);
    for (int& v : y) v = static_cast<int>(rng.below(cls));
    const ClassBatch batch{x, y};
    const auto masks = sample_batch_masks(p, spec, batch, s.child(1));
    EXPECT_LT(gradient_error(p, spec, batch, masks, 0.01), 1e-4) << "draw " << k;
  }
}

TEST(Backward, TwoUnitMlpMatchesFiniteDifferences) {
  const MlpParams p = init_mlp({2, 2, 2}, SplitSeed(3));
  const auto spec = rates({{"input", 0.5}, {"hidden1", 0.5}});
  const Tensor x({1, 2}, std::vector<double>{0.4, -0.9});
  const std::vector<int> y{1};
  const ClassBatch batch{x, y};
  const auto masks = sample_batch_masks(p, spec, batch, SplitSeed(4));
  EXPECT_LT(gradient_error(p, spec, batch, masks, 0.0), 1e-4);
}

class LstmGrad : public ::testing::TestWithParam<MaskSharing> {};

TEST_P(LstmGrad, MatchesFiniteDifferences) {
  for (std::uint64_t k = 0; k < 10; ++k) {
    const SplitSeed s = SplitSeed(200).child(k);
    auto rng = s.stream();
    const std::size_t V = 3 + rng.below(4), H = 2 + rng.below(3);
    const bool tied = k % 3 == 0;
    const std::size_t E = tied ? H : 2 + rng.below(3);
    const LstmParams p = init_lstm(V, E, H, tied, s.child(0));
    const auto spec = rates({{"input", 0.3}, {"hidden", 0.4}}, GetParam());
    std::vector<std::vector<int>> seqs(2);
    for (auto& q : seqs) {
      q.resize(3 + rng.below(4));
      for (int& t : q) t = static_cast<int>(rng.below(V));
    }
    const SequenceBatch batch{seqs};
    const auto masks = sample_batch_masks(p, spec, batch, s.child(1));
    EXPECT_LT(gradient_error(p, spec, batch, masks, 0.01), 1e-4) << "draw " << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Sharing, LstmGrad,
                         ::testing::Values(MaskSharing::shared_across_time, MaskSharing::per_step));

TEST(Backward, MaskedRowHasOnlyPriorGradient) {
  MlpParams p = init_mlp({3, 4, 2}, SplitSeed(10));
  const auto spec = rates({{"input", 0.5}});
  const Tensor x({1, 3}, std::vector<double>{1.0, 2.0, -1.0});
  const std::vector<int> y{1};
  auto masks = std::vector<MaskSet>{sample_masks(site_layout(p), spec, SplitSeed(1), 1, 1.0)};
  masks[0][0].bits = {1, 0, 1};  // drop input row 1
  const double wd = 0.05;
  const auto g = backward(p, spec, ClassBatch{x, y}, std::span<const MaskSet>(masks), wd);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(g.weights[0](1, c), wd * p.weights[0](1, c));
}

TEST(Backward, PriorGradientVanishesAtZero) {
  const MlpParams p = zero_mlp({2, 3, 2});
  const Tensor x({1, 2}, std::vector<double>{0.0, 0.0});
  const std::vector<int> y{0};
  const auto masks = std::vector<MaskSet>{sample_masks(site_layout(p), rates({}), SplitSeed(1), 1, 1.0)};
  // zero input and zero weights leave only the output bias gradient
  const auto g = backward(p, rates({}), ClassBatch{x, y}, std::span<const MaskSet>(masks), 0.3);
  for (double v : g.weights[0].values()) EXPECT_EQ(v, 0.0);
  for (double v : g.weights[1].values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, NegativeWeightDecayRejected) {
  const MlpParams p = zero_mlp({2, 2});
  const Tensor x({1, 2}, std::vector<double>{0.0, 0.0});
  const std::vector<int> y{0};
  const auto masks = std::vector<MaskSet>{sample_masks(site_layout(p), rates({}), SplitSeed(1), 1, 1.0)};
  EXPECT_THROW(map_loss(p, rates({}), ClassBatch{x, y}, std::span<const MaskSet>(masks), -1.0), DomainError);
}
