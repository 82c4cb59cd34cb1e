#include <gtest/gtest.h>

#include <cmath>

#include "fcucr/errors.hpp"
#include "fcucr/objective.hpp"
#include "fcucr/seqrec.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fcucr {
namespace {

using testing::make_fixture;

SharedParams zero_shared(int catalog, int d) {
  auto p = init_params(ModelShape{catalog, d, d}, 1).shared;
  SharedParams::visit(p, [](std::string_view, auto& a) { a.setZero(); });
  return p;
}

// ---------------------------------------------------------------------------
// encode_session

TEST(EncodeSession, ZeroWeightsGiveZeroStates) {
  const SharedParams p = zero_shared(10, 4);
  const std::vector<ItemId> items{1, 5, 7, 2};
  const EncoderTrace tr = encode_session(p, items);
  ASSERT_EQ(tr.h.size(), 5u);
  for (const auto& h : tr.h) EXPECT_EQ(h.squaredNorm(), 0.0);
  for (const auto& z : tr.z) EXPECT_TRUE(z.isApproxToConstant(0.5));
}

TEST(EncodeSession, SingleStepMatchesScalarTranscription) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto f = make_fixture(seed);
    const std::vector<ItemId> items{f.session.items[0]};
    const Vector h = session_prototype(f.shared, items);
    const auto expect = oracle::gru_step(f.shared, oracle::embedding_row(f.shared, items[0]),
                                         oracle::Vec(8, 0.0));
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(h[i], expect[static_cast<std::size_t>(i)], 1e-14);
  }
}

TEST(EncodeSession, FullSessionMatchesScalarTranscription) {
  auto f = make_fixture(11);
  const EncoderTrace tr = encode_session(f.shared, f.session.items);
  const auto expect = oracle::encode(f.shared, f.session.items);
  for (std::size_t j = 0; j < expect.size(); ++j)
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(tr.state(j + 1)[i], expect[j][static_cast<std::size_t>(i)], 1e-13);
}

TEST(EncodeSession, RepeatedItemConvergesToFixedPoint) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto init = init_params(ModelShape{30, 8, 8}, seed);
    const std::vector<ItemId> items(25, 4);
    const EncoderTrace tr = encode_session(init.shared, items);
    double prev = (tr.state(4) - tr.state(3)).norm();
    for (std::size_t j = 4; j < items.size(); ++j) {
      const double step = (tr.state(j + 1) - tr.state(j)).norm();
      EXPECT_LE(step, prev) << "seed " << seed << " position " << j;
      prev = step;
    }
    EXPECT_LT(prev, 1e-4);
  }
}

TEST(EncodeSession, OutOfRangeItemNamesPosition) {
  const auto init = init_params(ModelShape{5, 4, 4}, 3);
  const std::vector<ItemId> items{0, 1, 9};
  try {
    encode_session(init.shared, items);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("position 2"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// score_items

TEST(ScoreItems, ZeroInputWeightsIgnoreHiddenState) {
  auto f = make_fixture(2, 4, 6, 10);
  f.head.w1.setZero();
  f.head.b1 = Vector::LinSpaced(6, -1.0, 1.0);
  const Vector rho = Vector::Zero(4);
  const Vector q_expected = f.head.w2 * f.head.b1.array().tanh().matrix() + f.head.b2;
  for (int trial = 0; trial < 3; ++trial) {
    const Vector h = Vector::Random(4);
    EXPECT_TRUE(head_query(f.head, h, rho).isApprox(q_expected, 1e-15));
  }
}

TEST(ScoreItems, UniformScalingKeepsArgmax) {
  auto f = make_fixture(3, 4, 4, 10);
  const std::vector<ItemId> cands{0, 3, 5, 8};
  const Vector h = Vector::Random(4);
  const auto base = score_items(f.head, h, f.rho, f.shared.embedding, cands);
  const Matrix scaled = f.shared.embedding * 2.5;
  const auto s2 = score_items(f.head, h, f.rho, scaled, cands);
  for (std::size_t i = 0; i < cands.size(); ++i) EXPECT_NEAR(s2[i], 2.5 * base[i], 1e-12);
  EXPECT_EQ(std::max_element(base.begin(), base.end()) - base.begin(),
            std::max_element(s2.begin(), s2.end()) - s2.begin());
}

TEST(ScoreItems, MatchesScalarOracle) {
  auto f = make_fixture(4, 4, 5, 12);
  const std::vector<ItemId> cands{1, 6, 11};
  const Vector h = Vector::Random(4);
  const auto got = score_items(f.head, h, f.rho, f.shared.embedding, cands);
  const auto q = oracle::query(f.head, oracle::to_vec(h), oracle::to_vec(f.rho));
  for (std::size_t i = 0; i < cands.size(); ++i) EXPECT_NEAR(got[i], oracle::score(f.shared, q, cands[i]), 1e-12);
}

// ---------------------------------------------------------------------------
// rec_loss

TEST(RecLoss, AllZeroScoresGiveLn2) {
  auto f = make_fixture(5, 4, 4, 20, 4, 3);
  f.head.w2.setZero();
  f.head.b2.setZero();
  EXPECT_NEAR(rec_loss(f.shared, f.head, f.session, f.rho, f.negatives), std::log(2.0), 1e-15);
}

TEST(RecLoss, SeparatedScoresDriveLossToZero) {
  // Embeddings: the positive targets align with b2, negatives anti-align.
  auto f = make_fixture(6, 4, 4, 20, 3, 2);
  f.head.w2.setZero();
  f.head.b2 = Vector::Constant(4, 1.0);
  f.shared.embedding.setConstant(-50.0);
  for (std::size_t j = 1; j < f.session.size(); ++j) f.shared.embedding.row(f.session.items[j]).setConstant(50.0);
  EXPECT_LT(rec_loss(f.shared, f.head, f.session, f.rho, f.negatives), 1e-50);
}

TEST(RecLoss, MatchesScalarBce) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto f = make_fixture(seed, 4, 4, 15, 3, 2);
    const double got = rec_loss(f.shared, f.head, f.session, f.rho, f.negatives);
    const double want = oracle::bce_loss(f.shared, f.head, f.session.items, oracle::to_vec(f.rho), f.negatives);
    EXPECT_NEAR(got, want, 1e-10);
  }
}

TEST(SampleNegatives, DistinctAndOutsideSession) {
  Session s{0, 1, {0, 1, 2, 3, 4}};
  Rng rng(9);
  const NegativeSet negs = sample_negatives(s, 12, 4, rng);
  ASSERT_EQ(negs.size(), 4u);
  for (const auto& row : negs) {
    ASSERT_EQ(row.size(), 4u);
    std::set<ItemId> uniq(row.begin(), row.end());
    EXPECT_EQ(uniq.size(), 4u);
    for (ItemId i : row) EXPECT_GE(i, 5);
  }
}

TEST(SampleNegatives, CatalogTooSmallIsAnError) {
  Session s{0, 1, {0, 1, 2}};
  Rng rng(1);
  EXPECT_THROW(sample_negatives(s, 4, 2, rng), DataError);
  EXPECT_NO_THROW(sample_negatives(s, 5, 2, rng));
}

// ---------------------------------------------------------------------------
// backward

TEST(Backward, LambdaZeroEqualsRecommendationOnly) {
  auto f = make_fixture(7);
  const EncoderSnapshot prev(f.previous, 1);
  const auto with_snapshot = backward(f.shared, f.head, f.session, f.rho, f.negatives, 0.0, &prev);
  const auto without = backward(f.shared, f.head, f.session, f.rho, f.negatives, 0.0, nullptr);
  EXPECT_TRUE(with_snapshot.grads.shared == without.grads.shared);
  EXPECT_TRUE(with_snapshot.grads.head == without.grads.head);
  EXPECT_EQ(with_snapshot.loss.dist_loss, 0.0);
  EXPECT_EQ(with_snapshot.loss.total, without.loss.rec_loss);
}

TEST(Backward, HeadBiasGradientClosedForm) {
  // Zero head => q = 0, every score 0, sigmoid 0.5.
  auto f = make_fixture(8, 4, 4, 12, 3, 2);
  PrivateParams::visit(f.head, [](std::string_view, auto& a) { a.setZero(); });
  const auto res = backward(f.shared, f.head, f.session, f.rho, f.negatives, 0.0, nullptr);
  // Two positions, S = 2: d/db2 = 1/2 * sum_j 1/3 * [(0.5-1) E[pos_j] + 0.5 E[n1] + 0.5 E[n2]].
  Vector expect = Vector::Zero(4);
  for (std::size_t j = 0; j < 2; ++j) {
    Vector term = -0.5 * f.shared.embedding.row(f.session.items[j + 1]).transpose();
    for (ItemId n : f.negatives[j]) term += 0.5 * f.shared.embedding.row(n).transpose();
    expect += term / 3.0;
  }
  expect /= 2.0;
  EXPECT_TRUE(res.grads.head.b2.isApprox(expect, 1e-13));
  EXPECT_DOUBLE_EQ(res.loss.rec_loss, std::log(2.0));
}

TEST(Backward, FiniteDifferencesAllParameters) {
  for (double lambda : {0.0, 10.0}) {
    for (std::uint64_t seed = 20; seed < 23; ++seed) {
      auto f = make_fixture(seed);
      const EncoderSnapshot prev(f.previous, 1);
      const auto res = backward(f.shared, f.head, f.session, f.rho, f.negatives, lambda, &prev);
      const auto rho = oracle::to_vec(f.rho);
      auto loss = [&] {
        return oracle::objective(f.shared, f.head, f.session.items, rho, f.negatives, lambda, &f.previous);
      };
      const auto shared_check = oracle::check_gradients(f.shared, res.grads.shared, loss);
      const auto head_check = oracle::check_gradients(f.head, res.grads.head, loss);
      EXPECT_LT(shared_check.max_rel_error, 1e-4) << "lambda " << lambda << " seed " << seed;
      EXPECT_LT(head_check.max_rel_error, 1e-4) << "lambda " << lambda << " seed " << seed;
    }
  }
}

TEST(Backward, LossAdditivity) {
  for (std::uint64_t seed = 30; seed < 35; ++seed) {
    auto f = make_fixture(seed);
    const EncoderSnapshot prev(f.previous, 1);
    const auto base = backward(f.shared, f.head, f.session, f.rho, f.negatives, 0.0, &prev);
    for (double lambda : {0.5, 10.0, 50.0}) {
      const auto res = backward(f.shared, f.head, f.session, f.rho, f.negatives, lambda, &prev);
      EXPECT_NEAR(res.loss.total - base.loss.total, lambda * res.loss.dist_loss,
                  1e-12 * std::max(1.0, std::abs(res.loss.total)));
      EXPECT_NEAR(res.loss.total, res.loss.rec_loss + lambda * res.loss.dist_loss, 1e-12 * res.loss.total);
    }
  }
}

TEST(Backward, Deterministic) {
  auto f = make_fixture(40);
  const EncoderSnapshot prev(f.previous, 1);
  const auto a = backward(f.shared, f.head, f.session, f.rho, f.negatives, 10.0, &prev);
  const auto b = backward(f.shared, f.head, f.session, f.rho, f.negatives, 10.0, &prev);
  EXPECT_TRUE(a.grads.shared == b.grads.shared);
  EXPECT_TRUE(a.grads.head == b.grads.head);
  EXPECT_EQ(a.loss.total, b.loss.total);
}

TEST(Backward, NonFiniteInputIsNumericalError) {
  auto f = make_fixture(41);
  f.head.b2[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(backward(f.shared, f.head, f.session, f.rho, f.negatives, 0.0, nullptr), NumericalError);
}

// ---------------------------------------------------------------------------
// adam

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto f = make_fixture(50);
  const PrivateParams before = f.head;
  const PrivateParams zero = PrivateParams::zeros_like(f.head);
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(f.head, zero, state, AdamConfig{0.1});
  EXPECT_TRUE(f.head == before);
  for (const auto& m : state.m)
    for (double x : m) EXPECT_EQ(x, 0.0);
  for (const auto& v : state.v)
    for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(Adam, ConstantGradientStepTendsToLearningRate) {
  std::vector<double> p{0.0, 0.0, 0.0};
  const std::vector<double> g{0.3, -2.0, 1e-3};
  std::vector<std::span<double>> ps{std::span<double>(p)};
  std::vector<std::span<const double>> gs{std::span<const double>(g)};
  AdamState state;
  const double lr = 0.01;
  std::vector<double> before = p;
  for (int i = 0; i < 1000; ++i) {
    before = p;
    adam_step(std::span<const std::span<double>>(ps), std::span<const std::span<const double>>(gs), state,
              AdamConfig{lr});
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_NEAR(std::abs(p[i] - before[i]), lr, 0.01 * lr);
  }
}

TEST(Adam, FirstStepMatchesScalarTranscription) {
  const std::vector<double> g{0.5, -1e-3, 4.0, 0.0};
  std::vector<double> p{1.0, 2.0, 3.0, 4.0};
  const std::vector<double> p0 = p;
  std::vector<std::span<double>> ps{std::span<double>(p)};
  std::vector<std::span<const double>> gs{std::span<const double>(g)};
  AdamState state;
  const AdamConfig cfg{0.1};
  adam_step(std::span<const std::span<double>>(ps), std::span<const std::span<const double>>(gs), state, cfg);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (1 - cfg.beta1) * g[i], v = (1 - cfg.beta2) * g[i] * g[i];
    const double mhat = m / (1 - cfg.beta1), vhat = v / (1 - cfg.beta2);
    EXPECT_NEAR(p[i], p0[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps), 1e-12);
  }
}

// ---------------------------------------------------------------------------
// init

TEST(InitParams, SameSeedSameParameters) {
  const auto a = init_params(ModelShape{40, 6, 5}, 77);
  const auto b = init_params(ModelShape{40, 6, 5}, 77);
  const auto c = init_params(ModelShape{40, 6, 5}, 78);
  EXPECT_TRUE(a.shared == b.shared);
  EXPECT_TRUE(a.head == b.head);
  EXPECT_FALSE(a.shared == c.shared);
}

TEST(InitParams, BiasesAreZero) {
  const auto p = init_params(ModelShape{10, 6, 5}, 1);
  EXPECT_EQ(p.shared.b_z.squaredNorm() + p.shared.b_r.squaredNorm() + p.shared.b_h.squaredNorm(), 0.0);
  EXPECT_EQ(p.head.b1.squaredNorm() + p.head.b2.squaredNorm(), 0.0);
  EXPECT_EQ(p.head.w1.cols(), 12);
}

TEST(InitParams, EntriesInsideOpenInterval) {
  const auto p = init_params(ModelShape{6250, 16, 2}, 5);
  ASSERT_GE(p.shared.embedding.size(), 100000);
  EXPECT_LT(p.shared.embedding.maxCoeff(), 0.1);
  EXPECT_GT(p.shared.embedding.minCoeff(), -0.1);
  // The sample should actually fill the range.
  EXPECT_GT(p.shared.embedding.maxCoeff(), 0.0999);
  EXPECT_LT(p.shared.embedding.minCoeff(), -0.0999);
}

TEST(InitParams, RejectsTinyDimensions) {
  EXPECT_THROW(init_params(ModelShape{10, 1, 4}, 1), ConfigError);
}

}  // namespace
}  // namespace fcucr
