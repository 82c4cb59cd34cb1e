#include <gtest/gtest.h>

#include <cmath>

#include "fcucr/distill.hpp"
#include "fcucr/errors.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fcucr {
namespace {

using testing::make_fixture;

SharedParams scalar_encoder(double b_h) {
  SharedParams p;
  p.embedding = Matrix::Zero(1, 1);
  p.w_z = p.u_z = p.w_r = p.u_r = p.w_h = p.u_h = Matrix::Zero(1, 1);
  p.b_z = Vector::Zero(1);
  p.b_r = Vector::Zero(1);
  p.b_h = Vector::Constant(1, b_h);
  return p;
}

TEST(DistLoss, ZeroWhenEncoderMatchesSnapshot) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto f = make_fixture(seed);
    const EncoderSnapshot snap = snapshot(f.shared, 1);
    const auto r = dist_loss(f.shared, &snap, f.session.items);
    EXPECT_EQ(r.loss, 0.0);
    for (auto span : flat_arrays(r.grad))
      for (double g : span) EXPECT_EQ(g, 0.0);
  }
}

TEST(DistLoss, ScalarHandCase) {
  // One zero-embedded item with z = 1/2 gives h_1 = tanh(b_h) / 2.
  const EncoderSnapshot snap(scalar_encoder(std::atanh(0.2)), 1);
  const std::vector<ItemId> items{0};
  const auto r = dist_loss(scalar_encoder(std::atanh(0.6)), &snap, items);
  EXPECT_NEAR(r.loss, 0.04, 1e-15);
}

TEST(DistLoss, TermsOnHandBuiltTraces) {
  EncoderTrace a, b;
  a.items = b.items = {0, 0};
  a.h = {Vector::Zero(2), Vector::Constant(2, 0.3), (Vector(2) << 0.5, -0.5).finished()};
  b.h = {Vector::Zero(2), Vector::Constant(2, 0.1), (Vector(2) << 0.5, 0.5).finished()};
  const auto all = distill_terms(a, b, DistillTarget::kAllPositions);
  EXPECT_NEAR(all.loss, (0.04 + 0.04 + 0.0 + 1.0) / 4.0, 1e-15);
  ASSERT_EQ(all.dh.size(), 2u);
  EXPECT_NEAR(all.dh[1][1], 2.0 * -1.0 / 4.0, 1e-15);
  const auto last = distill_terms(a, b, DistillTarget::kPrototype);
  EXPECT_NEAR(last.loss, 0.5, 1e-15);
  EXPECT_EQ(last.dh[0].squaredNorm(), 0.0);
}

TEST(DistLoss, MatchesScalarMse) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto f = make_fixture(seed);
    const EncoderSnapshot snap(f.previous, 1);
    const auto got = dist_loss(f.shared, &snap, f.session.items).loss;
    const auto want = oracle::mse(oracle::encode(f.shared, f.session.items), oracle::encode(f.previous, f.session.items));
    EXPECT_NEAR(got, static_cast<double>(want), 1e-14);
  }
}

TEST(DistLoss, GradientMatchesFiniteDifferences) {
  for (auto target : {DistillTarget::kAllPositions, DistillTarget::kPrototype}) {
    auto f = make_fixture(12);
    const EncoderSnapshot snap(f.previous, 1);
    const auto r = dist_loss(f.shared, &snap, f.session.items, target);
    auto loss = [&]() -> oracle::Real {
      const auto cur = oracle::encode(f.shared, f.session.items);
      const auto old = oracle::encode(f.previous, f.session.items);
      if (target == DistillTarget::kAllPositions) return oracle::mse(cur, old);
      return oracle::mse({cur.back()}, {old.back()});
    };
    EXPECT_LT(oracle::check_gradients(f.shared, r.grad, loss).max_rel_error, 1e-4);
  }
}

TEST(DistLoss, SymmetricInValue) {
  auto f = make_fixture(13);
  const EncoderSnapshot a(f.shared, 1), b(f.previous, 1);
  EXPECT_DOUBLE_EQ(dist_loss(f.previous, &a, f.session.items).loss, dist_loss(f.shared, &b, f.session.items).loss);
}

TEST(DistLoss, MissingSnapshotIsProtocolError) {
  auto f = make_fixture(14);
  EXPECT_THROW(dist_loss(f.shared, nullptr, f.session.items), ProtocolError);
}

TEST(DistLoss, CountsInvocations) {
  auto f = make_fixture(15);
  const EncoderSnapshot snap(f.previous, 1);
  const auto before = dist_loss_invocations();
  dist_loss(f.shared, &snap, f.session.items);
  dist_loss(f.shared, &snap, f.session.items);
  EXPECT_EQ(dist_loss_invocations() - before, 2u);
}

TEST(Snapshot, IsADeepCopy) {
  auto f = make_fixture(16);
  const EncoderSnapshot snap = snapshot(f.shared, 3);
  const SharedParams original = f.shared;
  f.shared.w_h(0, 0) += 1.0;
  f.shared.embedding.setZero();
  EXPECT_TRUE(snap.params() == original);
  EXPECT_EQ(snap.step(), 3);
}

TEST(Snapshot, StepMustBePositive) {
  auto f = make_fixture(17);
  EXPECT_THROW(snapshot(f.shared, 0), ProtocolError);
}

}  // namespace
}  // namespace fcucr
