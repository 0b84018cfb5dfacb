#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cccm/error.h"
#include "cccm/poc.h"
#include "test_util.h"

namespace cccm {
namespace {

VecX wide(int n, double v) { return VecX::Constant(n, v); }

Vec6 random_twist(std::mt19937_64& rng, double scale) {
  return testing::random_vector(6, rng, scale);
}

TEST(PocQp, IdentityJacobianSplitsTheCommand) {
  const Jacobian jac = MatX::Identity(6, 6);
  Vec6 psi;
  psi << 1, -2, 3, 0.5, 0, -1;
  const PocStep step = solve_poc_qp(jac, psi, {}, wide(6, -100), wide(6, 100), 1.0);
  ASSERT_FALSE(step.safety_stop);
  EXPECT_LT((step.qd - psi / 2).norm(), 1e-10);
  EXPECT_LT((step.slack + psi / 2).norm(), 1e-10);
  for (double mu : {0.1, 3.0, 1000.0}) {
    const PocStep s = solve_poc_qp(jac, psi, {}, wide(6, -100), wide(6, 100), mu);
    EXPECT_LT((s.qd - mu / (1 + mu) * psi).norm(), 1e-9);
  }
}

TEST(PocQp, MatchesClosedFormWhenNothingBinds) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const MatX jac = MatX::NullaryExpr(6, 9, [&] {
      return std::normal_distribution<double>(0, 1)(rng);
    });
    const Vec6 psi = random_twist(rng, 0.5);
    const double mu = 1000.0;
    const PocStep step = solve_poc_qp(jac, psi, {}, wide(9, -1e3), wide(9, 1e3), mu);
    const VecX expected =
        jac.transpose() *
        (jac * jac.transpose() + Mat6::Identity() / mu).ldlt().solve(psi);
    EXPECT_LT((step.qd - expected).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(PocQp, TrackingErrorShrinksAsSlackGetsDearer) {
  std::mt19937_64 rng(22);
  const MatX jac = MatX::NullaryExpr(6, 4, [&] {
    return std::normal_distribution<double>(0, 1)(rng);
  });
  const Vec6 psi = random_twist(rng, 1.0);
  double previous = std::numeric_limits<double>::infinity();
  for (double mu : {0.01, 0.1, 1.0, 10.0, 100.0, 1e4}) {
    const PocStep s = solve_poc_qp(jac, psi, {}, wide(4, -1e3), wide(4, 1e3), mu);
    const double err = (jac * s.qd - psi).norm();
    EXPECT_LE(err, previous + 1e-12);
    previous = err;
  }
}

TEST(PocQp, BarrierAtZeroBlocksDescent) {
  const Jacobian jac = MatX::Identity(6, 6);
  Vec6 psi = Vec6::Zero();
  psi[2] = -1.0;
  BarrierRow ground{VecX::Unit(6, 2), 0.0, 5.0};
  const PocStep step =
      solve_poc_qp(jac, psi, {ground}, wide(6, -100), wide(6, 100), 1000.0);
  ASSERT_FALSE(step.safety_stop);
  EXPECT_GE(step.qd[2], -1e-10);
}

TEST(PocQp, InfeasibleIsASafetyStop) {
  const Jacobian jac = MatX::Identity(6, 6);
  BarrierRow ground{VecX::Unit(6, 2), -1.0, 5.0};  // requires qd_z >= 5
  const PocStep step = solve_poc_qp(jac, Vec6::Zero(), {ground}, wide(6, -1),
                                    wide(6, 1), 1000.0);
  EXPECT_TRUE(step.safety_stop);
  EXPECT_EQ(step.qd, VecX::Zero(6));
}

class Poc : public ::testing::Test {
 protected:
  RobotModel model = RobotModel::default_model();
  Configuration home = RobotModel::default_home();
  PocConfig cfg;

  ComplianceSequence constant(const Vec6& row, int length) const {
    ComplianceSequence seq;
    seq.psi = Eigen::Matrix<double, Eigen::Dynamic, 6>(length, 6);
    for (int i = 0; i < length; ++i) seq.psi.row(i) = row.transpose();
    return seq;
  }
};

TEST_F(Poc, ZeroCommandHoldsStill) {
  const PocStep step = poc_step(model, home, Vec6::Zero(), cfg);
  EXPECT_LT(step.qd.norm(), 1e-12);
  const PocRollout r = track_sequence(model, home, constant(Vec6::Zero(), 16), cfg);
  ASSERT_EQ(r.log.size(), 18u);
  for (const PocLogEntry& e : r.log) EXPECT_LT((e.q - home).norm(), 1e-12);
}

TEST_F(Poc, FreeMotionFollowsTheCommand) {
  Vec6 psi = Vec6::Zero();
  psi[1] = 0.1;
  const PocStep step = poc_step(model, home, psi, cfg);
  const Jacobian jac = extended_jacobian(model, home);
  const VecX expected =
      jac.transpose() *
      (jac * jac.transpose() + Mat6::Identity() / cfg.slack_weight).ldlt().solve(psi);
  EXPECT_LT((step.qd - expected).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT((jac * step.qd - psi).norm(), 0.1 * psi.norm());
  EXPECT_FALSE(step.z_active);
  EXPECT_FALSE(step.xy_active);
}

TEST_F(Poc, SustainedDescentStopsAboveTheGround) {
  Vec6 psi = Vec6::Zero();
  psi[2] = -3.0;
  const PocRollout r = track_sequence(model, home, constant(psi, 16), cfg);
  double min_f = r.log.front().f;
  bool any_active = false;
  for (const PocLogEntry& e : r.log) {
    min_f = std::min(min_f, e.f);
    any_active = any_active || e.z_active;
  }
  EXPECT_GE(min_f, -1e-3);
  EXPECT_TRUE(any_active);
}

TEST_F(Poc, WithoutTheGroundBarrierDescentCrossesIt) {
  PocConfig off = cfg;
  off.enable_z_barrier = false;
  Vec6 psi = Vec6::Zero();
  psi[2] = -3.0;
  const PocRollout r = track_sequence(model, home, constant(psi, 16), off);
  EXPECT_LT(r.log.back().f, 0.0);
}

TEST_F(Poc, BarriersHoldUnderRandomCommands) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    ComplianceSequence seq;
    seq.psi = Eigen::Matrix<double, Eigen::Dynamic, 6>(16, 6);
    for (int i = 0; i < 16; ++i) seq.psi.row(i) = random_twist(rng, 3.0).transpose();
    const PocRollout r = track_sequence(model, home, seq, cfg);
    for (const PocLogEntry& e : r.log) {
      ASSERT_GE(e.f, -1e-3) << "trial " << trial;
      ASSERT_GE(e.g, -1e-3) << "trial " << trial;
      ASSERT_TRUE(model.within_limits(e.q)) << "trial " << trial;
    }
  }
}

TEST_F(Poc, RejectsBadConfigAndSequences) {
  PocConfig bad = cfg;
  bad.gamma_z = 0.6;
  EXPECT_THROW(bad.validate(), Error);
  bad = cfg;
  bad.slack_weight = 0.0;
  EXPECT_THROW(bad.validate(), Error);

  ComplianceSequence long_seq = constant(Vec6::Zero(), 17);
  try {
    track_sequence(model, home, long_seq, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDim);
  }
  ComplianceSequence nan_seq = constant(Vec6::Zero(), 4);
  nan_seq.psi(2, 3) = std::nan("");
  EXPECT_THROW(track_sequence(model, home, nan_seq, cfg), Error);
}

TEST_F(Poc, RolloutCsv) {
  const PocRollout r = track_sequence(model, home, constant(Vec6::Zero(), 2), cfg);
  std::ostringstream out;
  r.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}

}  // namespace
}  // namespace cccm
