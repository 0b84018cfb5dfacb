#include <random>

#include <gtest/gtest.h>

#include "cccm/error.h"
#include "cccm/model.h"
#include "cccm/optim.h"
#include "qp_oracle.h"
#include "test_util.h"

namespace cccm {
namespace {

QpProblem identity_problem(int n) {
  QpProblem p;
  p.h = MatX::Identity(n, n);
  p.c = VecX::Zero(n);
  p.a_eq.resize(0, n);
  p.b_eq.resize(0);
  p.a_in.resize(0, n);
  p.b_in.resize(0);
  return p;
}

TEST(SolveQp, UnconstrainedOrigin) {
  const QpSolution s = solve_qp(identity_problem(3));
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_LT(s.x.norm(), 1e-12);
}

TEST(SolveQp, EqualityProjection) {
  QpProblem p = identity_problem(2);
  p.a_eq = MatX(1, 2);
  p.a_eq << 1, 0;
  p.b_eq = VecX::Constant(1, 1.0);
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-12);
  EXPECT_NEAR(s.x[1], 0.0, 1e-12);
}

TEST(SolveQp, HalfPlaneWithMultiplierOne) {
  QpProblem p = identity_problem(2);
  p.a_in = MatX(1, 2);
  p.a_in << 1, 1;
  p.b_in = VecX::Constant(1, 2.0);
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-10);
  EXPECT_NEAR(s.x[1], 1.0, 1e-10);
  EXPECT_NEAR(s.lambda_in[0], 1.0, 1e-10);
  EXPECT_LT(s.kkt_residual, kQpKktTol);
}

TEST(SolveQp, InconsistentEqualitiesAreInfeasible) {
  QpProblem p = identity_problem(2);
  p.a_eq = MatX(2, 2);
  p.a_eq << 1, 1, 1, 1;
  p.b_eq = Eigen::Vector2d(1.0, 2.0);
  EXPECT_EQ(solve_qp(p).status, QpStatus::kInfeasible);
}

TEST(SolveQp, ContradictoryInequalitiesAreInfeasible) {
  QpProblem p = identity_problem(1);
  p.a_in = MatX(2, 1);
  p.a_in << 1, -1;
  p.b_in = Eigen::Vector2d(1.0, 0.0);  // x >= 1 and x <= 0
  EXPECT_EQ(solve_qp(p).status, QpStatus::kInfeasible);
}

TEST(SolveQp, SingularHessianWithBoundedFeasibleSet) {
  QpProblem p = identity_problem(2);
  p.h << 1, 0, 0, 0;
  p.c << 0, 1;
  p.a_in = MatX(1, 2);
  p.a_in << 0, 1;
  p.b_in = VecX::Constant(1, -1.0);  // y >= -1
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.x[0], 0.0, 1e-8);
  EXPECT_NEAR(s.x[1], -1.0, 1e-8);
}

TEST(SolveQp, RejectsInconsistentDimensions) {
  QpProblem p = identity_problem(2);
  p.c = VecX::Zero(3);
  try {
    solve_qp(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDim);
  }
}

TEST(SolveQp, MatchesBruteForceOracle) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(1, 8);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = dim(rng);
    const int me = std::uniform_int_distribution<int>(0, std::min(2, n - 1))(rng);
    const int mi = std::uniform_int_distribution<int>(0, 7)(rng);
    const QpProblem p = testing::random_qp(rng, n, me, mi);
    const auto oracle = testing::brute_force_qp(p);
    ASSERT_TRUE(oracle.has_value());
    const QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::kOptimal) << "trial " << trial;
    EXPECT_LT((s.x - *oracle).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_LT(s.kkt_residual, kQpKktTol);
    if (mi > 0) {
      EXPECT_GE((p.a_in * s.x - p.b_in).minCoeff(), -kQpFeasibilityTol);
      EXPECT_GE(s.lambda_in.minCoeff(), -1e-10);
    }
    ++checked;
  }
  EXPECT_EQ(checked, 300);
}

class PoseSolve : public ::testing::Test {
 protected:
  RobotModel model = RobotModel::default_model();
  VecX weights = VecX::Ones(9);
};

TEST_F(PoseSolve, ZeroResidualStart) {
  const Configuration q0 = RobotModel::default_home();
  const ContainerPose pose = forward_kinematics(model, q0);
  const PoseSolveResult r =
      damped_pose_solve(model, pose.position(), pose.z_axis(), q0, weights);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_LT((r.q - q0).norm(), 1e-9);
}

TEST_F(PoseSolve, SmallPerturbationConverges) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Configuration q0 = testing::random_configuration(model, rng, 0.6);
    const ContainerPose pose = forward_kinematics(model, q0);
    const Vec3 dir = testing::random_vector(3, rng).normalized();
    const PoseSolveResult r = damped_pose_solve(
        model, pose.position() + 0.01 * dir, pose.z_axis(), q0, weights);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.residual, 1e-4);
    EXPECT_LT(pose_residual(model, r.q, pose.position() + 0.01 * dir,
                            pose.z_axis())
                  .norm(),
              1e-4);
  }
}

TEST_F(PoseSolve, UnreachableTarget) {
  const PoseSolveResult r =
      damped_pose_solve(model, Vec3(100, 0, 0), Vec3::UnitZ(),
                        RobotModel::default_home(), weights);
  EXPECT_FALSE(r.converged);
}

TEST_F(PoseSolve, IteratesStayInsideLimits) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const Vec3 target = testing::random_vector(3, rng) * 2.0;
    const Vec3 axis = testing::random_vector(3, rng).normalized();
    const PoseSolveResult r =
        damped_pose_solve(model, target, axis,
                          testing::random_configuration(model, rng), weights);
    EXPECT_TRUE(model.within_limits(r.q));
  }
}

}  // namespace
}  // namespace cccm
