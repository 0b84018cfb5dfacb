#ifndef CCCM_OPTIM_H_
#define CCCM_OPTIM_H_

#include "cccm/model.h"

namespace cccm {

// min 1/2 x^T H x + c^T x  s.t.  A_eq x = b_eq,  A_in x >= b_in.
struct QpProblem {
  MatX h;
  VecX c;
  MatX a_eq;
  VecX b_eq;
  MatX a_in;
  VecX b_in;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(b_eq.size()); }
  int num_in() const { return static_cast<int>(b_in.size()); }
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIter, kUnbounded };

struct QpSolution {
  VecX x;
  VecX lambda_eq;
  VecX lambda_in;  // >= 0 at optimality
  QpStatus status = QpStatus::kMaxIter;
  double kkt_residual = 0.0;
  int iterations = 0;
};

inline constexpr double kQpFeasibilityTol = 1e-8;
inline constexpr double kQpKktTol = 1e-6;
inline constexpr int kQpMaxProblemSize = 32;

const char* qp_status_name(QpStatus status);

// Dense dual active-set solver (Goldfarb-Idnani) for small problems. A
// singular PSD Hessian is handled with proximal-point outer iterations.
// Throws Error(kInvalidDim) when dimensions are inconsistent or exceed the
// small-problem bounds.
QpSolution solve_qp(const QpProblem& problem, int max_iter = 200);

// Max of stationarity, primal violation and complementarity residuals.
double qp_kkt_residual(const QpProblem& problem, const VecX& x,
                       const VecX& lambda_eq, const VecX& lambda_in);

struct PoseSolveOptions {
  int max_iterations = 100;
  double tolerance = 1e-4;
  double initial_damping = 1e-3;
};

struct PoseSolveResult {
  Configuration q;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

// 5-d pose residual: container position error and the 2-d tangent-plane
// (log-map) error between the container z-axis and the unit target axis.
Eigen::Matrix<double, 5, 1> pose_residual(const RobotModel& model,
                                          const Configuration& q,
                                          const Vec3& target_p,
                                          const Vec3& target_axis);

// Levenberg-Marquardt on pose_residual with damping weighted by `weights`
// (one per joint). Iterates are clamped to joint limits. target_axis is the
// desired container z-axis; the capture planner passes -v/|v|.
PoseSolveResult damped_pose_solve(const RobotModel& model,
                                  const Vec3& target_p,
                                  const Vec3& target_axis,
                                  const Configuration& q_seed,
                                  const VecX& weights,
                                  const PoseSolveOptions& options = {});

}  // namespace cccm

#endif  // CCCM_OPTIM_H_
