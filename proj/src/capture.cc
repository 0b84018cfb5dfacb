#include "cccm/capture.h"

#include <cmath>
#include <optional>
#include <string>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr double kTieTol = 1e-12;

struct Candidate {
  Configuration q;
  double t = 0.0;
  double objective = 0.0;
  double base_displacement = 0.0;
};

// Lower objective wins; ties go to the later catch, then to less base motion.
bool better(const Candidate& a, const Candidate& b) {
  if (a.objective < b.objective - kTieTol) return true;
  if (a.objective > b.objective + kTieTol) return false;
  if (a.t > b.t + kTieTol) return true;
  if (a.t < b.t - kTieTol) return false;
  return a.base_displacement < b.base_displacement;
}

}  // namespace

void CapturePlannerConfig::validate() const {
  if (!(lambda_base > 0.0) || !(lambda_arm > 0.0) || !(alpha > 0.0) ||
      !(beta > 0.0)) {
    throw Error(ErrorCode::kConfigError,
                "capture weights, alpha and beta must be positive");
  }
  if (!(t_grid_step > 0.0) || !(t_min >= 0.0)) {
    throw Error(ErrorCode::kConfigError, "capture time grid is invalid");
  }
}

VecX capture_weights(const RobotModel& model, const CapturePlannerConfig& cfg) {
  VecX w = VecX::Constant(model.dof(), cfg.lambda_arm);
  w.head(RobotModel::kBaseDof).setConstant(cfg.lambda_base);
  return w;
}

double capture_objective(const RobotModel& model, const Configuration& q_ca,
                         double t_ca, const Configuration& q_0,
                         const CapturePlannerConfig& cfg) {
  const VecX w = capture_weights(model, cfg);
  const VecX dq = q_ca - q_0;
  return 0.5 * (dq.cwiseProduct(dq).dot(w) - cfg.alpha * t_ca * t_ca);
}

CaptureSolution plan_capture(const RobotModel& model,
                             const BallPrediction& prediction,
                             const Configuration& q_0,
                             const CapturePlannerConfig& cfg) {
  cfg.validate();
  if (q_0.size() != model.dof()) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "q_0 length does not match the model");
  }
  const VecX weights = capture_weights(model, cfg);
  const double horizon = prediction.horizon();

  std::optional<Candidate> best;
  std::optional<Configuration> previous;
  int candidates = 0;
  for (int k = 0;; ++k) {
    const double t = cfg.t_min + k * cfg.t_grid_step;
    if (t > horizon + 1e-9) break;
    const auto [p_hat, v_hat] = prediction.query(std::min(t, horizon));
    // The container must sit on the ball, so a ball below the floor cannot
    // satisfy the height constraint.
    if (p_hat.z() < cfg.beta - kCaptureHeightTol) {
      previous.reset();
      continue;
    }
    const double speed = v_hat.norm();
    if (speed < 1e-9) continue;
    const Vec3 axis = -v_hat / speed;

    std::optional<Configuration> next_previous;
    auto consider = [&](const Configuration& seed) {
      const PoseSolveResult res = damped_pose_solve(
          model, p_hat, axis, seed, weights, cfg.pose_solve);
      if (!res.converged) return;
      const ContainerPose pose = forward_kinematics(model, res.q);
      if (pose.height() < cfg.beta - kCaptureHeightTol) return;
      if (!model.within_limits(res.q)) return;
      ++candidates;
      Candidate cand{res.q, t, capture_objective(model, res.q, t, q_0, cfg),
                     (res.q.head(RobotModel::kBaseDof) -
                      q_0.head(RobotModel::kBaseDof))
                         .norm()};
      if (!next_previous || capture_objective(model, *next_previous, t, q_0,
                                              cfg) > cand.objective) {
        next_previous = res.q;
      }
      if (!best || better(cand, *best)) best = std::move(cand);
    };
    consider(q_0);
    if (previous) consider(*previous);
    previous = next_previous;
  }

  if (!best) {
    throw Error(ErrorCode::kNoCapturePlan,
                "no feasible capture configuration on the time grid");
  }
  return CaptureSolution{best->q, best->t, best->objective, candidates};
}

CaptureReport validate_capture(const RobotModel& model,
                               const CaptureSolution& solution,
                               const BallPrediction& prediction,
                               const CapturePlannerConfig& cfg) {
  CaptureReport report;
  const ContainerPose pose = forward_kinematics(model, solution.q_ca);
  const auto [p_hat, v_hat] = prediction.query(solution.t_ca);
  report.position_error = (pose.position() - p_hat).norm();
  const Vec3 axis = -v_hat.normalized();
  report.axis_error =
      std::atan2(pose.z_axis().cross(axis).norm(), pose.z_axis().dot(axis));
  report.height_margin = pose.height() - cfg.beta;
  const VecX below = (model.q_min() - solution.q_ca).cwiseMax(0.0);
  const VecX above = (solution.q_ca - model.q_max()).cwiseMax(0.0);
  report.limit_violation = std::max(below.maxCoeff(), above.maxCoeff());

  report.position_ok = report.position_error <= kCapturePositionTol;
  report.axis_ok = report.axis_error <= kCaptureAxisTol;
  report.height_ok = report.height_margin >= -kCaptureHeightTol;
  report.limits_ok = report.limit_violation == 0.0;
  return report;
}

}  // namespace cccm
