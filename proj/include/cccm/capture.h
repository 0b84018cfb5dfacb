#ifndef CCCM_CAPTURE_H_
#define CCCM_CAPTURE_H_

#include "cccm/ballistics.h"
#include "cccm/model.h"
#include "cccm/optim.h"

namespace cccm {

struct CapturePlannerConfig {
  double lambda_base = 5.0;  // joint-motion weight, base virtual joints
  double lambda_arm = 1.0;   // joint-motion weight, arm joints
  double alpha = 2.0;        // late-catch reward
  double beta = 0.5;         // container height floor, m
  double t_grid_step = 0.02;
  double t_min = 0.1;
  PoseSolveOptions pose_solve;

  // Throws Error(kConfigError) on non-positive weights or grid.
  void validate() const;
};

struct CaptureSolution {
  Configuration q_ca;
  double t_ca = 0.0;  // relative to the prediction start
  double objective = 0.0;
  int candidate_count = 0;
};

// Diagonal weights: lambda_base for the base joints, lambda_arm for the arm.
VecX capture_weights(const RobotModel& model, const CapturePlannerConfig& cfg);

// 1/2 (sum_i w_i (q_i - q0_i)^2 - alpha t^2).
double capture_objective(const RobotModel& model, const Configuration& q_ca,
                         double t_ca, const Configuration& q_0,
                         const CapturePlannerConfig& cfg);

// Grid over t in [t_min, horizon]; at each time a damped pose solve seeded
// at q_0 and at the previous grid point's solution. Throws
// Error(kNoCapturePlan) if no candidate is feasible.
CaptureSolution plan_capture(const RobotModel& model,
                             const BallPrediction& prediction,
                             const Configuration& q_0,
                             const CapturePlannerConfig& cfg);

struct CaptureReport {
  double position_error = 0.0;  // |P(q_ca) - p_hat(t_ca)|, m
  double axis_error = 0.0;      // angle between z(q_ca) and -v_hat, rad
  double height_margin = 0.0;   // z(q_ca) - beta, m
  double limit_violation = 0.0; // worst excursion outside joint limits
  bool position_ok = false;
  bool axis_ok = false;
  bool height_ok = false;
  bool limits_ok = false;

  bool ok() const { return position_ok && axis_ok && height_ok && limits_ok; }
};

inline constexpr double kCapturePositionTol = 1e-3;
inline constexpr double kCaptureAxisTol = 1e-2;
inline constexpr double kCaptureHeightTol = 1e-6;

CaptureReport validate_capture(const RobotModel& model,
                               const CaptureSolution& solution,
                               const BallPrediction& prediction,
                               const CapturePlannerConfig& cfg);

}  // namespace cccm

#endif  // CCCM_CAPTURE_H_
