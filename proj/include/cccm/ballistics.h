#ifndef CCCM_BALLISTICS_H_
#define CCCM_BALLISTICS_H_

#include <span>
#include <utility>
#include <vector>

#include "cccm/model.h"

namespace cccm {

inline constexpr double kGravity = 9.81;
inline constexpr double kDefaultDragCoefficient = 0.0295;  // 1/m

struct BallState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double t = 0.0;
};

// Filtered (p, v) with covariance; mean is stacked [p; v].
struct BallBelief {
  Vec6 mean = Vec6::Zero();
  Mat6 cov = Mat6::Zero();
  double t = 0.0;

  Vec3 position() const { return mean.head<3>(); }
  Vec3 velocity() const { return mean.tail<3>(); }
};

struct TimedPosition {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
};

// -g - k_ad |v| v, with g = (0, 0, 9.81).
Vec3 ball_accel(const Vec3& v, double k_ad);

// Single RK4 step. Throws Error(kInvalidStep) unless 0 < dt <= 0.01.
BallState integrate(const BallState& state, double dt, double k_ad);

// Drag acceleration Jacobian d(ball_accel)/dv; zero at v = 0.
Mat3 drag_jacobian(const Vec3& v, double k_ad);

// Transition Jacobian of the one-step discrete map used by ekf_predict.
Mat6 transition_jacobian(const Vec6& mean, double dt, double k_ad);

// Mean follows the explicit one-step map
//   a = -g - k|v|v,  v+ = v + dt a,  p+ = p + dt v + dt^2 a / 2
// and the covariance is F P F^T + Q.
BallBelief ekf_predict(const BallBelief& belief, double dt, double k_ad,
                       const Mat6& process_noise);

// Position-only correction (H = [I 0]). Throws Error(kNumericalFailure)
// when the innovation covariance cannot be factored.
BallBelief ekf_update(const BallBelief& belief, const Vec3& z,
                      const Mat3& measurement_noise);

struct DragEstimateOptions {
  // Half-width of the local quadratic fit used to difference noisy
  // positions, in seconds. Rounded to samples and capped so at least two
  // windows fit in the track.
  double smoothing_half_window = 0.1;
  double initial_covariance = 1e4;
};

// Offline drag identification: scalar recursive least squares on
//   a + g = -k_ad |v| v
// with v, a from symmetric differencing of the (locally smoothed) track.
// Throws Error(kEstimationFailure) for short, irregular or near-rest data.
double estimate_drag(std::span<const TimedPosition> samples,
                     const DragEstimateOptions& options = {});

struct TrackFilterConfig {
  double k_ad = kDefaultDragCoefficient;
  double process_noise_pos = 1e-6;  // m^2 per filter step
  double process_noise_vel = 1e-4;  // m^2/s^2 per filter step
  double measurement_sigma = 0.005;  // m
  double initial_velocity_sigma = 10.0;  // m/s
};

// EKF over a position track. The first fix seeds the position with zero
// velocity and a wide velocity prior; every later fix is a predict/update
// pair. Throws Error(kEstimationFailure) for an empty track or
// non-increasing times.
BallBelief filter_track(std::span<const TimedPosition> track,
                        const TrackFilterConfig& cfg);

struct PredictionKnot {
  double t = 0.0;  // relative to the prediction start
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

// RK4 knot grid from a belief mean; queried with cubic Hermite segments.
// Immutable after construction.
class BallPrediction {
 public:
  BallPrediction(std::vector<PredictionKnot> knots, double k_ad,
                 double start_time);

  const std::vector<PredictionKnot>& knots() const { return knots_; }
  double k_ad() const { return k_ad_; }
  double horizon() const { return knots_.back().t; }
  double step() const { return step_; }
  // Absolute time of the first knot.
  double start_time() const { return start_time_; }

  // t relative to the prediction start. Throws Error(kOutOfHorizon) outside
  // [0, horizon].
  std::pair<Vec3, Vec3> query(double t) const;

 private:
  std::vector<PredictionKnot> knots_;
  double k_ad_;
  double start_time_;
  double step_;
};

// Throws Error(kInvalidStep) for horizon > 3 s or dt outside (0, 0.01].
BallPrediction predict(const BallBelief& belief, double horizon, double dt,
                       double k_ad);

}  // namespace cccm

#endif  // CCCM_BALLISTICS_H_
