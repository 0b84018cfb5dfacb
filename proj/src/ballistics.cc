#include "cccm/ballistics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr double kMaxStep = 0.01;
constexpr double kMaxHorizon = 3.0;
constexpr double kTimeTol = 1e-12;

const Vec3 kGravityVec(0.0, 0.0, kGravity);

struct Derivative {
  Vec3 dp;
  Vec3 dv;
};

Derivative flow(const Vec3& v, double k_ad) { return {v, ball_accel(v, k_ad)}; }

}  // namespace

Vec3 ball_accel(const Vec3& v, double k_ad) {
  return -kGravityVec - k_ad * v.norm() * v;
}

BallState integrate(const BallState& s, double dt, double k_ad) {
  if (!(dt > 0.0) || dt > kMaxStep) {
    throw Error(ErrorCode::kInvalidStep,
                "integration step must lie in (0, 0.01] s, got " +
                    std::to_string(dt));
  }
  const Derivative k1 = flow(s.v, k_ad);
  const Derivative k2 = flow(s.v + 0.5 * dt * k1.dv, k_ad);
  const Derivative k3 = flow(s.v + 0.5 * dt * k2.dv, k_ad);
  const Derivative k4 = flow(s.v + dt * k3.dv, k_ad);
  BallState out;
  out.p = s.p + dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.v = s.v + dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.t = s.t + dt;
  return out;
}

Mat3 drag_jacobian(const Vec3& v, double k_ad) {
  const double speed = v.norm();
  if (speed == 0.0) return Mat3::Zero();
  return -k_ad * (speed * Mat3::Identity() + v * v.transpose() / speed);
}

Mat6 transition_jacobian(const Vec6& mean, double dt, double k_ad) {
  const Mat3 da_dv = drag_jacobian(mean.tail<3>(), k_ad);
  Mat6 f = Mat6::Identity();
  f.block<3, 3>(0, 3) = dt * Mat3::Identity() + 0.5 * dt * dt * da_dv;
  f.block<3, 3>(3, 3) = Mat3::Identity() + dt * da_dv;
  return f;
}

BallBelief ekf_predict(const BallBelief& belief, double dt, double k_ad,
                       const Mat6& process_noise) {
  const Vec3 p = belief.position();
  const Vec3 v = belief.velocity();
  const Vec3 a = ball_accel(v, k_ad);
  BallBelief out;
  out.mean.head<3>() = p + dt * v + 0.5 * dt * dt * a;
  out.mean.tail<3>() = v + dt * a;
  const Mat6 f = transition_jacobian(belief.mean, dt, k_ad);
  out.cov = f * belief.cov * f.transpose() + process_noise;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  out.t = belief.t + dt;
  return out;
}

BallBelief ekf_update(const BallBelief& belief, const Vec3& z,
                      const Mat3& measurement_noise) {
  Eigen::Matrix<double, 3, 6> h = Eigen::Matrix<double, 3, 6>::Zero();
  h.leftCols<3>().setIdentity();
  const Mat3 s = h * belief.cov * h.transpose() + measurement_noise;
  const Eigen::LLT<Mat3> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) {
    throw Error(ErrorCode::kNumericalFailure,
                "innovation covariance is not positive definite");
  }
  // K = P H^T S^-1
  const Eigen::Matrix<double, 6, 3> gain =
      llt.solve(h * belief.cov).transpose();
  BallBelief out;
  out.t = belief.t;
  out.mean = belief.mean + gain * (z - belief.position());
  // Joseph form: equal to (I - KH) P for this gain, and stays PSD.
  const Mat6 ikh = Mat6::Identity() - gain * h;
  out.cov = ikh * belief.cov * ikh.transpose() +
            gain * measurement_noise * gain.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

BallBelief filter_track(std::span<const TimedPosition> track,
                        const TrackFilterConfig& cfg) {
  if (track.empty()) {
    throw Error(ErrorCode::kEstimationFailure, "empty position track");
  }
  Mat6 q_noise = Mat6::Zero();
  q_noise.topLeftCorner<3, 3>() = cfg.process_noise_pos * Mat3::Identity();
  q_noise.bottomRightCorner<3, 3>() = cfg.process_noise_vel * Mat3::Identity();
  const Mat3 r_noise =
      cfg.measurement_sigma * cfg.measurement_sigma * Mat3::Identity();

  BallBelief belief;
  belief.mean << track[0].p, Vec3::Zero();
  belief.cov.topLeftCorner<3, 3>() = r_noise;
  belief.cov.bottomRightCorner<3, 3>() = cfg.initial_velocity_sigma *
                                         cfg.initial_velocity_sigma *
                                         Mat3::Identity();
  belief.t = track[0].t;
  for (std::size_t k = 1; k < track.size(); ++k) {
    const double dt = track[k].t - track[k - 1].t;
    if (!(dt > 0.0)) {
      throw Error(ErrorCode::kEstimationFailure,
                  "track times must be strictly increasing (sample " +
                      std::to_string(k) + ")");
    }
    belief = ekf_predict(belief, dt, cfg.k_ad, q_noise);
    belief.t = track[k].t;
    belief = ekf_update(belief, track[k].p, r_noise);
  }
  return belief;
}

double estimate_drag(std::span<const TimedPosition> samples,
                     const DragEstimateOptions& options) {
  const int n = static_cast<int>(samples.size());
  if (n < 20) {
    throw Error(ErrorCode::kEstimationFailure,
                "drag estimation needs at least 20 samples, got " +
                    std::to_string(n));
  }
  const double h = (samples.back().t - samples.front().t) / (n - 1);
  if (!(h > 0.0)) {
    throw Error(ErrorCode::kEstimationFailure, "sample times must increase");
  }
  for (int k = 1; k < n; ++k) {
    const double step = samples[k].t - samples[k - 1].t;
    if (std::abs(step - h) > 1e-6 * std::max(1.0, h) + 1e-3 * h) {
      throw Error(ErrorCode::kEstimationFailure,
                  "samples are not uniformly timed at index " +
                      std::to_string(k));
    }
  }

  int half = static_cast<int>(std::lround(options.smoothing_half_window / h));
  half = std::clamp(half, 1, std::max(1, (n - 1) / 4));

  // Local quadratic fit on the symmetric window [k - half, k + half]: for
  // symmetric offsets the velocity and acceleration estimates decouple,
  //   v = sum(j y_j) / (h sum j^2),
  //   a = 2 (sum(j^2 y_j) - S2/W sum y_j) / (h^2 (S4 - S2^2/W)).
  // With half = 1 these are the plain central differences.
  double s2 = 0.0, s4 = 0.0;
  for (int j = -half; j <= half; ++j) {
    s2 += double(j) * j;
    s4 += double(j) * j * j * j;
  }
  const double w = 2.0 * half + 1.0;

  double theta = 0.0;
  double cov = options.initial_covariance;
  double excitation = 0.0;
  for (int k = half; k < n - half; ++k) {
    Vec3 m1 = Vec3::Zero(), m2 = Vec3::Zero(), m0 = Vec3::Zero();
    for (int j = -half; j <= half; ++j) {
      const Vec3& y = samples[k + j].p;
      m0 += y;
      m1 += double(j) * y;
      m2 += double(j) * j * y;
    }
    const Vec3 v = m1 / (h * s2);
    const Vec3 a = 2.0 * (m2 - s2 / w * m0) / (h * h * (s4 - s2 * s2 / w));
    const Vec3 regressor = -v.norm() * v;
    const Vec3 target = a + kGravityVec;
    for (int axis = 0; axis < 3; ++axis) {
      const double phi = regressor[axis];
      const double gain = cov * phi / (1.0 + phi * cov * phi);
      theta += gain * (target[axis] - phi * theta);
      cov = (1.0 - gain * phi) * cov;
      excitation += phi * phi;
    }
  }
  if (excitation < 1e-3 || !std::isfinite(theta)) {
    throw Error(ErrorCode::kEstimationFailure,
                "trajectory has too little velocity to identify drag");
  }
  return theta;
}

BallPrediction::BallPrediction(std::vector<PredictionKnot> knots, double k_ad,
                               double start_time)
    : knots_(std::move(knots)), k_ad_(k_ad), start_time_(start_time) {
  if (knots_.size() < 2) {
    throw Error(ErrorCode::kInvalidStep, "prediction needs at least 2 knots");
  }
  step_ = knots_[1].t - knots_[0].t;
}

std::pair<Vec3, Vec3> BallPrediction::query(double t) const {
  if (!(t >= -kTimeTol) || t > horizon() + kTimeTol) {
    throw Error(ErrorCode::kOutOfHorizon,
                "query time " + std::to_string(t) + " outside [0, " +
                    std::to_string(horizon()) + "]");
  }
  const int last = static_cast<int>(knots_.size()) - 1;
  int k = static_cast<int>(std::floor(t / step_));
  k = std::clamp(k, 0, last - 1);
  const PredictionKnot& k0 = knots_[k];
  const PredictionKnot& k1 = knots_[k + 1];
  const double h = k1.t - k0.t;
  const double s = std::clamp((t - k0.t) / h, 0.0, 1.0);
  if (s == 0.0) return {k0.p, k0.v};
  if (s == 1.0) return {k1.p, k1.v};

  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  const Vec3 p = h00 * k0.p + h10 * h * k0.v + h01 * k1.p + h11 * h * k1.v;

  const double d00 = 6 * s2 - 6 * s;
  const double d10 = 3 * s2 - 4 * s + 1;
  const double d01 = -6 * s2 + 6 * s;
  const double d11 = 3 * s2 - 2 * s;
  const Vec3 v = (d00 * k0.p + d01 * k1.p) / h + d10 * k0.v + d11 * k1.v;
  return {p, v};
}

BallPrediction predict(const BallBelief& belief, double horizon, double dt,
                       double k_ad) {
  if (!(horizon > 0.0) || horizon > kMaxHorizon) {
    throw Error(ErrorCode::kInvalidStep,
                "prediction horizon must lie in (0, 3] s");
  }
  const int steps = static_cast<int>(std::lround(horizon / dt));
  std::vector<PredictionKnot> knots;
  knots.reserve(steps + 1);
  BallState s{belief.position(), belief.velocity(), 0.0};
  knots.push_back({0.0, s.p, s.v});
  for (int k = 1; k <= steps; ++k) {
    s = integrate(s, dt, k_ad);
    knots.push_back({k * dt, s.p, s.v});
  }
  return BallPrediction(std::move(knots), k_ad, belief.t);
}

}  // namespace cccm
