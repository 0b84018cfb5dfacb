#ifndef CCCM_PRC_H_
#define CCCM_PRC_H_

#include <iosfwd>

#include "cccm/model.h"

namespace cccm {

struct PrcConfig {
  double lambda = 1.5;  // planning-time inflation, must exceed 1

  void validate() const;
};

inline constexpr double kPrcMinDuration = 1e-3;

// Bang-coast-bang duration for a single joint:
//   2 sqrt(dq / a)                          if dq < 2 dq_acc
//   2 v/a + (dq - a (v/a)^2) / v            otherwise
// with dq_acc = a (v/a)^2 / 2.
double min_time(double dq, double qd_max, double qdd_max);

struct JointSample {
  VecX q;
  VecX qd;
  VecX qdd;
  bool clamped = false;
};

// Per-joint q(t) = q_0 + dq (10 s^3 - 15 s^4 + 6 s^5), s = t / T.
class QuinticTrajectory {
 public:
  QuinticTrajectory(Configuration q_0, Configuration q_ca, double duration);

  const Configuration& q_0() const { return q_0_; }
  const Configuration& q_ca() const { return q_ca_; }
  double duration() const { return duration_; }
  // Row i: polynomial coefficients c_0..c_5 of joint i in normalized time.
  const Eigen::Matrix<double, Eigen::Dynamic, 6>& coefficients() const {
    return coeffs_;
  }

  // Times outside [0, duration] are clamped and flagged.
  JointSample sample(double t) const;

  // Peak |qd| and |qdd| of each joint over the whole trajectory.
  VecX peak_velocity() const;
  VecX peak_acceleration() const;

  // Rows of t, q..., qd... at the given rate.
  void write_csv(std::ostream& out, double rate_hz) const;

 private:
  Configuration q_0_;
  Configuration q_ca_;
  double duration_;
  Eigen::Matrix<double, Eigen::Dynamic, 6> coeffs_;
};

inline constexpr double kQuinticPeakVelocity = 1.875;              // 15/8
inline constexpr double kQuinticPeakAcceleration = 5.773502691896258;  // 10/sqrt(3)

// T = lambda * max_i min_time(|dq_i|); re-inflated by 1.1 until every joint
// respects its velocity and acceleration limits. Identical endpoints give
// a trajectory of duration kPrcMinDuration.
QuinticTrajectory plan_prc(const RobotModel& model, const Configuration& q_0,
                           const Configuration& q_ca, const PrcConfig& cfg);

}  // namespace cccm

#endif  // CCCM_PRC_H_
