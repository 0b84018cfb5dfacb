#include "cccm/prc.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cccm/error.h"

namespace cccm {

void PrcConfig::validate() const {
  if (!(lambda > 1.0)) {
    throw Error(ErrorCode::kConfigError, "PRC lambda must exceed 1");
  }
}

double min_time(double dq, double qd_max, double qdd_max) {
  if (dq <= 0.0) return 0.0;
  const double t_acc = qd_max / qdd_max;
  const double dq_acc = 0.5 * qdd_max * t_acc * t_acc;
  if (dq < 2.0 * dq_acc) return 2.0 * std::sqrt(dq / qdd_max);
  return 2.0 * t_acc + (dq - qdd_max * t_acc * t_acc) / qd_max;
}

QuinticTrajectory::QuinticTrajectory(Configuration q_0, Configuration q_ca,
                                     double duration)
    : q_0_(std::move(q_0)), q_ca_(std::move(q_ca)), duration_(duration) {
  if (q_0_.size() != q_ca_.size()) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "quintic endpoints differ in length");
  }
  if (!(duration_ > 0.0)) {
    throw Error(ErrorCode::kInvalidStep, "quintic duration must be positive");
  }
  const int n = static_cast<int>(q_0_.size());
  coeffs_.setZero(n, 6);
  const VecX dq = q_ca_ - q_0_;
  coeffs_.col(0) = q_0_;
  coeffs_.col(3) = 10.0 * dq;
  coeffs_.col(4) = -15.0 * dq;
  coeffs_.col(5) = 6.0 * dq;
}

JointSample QuinticTrajectory::sample(double t) const {
  JointSample out;
  double tc = t;
  if (t < 0.0 || t > duration_) {
    out.clamped = true;
    tc = std::clamp(t, 0.0, duration_);
  }
  const int n = static_cast<int>(q_0_.size());
  out.q.resize(n);
  out.qd.resize(n);
  out.qdd.resize(n);
  const double s = tc / duration_;
  for (int i = 0; i < n; ++i) {
    const auto c = coeffs_.row(i);
    // Horner in normalized time; chain rule for the time derivatives.
    out.q[i] =
        c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * (c[4] + s * c[5]))));
    const double dp =
        c[1] + s * (2 * c[2] + s * (3 * c[3] + s * (4 * c[4] + s * 5 * c[5])));
    const double ddp = 2 * c[2] + s * (6 * c[3] + s * (12 * c[4] + s * 20 * c[5]));
    out.qd[i] = dp / duration_;
    out.qdd[i] = ddp / (duration_ * duration_);
  }
  if (!out.clamped && t == duration_) out.q = q_ca_;
  return out;
}

VecX QuinticTrajectory::peak_velocity() const {
  return kQuinticPeakVelocity * (q_ca_ - q_0_).cwiseAbs() / duration_;
}

VecX QuinticTrajectory::peak_acceleration() const {
  return kQuinticPeakAcceleration * (q_ca_ - q_0_).cwiseAbs() /
         (duration_ * duration_);
}

void QuinticTrajectory::write_csv(std::ostream& out, double rate_hz) const {
  const int n = static_cast<int>(q_0_.size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",q" << i;
  for (int i = 0; i < n; ++i) out << ",qd" << i;
  out << "\n";
  const int steps = static_cast<int>(std::ceil(duration_ * rate_hz - 1e-9));
  for (int k = 0; k <= steps; ++k) {
    const double t = std::min(k / rate_hz, duration_);
    const JointSample s = sample(t);
    out << t;
    for (int i = 0; i < n; ++i) out << "," << s.q[i];
    for (int i = 0; i < n; ++i) out << "," << s.qd[i];
    out << "\n";
  }
}

QuinticTrajectory plan_prc(const RobotModel& model, const Configuration& q_0,
                           const Configuration& q_ca, const PrcConfig& cfg) {
  cfg.validate();
  if (q_0.size() != model.dof() || q_ca.size() != model.dof()) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "PRC endpoints do not match the model");
  }
  const VecX dq = (q_ca - q_0).cwiseAbs();
  double t_max = 0.0;
  for (int i = 0; i < model.dof(); ++i) {
    const JointLimit& l = model.limits()[i];
    t_max = std::max(t_max, min_time(dq[i], l.qd_max, l.qdd_max));
  }
  double duration = cfg.lambda * t_max;
  if (duration < kPrcMinDuration) duration = kPrcMinDuration;

  const VecX vmax = model.qd_max();
  const VecX amax = model.qdd_max();
  auto within = [&](double t) {
    const VecX v = kQuinticPeakVelocity * dq / t;
    const VecX a = kQuinticPeakAcceleration * dq / (t * t);
    return (v.array() <= vmax.array()).all() &&
           (a.array() <= amax.array()).all();
  };
  while (!within(duration)) duration *= 1.1;
  return QuinticTrajectory(q_0, q_ca, duration);
}

}  // namespace cccm
