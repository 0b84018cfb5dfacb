#include "cccm/model.h"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kJacobianStep = 1e-6;

void check_configuration(const RobotModel& model, const Configuration& q) {
  if (q.size() != model.dof()) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "configuration has " + std::to_string(q.size()) +
                    " entries, model expects " + std::to_string(model.dof()));
  }
  if (!q.allFinite()) {
    throw Error(ErrorCode::kInvalidConfiguration,
                "configuration has non-finite entries");
  }
}

}  // namespace

RobotModel::RobotModel(std::vector<DhRow> arm_dh, Eigen::Isometry3d mount,
                       Eigen::Isometry3d tool, std::vector<JointLimit> limits)
    : arm_dh_(std::move(arm_dh)),
      mount_(mount),
      tool_(tool),
      limits_(std::move(limits)) {
  if (arm_dh_.empty()) {
    throw Error(ErrorCode::kInvalidModel, "arm must have at least one joint");
  }
  if (static_cast<int>(limits_.size()) != dof()) {
    throw Error(ErrorCode::kInvalidModel,
                "expected " + std::to_string(dof()) + " joint limits, got " +
                    std::to_string(limits_.size()));
  }
  for (std::size_t i = 0; i < limits_.size(); ++i) {
    const JointLimit& l = limits_[i];
    if (!(l.q_min < l.q_max) || !(l.qd_max > 0.0) || !(l.qdd_max > 0.0)) {
      throw Error(ErrorCode::kInvalidModel,
                  "inconsistent limits for joint " + std::to_string(i));
    }
  }
}

RobotModel RobotModel::default_model() {
  // Spherical-shoulder / spherical-wrist 7-DoF layout, modified DH.
  std::vector<DhRow> dh = {
      {0.0, 0.0, 0.30, 0.0},         {0.0, -kPi / 2, 0.0, 0.0},
      {0.0, kPi / 2, 0.35, 0.0},     {0.0, kPi / 2, 0.0, 0.0},
      {0.0, -kPi / 2, 0.35, 0.0},    {0.0, -kPi / 2, 0.0, 0.0},
      {0.0, kPi / 2, 0.126, 0.0},
  };
  Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();
  // Arm sits at the rear of the platform; the basket opens sideways off the
  // flange.
  mount.translation() = Vec3(-0.20, 0.0, 0.15);
  Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();
  tool.translation() = Vec3(0.0, 0.0, 0.10);
  tool.linear() = Eigen::AngleAxisd(-kPi / 2, Vec3::UnitY()).toRotationMatrix();

  std::vector<JointLimit> limits = {
      {-kPi, kPi, 1.5, 4.0},     // phi
      {-3.0, 3.0, 1.0, 5.0},     // d
      {-2.96, 2.96, 7.5, 20.0},  {-2.9, 2.9, 7.5, 20.0},
      {-2.96, 2.96, 8.75, 25.0}, {-2.9, 2.9, 8.75, 25.0},
      {-2.96, 2.96, 10.0, 30.0}, {-2.9, 2.9, 11.25, 30.0},
      {-3.05, 3.05, 11.25, 30.0},
  };
  return RobotModel(std::move(dh), mount, tool, std::move(limits));
}

Configuration RobotModel::default_home() {
  Configuration q(9);
  q << 0.0, 0.0, 0.0, 0.24, 0.0, -1.4, 0.0, 0.24, 0.0;
  return q;
}

VecX RobotModel::q_min() const {
  VecX v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = limits_[i].q_min;
  return v;
}

VecX RobotModel::q_max() const {
  VecX v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = limits_[i].q_max;
  return v;
}

VecX RobotModel::qd_max() const {
  VecX v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = limits_[i].qd_max;
  return v;
}

VecX RobotModel::qdd_max() const {
  VecX v(dof());
  for (int i = 0; i < dof(); ++i) v[i] = limits_[i].qdd_max;
  return v;
}

bool RobotModel::within_limits(const Configuration& q, double tol) const {
  if (q.size() != dof()) return false;
  for (int i = 0; i < dof(); ++i) {
    if (q[i] < limits_[i].q_min - tol || q[i] > limits_[i].q_max + tol) {
      return false;
    }
  }
  return true;
}

Configuration RobotModel::clamp(const Configuration& q) const {
  return q.cwiseMax(q_min()).cwiseMin(q_max());
}

Mat4 dh_transform(const DhRow& row, double q) {
  const double theta = q + row.theta_offset;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Mat4 t;
  t << ct, -st, 0.0, row.a,             //
      st * ca, ct * ca, -sa, -sa * row.d,  //
      st * sa, ct * sa, ca, ca * row.d,    //
      0.0, 0.0, 0.0, 1.0;
  return t;
}

Eigen::Isometry3d base_transform(double phi, double d) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = Eigen::AngleAxisd(phi, Vec3::UnitZ()).toRotationMatrix();
  t.translation() = Vec3(d * std::cos(phi), d * std::sin(phi), 0.0);
  return t;
}

Vec3 base_position(const Configuration& q) {
  return Vec3(q[1] * std::cos(q[0]), q[1] * std::sin(q[0]), 0.0);
}

ContainerPose forward_kinematics(const RobotModel& model,
                                 const Configuration& q) {
  check_configuration(model, q);
  Mat4 t = base_transform(q[0], q[1]).matrix() * model.mount().matrix();
  const auto& dh = model.arm_dh();
  for (int i = 0; i < model.arm_dof(); ++i) {
    t = t * dh_transform(dh[i], q[RobotModel::kBaseDof + i]);
  }
  t = t * model.tool().matrix();
  ContainerPose pose;
  pose.transform.matrix() = t;
  return pose;
}

Vec3 rotation_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Jacobian extended_jacobian(const RobotModel& model, const Configuration& q) {
  check_configuration(model, q);
  const int n = model.dof();
  Jacobian jac(6, n);
  Configuration qp = q, qm = q;
  for (int j = 0; j < n; ++j) {
    qp[j] = q[j] + kJacobianStep;
    qm[j] = q[j] - kJacobianStep;
    const ContainerPose tp = forward_kinematics(model, qp);
    const ContainerPose tm = forward_kinematics(model, qm);
    jac.block<3, 1>(0, j) =
        (tp.position() - tm.position()) / (2.0 * kJacobianStep);
    const Mat3 dr = tp.transform.linear() * tm.transform.linear().transpose();
    jac.block<3, 1>(3, j) = rotation_log(dr) / (2.0 * kJacobianStep);
    qp[j] = q[j];
    qm[j] = q[j];
  }
  return jac;
}

}  // namespace cccm
