#ifndef CCCM_MODEL_H_
#define CCCM_MODEL_H_

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace cccm {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

// Joint vector: (phi, d) base virtual joints followed by the arm joints.
using Configuration = Eigen::VectorXd;

// Modified (Craig) DH row: Rx(alpha) Tx(a) Rz(theta + theta_offset) Tz(d).
struct DhRow {
  double a = 0.0;
  double alpha = 0.0;
  double d = 0.0;
  double theta_offset = 0.0;
};

struct JointLimit {
  double q_min = 0.0;
  double q_max = 0.0;
  double qd_max = 0.0;
  double qdd_max = 0.0;
};

enum class BaseKind { kPolarVirtual };

class RobotModel {
 public:
  static constexpr int kBaseDof = 2;

  // Throws Error(kInvalidModel) when limits are inconsistent with the chain.
  RobotModel(std::vector<DhRow> arm_dh, Eigen::Isometry3d mount,
             Eigen::Isometry3d tool, std::vector<JointLimit> limits);

  // Generic 7-DoF arm on a polar-virtual-joint base.
  static RobotModel default_model();

  // Home pose used as q_0 by the simulator: container in front of the base
  // at about 0.7 m, opening tilted slightly towards +x.
  static Configuration default_home();

  BaseKind base_kind() const { return BaseKind::kPolarVirtual; }
  int dof() const { return kBaseDof + arm_dof(); }
  int arm_dof() const { return static_cast<int>(arm_dh_.size()); }

  const std::vector<DhRow>& arm_dh() const { return arm_dh_; }
  const Eigen::Isometry3d& mount() const { return mount_; }
  const Eigen::Isometry3d& tool() const { return tool_; }
  const std::vector<JointLimit>& limits() const { return limits_; }

  VecX q_min() const;
  VecX q_max() const;
  VecX qd_max() const;
  VecX qdd_max() const;

  bool within_limits(const Configuration& q, double tol = 0.0) const;
  Configuration clamp(const Configuration& q) const;

 private:
  std::vector<DhRow> arm_dh_;
  Eigen::Isometry3d mount_;
  Eigen::Isometry3d tool_;
  std::vector<JointLimit> limits_;
};

struct ContainerPose {
  Eigen::Isometry3d transform = Eigen::Isometry3d::Identity();

  Vec3 position() const { return transform.translation(); }
  Vec3 z_axis() const { return transform.linear().col(2); }
  double height() const { return transform.translation().z(); }
};

Mat4 dh_transform(const DhRow& row, double q);

// World pose of the mobile base frame for virtual joints (phi, d).
Eigen::Isometry3d base_transform(double phi, double d);

// Planar base origin (d cos phi, d sin phi, 0).
Vec3 base_position(const Configuration& q);

// Throws Error(kInvalidConfiguration) on a length mismatch or non-finite q.
ContainerPose forward_kinematics(const RobotModel& model,
                                 const Configuration& q);

// Rows: (v_x, v_y, v_z, w_x, w_y, w_z), world frame, container origin.
// Central differences with h = 1e-6; angular rows use the rotation log of
// R(q + h e_j) R(q - h e_j)^T.
Jacobian extended_jacobian(const RobotModel& model, const Configuration& q);

// Rotation-vector log map, used for angular differencing.
Vec3 rotation_log(const Mat3& r);

}  // namespace cccm

#endif  // CCCM_MODEL_H_
