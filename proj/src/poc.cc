#include "cccm/poc.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr double kActiveTol = 1e-9;

Eigen::Matrix<double, 1, Eigen::Dynamic> base_xy_gradient(
    const Jacobian& jac, const ContainerPose& pose, const Configuration& q) {
  const Vec3 base = base_position(q);
  Eigen::Vector2d offset = (pose.position() - base).head<2>();
  const double dist = offset.norm();
  const Eigen::Vector2d n =
      dist > 1e-12 ? Eigen::Vector2d(offset / dist) : Eigen::Vector2d::UnitX();
  Eigen::Matrix<double, 1, Eigen::Dynamic> row =
      n.x() * jac.row(0) + n.y() * jac.row(1);
  // Base origin moves with (phi, d): d/dphi = d(-sin, cos), d/dd = (cos, sin).
  const double phi = q[0], d = q[1];
  row[0] -= n.x() * (-d * std::sin(phi)) + n.y() * (d * std::cos(phi));
  row[1] -= n.x() * std::cos(phi) + n.y() * std::sin(phi);
  return row;
}

}  // namespace

void PocConfig::validate() const {
  if (!(gamma_z > 0.0) || !(gamma_xy > 0.0) || !(slack_weight > 0.0)) {
    throw Error(ErrorCode::kConfigError,
                "POC gammas and slack weight must be positive");
  }
  if (gamma_z > 0.5 || gamma_xy > 0.5) {
    throw Error(ErrorCode::kConfigError,
                "POC barrier decay per tick must not exceed 0.5");
  }
  if (!(tick > 0.0)) {
    throw Error(ErrorCode::kConfigError, "POC tick must be positive");
  }
}

void ComplianceSequence::validate() const {
  if (psi.rows() < 1 || psi.rows() > kMaxSequenceLength) {
    throw Error(ErrorCode::kInvalidDim,
                "compliance sequence must have 1..16 rows");
  }
  if (!psi.allFinite()) {
    throw Error(ErrorCode::kInvalidDim, "compliance sequence is not finite");
  }
}

double ground_barrier(const ContainerPose& pose, const PocConfig& cfg) {
  return pose.height() - cfg.z_safe;
}

double base_barrier(const ContainerPose& pose, const Configuration& q,
                    const PocConfig& cfg) {
  return (pose.position() - base_position(q)).head<2>().norm() - cfg.r_safe;
}

PocStep solve_poc_qp(const Jacobian& jac, const Vec6& psi_i,
                     const std::vector<BarrierRow>& barriers,
                     const VecX& qd_lower, const VecX& qd_upper,
                     double slack_weight) {
  const int n = static_cast<int>(jac.cols());
  const int nv = n + 6;
  const int nb = static_cast<int>(barriers.size());

  QpProblem qp;
  qp.h = MatX::Identity(nv, nv);
  qp.h.bottomRightCorner(6, 6) *= slack_weight;
  qp.c = VecX::Zero(nv);
  qp.a_eq = MatX::Zero(6, nv);
  qp.a_eq.leftCols(n) = jac;
  qp.a_eq.rightCols(6) = -Mat6::Identity();
  qp.b_eq = psi_i;

  qp.a_in = MatX::Zero(nb + 2 * n, nv);
  qp.b_in = VecX::Zero(nb + 2 * n);
  for (int k = 0; k < nb; ++k) {
    qp.a_in.row(k).head(n) = barriers[k].gradient.transpose();
    qp.b_in[k] = -barriers[k].rate * barriers[k].value;
  }
  for (int i = 0; i < n; ++i) {
    qp.a_in(nb + 2 * i, i) = 1.0;
    qp.b_in[nb + 2 * i] = qd_lower[i];
    qp.a_in(nb + 2 * i + 1, i) = -1.0;
    qp.b_in[nb + 2 * i + 1] = -qd_upper[i];
  }

  const QpSolution sol = solve_qp(qp);
  PocStep step;
  step.status = sol.status;
  if (sol.status != QpStatus::kOptimal) {
    step.qd = VecX::Zero(n);
    step.safety_stop = true;
    return step;
  }
  step.qd = sol.x.head(n);
  step.slack = sol.x.tail<6>();
  return step;
}

PocStep poc_step(const RobotModel& model, const Configuration& q,
                 const Vec6& psi_i, const PocConfig& cfg) {
  const ContainerPose pose = forward_kinematics(model, q);
  const Jacobian jac = extended_jacobian(model, q);
  const int n = model.dof();

  std::vector<BarrierRow> barriers;
  int z_row = -1, xy_row = -1;
  if (cfg.enable_z_barrier) {
    z_row = static_cast<int>(barriers.size());
    barriers.push_back({jac.row(2).transpose(), ground_barrier(pose, cfg),
                        cfg.gamma_z / cfg.tick});
  }
  if (cfg.enable_xy_barrier) {
    xy_row = static_cast<int>(barriers.size());
    barriers.push_back({base_xy_gradient(jac, pose, q).transpose(),
                        base_barrier(pose, q, cfg), cfg.gamma_xy / cfg.tick});
  }

  VecX lower(n), upper(n);
  for (int i = 0; i < n; ++i) {
    const JointLimit& l = model.limits()[i];
    lower[i] = std::min(0.0, std::max(-l.qd_max, (l.q_min - q[i]) / cfg.tick));
    upper[i] = std::max(0.0, std::min(l.qd_max, (l.q_max - q[i]) / cfg.tick));
  }

  PocStep step =
      solve_poc_qp(jac, psi_i, barriers, lower, upper, cfg.slack_weight);
  if (step.safety_stop) return step;
  auto binding = [&](int row) {
    const BarrierRow& b = barriers[row];
    return b.gradient.dot(step.qd) + b.rate * b.value <= kActiveTol;
  };
  if (z_row >= 0) step.z_active = binding(z_row);
  if (xy_row >= 0) step.xy_active = binding(xy_row);
  return step;
}

void PocRollout::write_csv(std::ostream& out) const {
  if (log.empty()) return;
  const int n = static_cast<int>(log.front().q.size());
  out << "t";
  for (int i = 0; i < n; ++i) out << ",q" << i;
  for (int i = 0; i < n; ++i) out << ",qd" << i;
  out << ",slack_norm,f,g,z_active,xy_active\n";
  for (const PocLogEntry& e : log) {
    out << e.t;
    for (int i = 0; i < n; ++i) out << "," << e.q[i];
    for (int i = 0; i < n; ++i) out << "," << e.qd[i];
    out << "," << e.slack_norm << "," << e.f << "," << e.g << ","
        << int(e.z_active) << "," << int(e.xy_active) << "\n";
  }
}

PocRollout track_sequence(const RobotModel& model, const Configuration& q_ca,
                          const ComplianceSequence& psi, const PocConfig& cfg) {
  cfg.validate();
  psi.validate();
  PocRollout rollout;
  Configuration q = q_ca;
  ContainerPose pose = forward_kinematics(model, q);

  PocLogEntry first;
  first.q = q;
  first.qd = VecX::Zero(model.dof());
  first.f = ground_barrier(pose, cfg);
  first.g = base_barrier(pose, q, cfg);
  rollout.log.push_back(first);

  for (int i = 0; i < psi.length(); ++i) {
    const Vec6 row = psi.psi.row(i).transpose();
    const PocStep step = poc_step(model, q, row, cfg);
    if (step.safety_stop) {
      rollout.safety_stop = true;
      break;
    }
    const double f0 = ground_barrier(pose, cfg);
    const double g0 = base_barrier(pose, q, cfg);
    // Integrated step must keep h >= (1 - 2 gamma) h0.
    auto barrier_floor = [](double h0, double gamma) {
      return h0 >= 0.0 ? std::max(0.0, 1.0 - 2.0 * gamma) * h0 : h0;
    };

    double scale = 1.0;
    Configuration q_next = q + cfg.tick * step.qd;
    ContainerPose next_pose = forward_kinematics(model, q_next);
    for (int b = 0; b < cfg.max_backtracks; ++b) {
      const bool z_ok = !cfg.enable_z_barrier ||
                        ground_barrier(next_pose, cfg) >=
                            barrier_floor(f0, cfg.gamma_z);
      const bool xy_ok = !cfg.enable_xy_barrier ||
                         base_barrier(next_pose, q_next, cfg) >=
                             barrier_floor(g0, cfg.gamma_xy);
      if (z_ok && xy_ok) break;
      scale *= 0.8;
      if (b + 1 == cfg.max_backtracks) scale = 0.0;
      q_next = q + cfg.tick * scale * step.qd;
      next_pose = forward_kinematics(model, q_next);
    }

    const VecX qd = scale * step.qd;
    PocLogEntry e;
    e.t = (i + 1) * cfg.tick;
    e.qd = qd;
    e.twist = extended_jacobian(model, q) * qd;
    e.slack_norm = step.slack.norm();
    e.z_active = step.z_active;
    e.xy_active = step.xy_active;
    e.step_scale = scale;
    q = q_next;
    pose = next_pose;
    e.q = q;
    e.f = ground_barrier(pose, cfg);
    e.g = base_barrier(pose, q, cfg);
    rollout.log.push_back(e);
  }

  PocLogEntry rest = rollout.log.back();
  rest.t += cfg.tick;
  rest.qd = VecX::Zero(model.dof());
  rest.twist = Vec6::Zero();
  rest.slack_norm = 0.0;
  rest.z_active = rest.xy_active = false;
  rest.step_scale = 1.0;
  rollout.log.push_back(rest);
  return rollout;
}

}  // namespace cccm
