#ifndef CCCM_POC_H_
#define CCCM_POC_H_

#include <iosfwd>
#include <vector>

#include "cccm/model.h"
#include "cccm/optim.h"

namespace cccm {

inline constexpr int kMaxSequenceLength = 16;

struct PocConfig {
  double gamma_z = 0.1;   // ground barrier decay per tick
  double gamma_xy = 0.1;  // base barrier decay per tick
  double z_safe = 0.2;    // m
  double r_safe = 0.3;    // m
  double slack_weight = 1000.0;
  double tick = 0.02;     // s
  bool enable_z_barrier = true;
  bool enable_xy_barrier = true;
  // Backtracking on the integrated state so barriers hold after the Euler
  // step, not only to first order.
  int max_backtracks = 30;

  void validate() const;
};

// L x 6 container twist commands (v, w), one row per tick.
struct ComplianceSequence {
  Eigen::Matrix<double, Eigen::Dynamic, 6> psi;
  double rate_hz = 50.0;

  int length() const { return static_cast<int>(psi.rows()); }
  // Throws Error(kInvalidDim) if empty, longer than 16 rows or non-finite.
  void validate() const;
};

// Ground barrier f = z_c - z_safe.
double ground_barrier(const ContainerPose& pose, const PocConfig& cfg);
// Base barrier g = |(x_c, y_c) - (x_b, y_b)| - r_safe.
double base_barrier(const ContainerPose& pose, const Configuration& q,
                    const PocConfig& cfg);

struct PocStep {
  VecX qd;
  Vec6 slack = Vec6::Zero();
  bool z_active = false;   // barrier row binding at the solution
  bool xy_active = false;
  bool safety_stop = false;
  QpStatus status = QpStatus::kOptimal;
};

// Per-tick QP over (qd, slack):
//   min 1/2 (|qd|^2 + mu |slack|^2)
//   s.t. J qd = psi_i + slack
//        J_z qd >= -(gamma_z / tick) f
//        n_xy . (J_xy - J_base) qd >= -(gamma_xy / tick) g
//        joint velocity boxes, tightened so q + tick qd stays in limits.
// An infeasible QP gives a safety stop with qd = 0.
PocStep poc_step(const RobotModel& model, const Configuration& q,
                 const Vec6& psi_i, const PocConfig& cfg);

// Same QP for an explicit Jacobian and barrier values; poc_step builds its
// inputs from the model. Exposed for fixtures with synthetic Jacobians.
struct BarrierRow {
  VecX gradient;  // d(barrier)/dq
  double value = 0.0;
  double rate = 0.0;  // gamma / tick
};
PocStep solve_poc_qp(const Jacobian& jac, const Vec6& psi_i,
                     const std::vector<BarrierRow>& barriers,
                     const VecX& qd_lower, const VecX& qd_upper,
                     double slack_weight);

struct PocLogEntry {
  double t = 0.0;
  Configuration q;
  VecX qd;
  Vec6 twist = Vec6::Zero();  // realized container twist J qd
  double slack_norm = 0.0;
  double f = 0.0;
  double g = 0.0;
  bool z_active = false;
  bool xy_active = false;
  double step_scale = 1.0;
};

struct PocRollout {
  std::vector<PocLogEntry> log;  // log[0] is the catch state
  bool safety_stop = false;

  void write_csv(std::ostream& out) const;
};

// Runs poc_step over every row of psi, Euler-integrating q. The final entry
// is the resting state after the sequence ends (qd = 0).
PocRollout track_sequence(const RobotModel& model, const Configuration& q_ca,
                          const ComplianceSequence& psi, const PocConfig& cfg);

}  // namespace cccm

#endif  // CCCM_POC_H_
