#ifndef CCCM_SIM_H_
#define CCCM_SIM_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cccm/ballistics.h"
#include "cccm/capture.h"
#include "cccm/model.h"
#include "cccm/plstm.h"
#include "cccm/poc.h"
#include "cccm/prc.h"

namespace cccm {

enum class TrialMode { kFull, kNoZCbf, kNoXyCbf, kRigidHold };
enum class OutcomeClass { kSuccess, kGroundCrash, kBaseCrash, kNotCatch };

const char* trial_mode_name(TrialMode mode);
TrialMode parse_trial_mode(const std::string& name);  // full|no-z|no-xy|rigid
const char* outcome_name(OutcomeClass cls);

// Where throws start and which region they must cross.
struct SamplingConfig {
  double cylinder_radius = 3.0;  // m, centred on the robot's base
  double cylinder_radius_min = 1.5;
  double z_min = 1.0;
  double z_max = 2.0;
  // Throwers stand within this angle of the robot's front (+x).
  double azimuth_half_width = 1.5707963267948966;
  Vec3 capture_center = Vec3(0.448, 0.0, 0.697);  // container at home
  double capture_radius = 0.30;
  double pass_time_min = 0.5;  // s, region crossed only after this
  double flight_time_min = 0.6;
  double flight_time_max = 1.0;
  double max_speed = 15.0;
  // Share of throws that stress the post-catch barriers. Half are steep,
  // late throws aimed low in the region (ground barrier); half come fast
  // and flat from the front, heading at the base (base barrier).
  double adversarial_fraction = 0.0;
  Vec3 steep_aim_center = Vec3(0.448, 0.0, 0.497);
  double steep_aim_radius = 0.10;
  double steep_flight_time_min = 1.0;
  double steep_flight_time_max = 1.2;
  Vec3 flat_aim_center = Vec3(0.148, 0.0, 0.697);
  double flat_aim_radius = 0.10;
  double flat_flight_time_min = 0.7;
  double flat_flight_time_max = 0.8;
  double flat_azimuth = 0.35;  // rad either side of the robot's front
};

struct SimConfig {
  double k_ad = kDefaultDragCoefficient;
  double truth_dt = 0.001;
  double measurement_rate = 200.0;  // Hz
  double measurement_sigma = 0.002;  // m
  double process_noise_pos = 1e-6;   // m^2 per filter step
  double process_noise_vel = 1e-4;   // m^2/s^2 per filter step
  double initial_velocity_sigma = 10.0;  // m/s
  double horizon = 1.5;
  double observation_window = 0.1;  // s, copied into sampled trials
  double control_rate = 100.0;      // Hz
  double prediction_dt = 0.005;
  double aperture_radius = 0.08;
  double alignment_max_deg = 30.0;
  double ball_mass = 0.057;  // kg
  double ground_margin = 0.05;
  double collision_radius = 0.15;
  double net_depth = 0.0;  // ball offset along -z of the container
  double nominal_tau = 0.2;  // cushioning constant for the untrained policy
  Configuration home = RobotModel::default_home();
  CapturePlannerConfig capture;
  PrcConfig prc;
  PocConfig poc;
  SamplingConfig sampling;
};

struct TrialSpec {
  Vec6 ball = Vec6::Zero();  // p_x, p_y, p_z, v_x, v_y, v_z at t = 0
  std::uint64_t seed = 0;    // measurement noise
  double observation_window = 0.1;
  double control_rate = 100.0;
  bool adversarial = false;
};

// Maps the predicted catch state (p, pdot) to a compliance sequence.
class CompliancePolicy {
 public:
  static CompliancePolicy network(PlstmParams params,
                                  PlstmOptions options = {});
  // Noise-free exponential decay with the given constant.
  static CompliancePolicy nominal(double tau, const DemoConfig& demo = {});

  ComplianceSequence operator()(const Vec3& p, const Vec3& pdot) const;

 private:
  std::optional<PlstmParams> params_;
  PlstmOptions options_;
  double tau_ = 0.2;
  DemoConfig demo_;
};

struct TrialLog {
  double t_observe = 0.0;  // absolute time planning happened
  double t_catch = 0.0;    // absolute catch time
  double t_prc = 0.0;
  Configuration q_ca;
  bool catch_tested = false;   // the robot reached q_ca; fields below set
  Vec3 ball_p = Vec3::Zero();  // truth at catch
  Vec3 ball_v = Vec3::Zero();
  Vec3 predicted_p = Vec3::Zero();
  Vec3 predicted_v = Vec3::Zero();
  double alignment_deg = 0.0;
  std::vector<double> ball_speed;  // attached ball speed per POC tick
  PocRollout rollout;
  std::string reason;
};

struct TrialOutcome {
  OutcomeClass cls = OutcomeClass::kNotCatch;
  std::optional<double> catch_error;  // set only for kSuccess
  double impact_proxy = 0.0;          // kg m / s^2
  bool safety_stop = false;
  TrialLog log;
};

// Everything up to and including the catch test; shared by all modes.
struct PreCatch {
  bool caught = false;
  TrialLog log;
  double catch_error = 0.0;
};

PreCatch run_precatch(const RobotModel& model, const TrialSpec& spec,
                      const SimConfig& cfg);
TrialOutcome run_postcatch(const RobotModel& model, const PreCatch& pre,
                           const CompliancePolicy& policy, TrialMode mode,
                           const SimConfig& cfg);
TrialOutcome run_trial(const RobotModel& model, const TrialSpec& spec,
                       const CompliancePolicy& policy, TrialMode mode,
                       const SimConfig& cfg);

// Ground-truth ball state at absolute time t (RK4 at truth_dt).
BallState propagate_ball(const BallState& start, double t, double dt,
                         double k_ad);

// Rejection sampling of throws. Throws Error(kSamplingExhausted) after
// 100 n proposals.
std::vector<TrialSpec> sample_trials(int n, std::uint64_t seed,
                                     const SimConfig& cfg);

struct ImpactStats {
  int count = 0;
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
};

struct MonteCarloReport {
  TrialMode mode = TrialMode::kFull;
  std::uint64_t seed = 0;
  int n = 0;
  int counts[4] = {0, 0, 0, 0};  // indexed by OutcomeClass
  ImpactStats impact;
  std::vector<TrialOutcome> trials;

  double rate(OutcomeClass cls) const {
    return n > 0 ? double(counts[static_cast<int>(cls)]) / n : 0.0;
  }
};

MonteCarloReport monte_carlo(const RobotModel& model, int n,
                             std::uint64_t seed, TrialMode mode,
                             const CompliancePolicy& policy,
                             const SimConfig& cfg);

struct AblationReport {
  std::vector<MonteCarloReport> modes;  // full, no-z, no-xy, rigid
  int shared_successes = 0;             // successful in both full and rigid
  int full_lower_impact = 0;            // of those, full < rigid
  double median_reduction = 0.0;        // 1 - full/rigid, median over pairs
};

// All four modes on one shared set of throws; the pre-catch phase is run
// once per throw.
AblationReport ablate(const RobotModel& model, int n, std::uint64_t seed,
                      const CompliancePolicy& policy, const SimConfig& cfg);

ImpactStats impact_stats(std::vector<double> values);

}  // namespace cccm

#endif  // CCCM_SIM_H_
