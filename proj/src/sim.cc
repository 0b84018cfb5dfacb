#include "cccm/sim.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 point_in_ball(std::mt19937_64& rng, const Vec3& center, double radius) {
  for (;;) {
    Vec3 u;
    for (int i = 0; i < 3; ++i) u[i] = uniform(rng, -1.0, 1.0);
    if (u.squaredNorm() <= 1.0) return center + radius * u;
  }
}

// Launch velocity that reaches `aim` after `flight` seconds under drag.
// Starts from the drag-free solution and corrects the miss; the miss is
// nearly linear in v with slope ~flight.
Vec3 shoot(const Vec3& from, const Vec3& aim, double flight, double k_ad,
           double dt) {
  Vec3 v = (aim - from) / flight + Vec3(0.0, 0.0, 0.5 * kGravity * flight);
  for (int it = 0; it < 8; ++it) {
    const BallState end = propagate_ball({from, v, 0.0}, flight, dt, k_ad);
    const Vec3 miss = end.p - aim;
    if (miss.norm() < 1e-6) break;
    v -= miss / flight;
  }
  return v;
}

bool passes_region(const BallState& start, const Vec3& center, double radius,
                   double t_min, double t_max, double dt, double k_ad) {
  BallState s = propagate_ball(start, t_min, dt, k_ad);
  while (s.t <= t_max) {
    if ((s.p - center).norm() <= radius) return true;
    if (s.p.z() < 0.0) return false;
    s = integrate(s, dt, k_ad);
  }
  return false;
}

}  // namespace

const char* trial_mode_name(TrialMode mode) {
  switch (mode) {
    case TrialMode::kFull: return "full";
    case TrialMode::kNoZCbf: return "no-z";
    case TrialMode::kNoXyCbf: return "no-xy";
    case TrialMode::kRigidHold: return "rigid";
  }
  return "full";
}

TrialMode parse_trial_mode(const std::string& name) {
  if (name == "full") return TrialMode::kFull;
  if (name == "no-z") return TrialMode::kNoZCbf;
  if (name == "no-xy") return TrialMode::kNoXyCbf;
  if (name == "rigid") return TrialMode::kRigidHold;
  throw Error(ErrorCode::kConfigError, "unknown mode '" + name +
                                           "' (expected full, no-z, no-xy, "
                                           "rigid)");
}

const char* outcome_name(OutcomeClass cls) {
  switch (cls) {
    case OutcomeClass::kSuccess: return "Success";
    case OutcomeClass::kGroundCrash: return "GroundCrash";
    case OutcomeClass::kBaseCrash: return "BaseCrash";
    case OutcomeClass::kNotCatch: return "NotCatch";
  }
  return "NotCatch";
}

CompliancePolicy CompliancePolicy::network(PlstmParams params,
                                           PlstmOptions options) {
  CompliancePolicy policy;
  policy.params_ = std::move(params);
  policy.options_ = options;
  return policy;
}

CompliancePolicy CompliancePolicy::nominal(double tau, const DemoConfig& demo) {
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::kConfigError, "cushioning tau must be positive");
  }
  CompliancePolicy policy;
  policy.tau_ = tau;
  policy.demo_ = demo;
  return policy;
}

ComplianceSequence CompliancePolicy::operator()(const Vec3& p,
                                                const Vec3& pdot) const {
  ComplianceSequence seq;
  if (params_) {
    Vec6 input;
    input << p, pdot;
    seq.psi = plstm_forward(*params_, input, options_);
  } else {
    seq.psi = cushioning_label(pdot, tau_, demo_);
  }
  return seq;
}

BallState propagate_ball(const BallState& start, double t, double dt,
                         double k_ad) {
  BallState s = start;
  while (s.t < t - 1e-12) {
    const double h = std::min(dt, t - s.t);
    const double t_next = s.t + h;
    s = integrate(s, h, k_ad);
    s.t = t_next;
  }
  return s;
}

PreCatch run_precatch(const RobotModel& model, const TrialSpec& spec,
                      const SimConfig& cfg) {
  PreCatch pre;
  TrialLog& log = pre.log;
  const BallState start{spec.ball.head<3>(), spec.ball.tail<3>(), 0.0};

  // Noisy position fixes over the observation window.
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, cfg.measurement_sigma);
  const double step = 1.0 / cfg.measurement_rate;
  const int count =
      static_cast<int>(std::floor(spec.observation_window / step + 1e-9)) + 1;

  std::vector<TimedPosition> fixes;
  fixes.reserve(count);
  BallState truth = start;
  for (int k = 0; k < count; ++k) {
    const double t = k * step;
    truth = propagate_ball(truth, t, cfg.truth_dt, cfg.k_ad);
    Vec3 z = truth.p;
    for (int i = 0; i < 3; ++i) z[i] += noise(rng);
    fixes.push_back({t, z});
  }
  TrackFilterConfig filter;
  filter.k_ad = cfg.k_ad;
  filter.process_noise_pos = cfg.process_noise_pos;
  filter.process_noise_vel = cfg.process_noise_vel;
  filter.measurement_sigma = cfg.measurement_sigma;
  filter.initial_velocity_sigma = cfg.initial_velocity_sigma;
  const BallBelief belief = filter_track(fixes, filter);
  log.t_observe = belief.t;

  try {
    const BallPrediction prediction =
        predict(belief, cfg.horizon, cfg.prediction_dt, cfg.k_ad);
    const CaptureSolution plan =
        plan_capture(model, prediction, cfg.home, cfg.capture);
    log.q_ca = plan.q_ca;
    log.t_catch = log.t_observe + plan.t_ca;
    const auto [p_hat, v_hat] = prediction.query(plan.t_ca);
    log.predicted_p = p_hat;
    log.predicted_v = v_hat;

    const QuinticTrajectory prc = plan_prc(model, cfg.home, plan.q_ca, cfg.prc);
    log.t_prc = prc.duration();
    if (prc.duration() > plan.t_ca) {
      log.reason = "robot cannot reach the capture pose in time";
      return pre;
    }
    // Launch late enough to arrive exactly at t_ca; the samples only have
    // to stay inside the joint limits.
    const double tick = 1.0 / spec.control_rate;
    for (double t = 0.0; t <= prc.duration() + 1e-12; t += tick) {
      if (!model.within_limits(prc.sample(t).q, 1e-9)) {
        log.reason = "pre-catch motion leaves the joint limits";
        return pre;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNoCapturePlan &&
        e.code() != ErrorCode::kOutOfHorizon) {
      throw;
    }
    log.reason = e.what();
    return pre;
  }

  truth = propagate_ball(start, log.t_catch, cfg.truth_dt, cfg.k_ad);
  log.catch_tested = true;
  log.ball_p = truth.p;
  log.ball_v = truth.v;
  const ContainerPose pose = forward_kinematics(model, log.q_ca);
  const double error = (truth.p - pose.position()).norm();
  const double speed = truth.v.norm();
  const double cos_align =
      speed > 0.0 ? std::clamp(-truth.v.dot(pose.z_axis()) / speed, -1.0, 1.0)
                  : 1.0;
  log.alignment_deg = std::acos(cos_align) * kRadToDeg;
  if (error > cfg.aperture_radius) {
    log.reason = "ball misses the container aperture";
    return pre;
  }
  if (log.alignment_deg >= cfg.alignment_max_deg) {
    log.reason = "ball arrives outside the alignment cone";
    return pre;
  }
  pre.caught = true;
  pre.catch_error = error;
  return pre;
}

TrialOutcome run_postcatch(const RobotModel& model, const PreCatch& pre,
                           const CompliancePolicy& policy, TrialMode mode,
                           const SimConfig& cfg) {
  TrialOutcome out;
  out.log = pre.log;
  if (!pre.caught) {
    out.cls = OutcomeClass::kNotCatch;
    return out;
  }
  const double tick = cfg.poc.tick;
  const Vec3 v_catch = pre.log.ball_v;

  if (mode == TrialMode::kRigidHold) {
    out.cls = OutcomeClass::kSuccess;
    out.catch_error = pre.catch_error;
    out.impact_proxy = cfg.ball_mass * v_catch.norm() / tick;
    out.log.ball_speed = {v_catch.norm(), 0.0};
    return out;
  }

  PocConfig poc = cfg.poc;
  poc.enable_z_barrier = mode != TrialMode::kNoZCbf;
  poc.enable_xy_barrier = mode != TrialMode::kNoXyCbf;
  const ComplianceSequence psi =
      policy(pre.log.predicted_p, pre.log.predicted_v);
  out.log.rollout = track_sequence(model, pre.log.q_ca, psi, poc);
  out.safety_stop = out.log.rollout.safety_stop;

  const std::vector<PocLogEntry>& entries = out.log.rollout.log;
  Vec3 v_prev = v_catch;
  double peak = 0.0;
  out.log.ball_speed.push_back(v_catch.norm());
  out.cls = OutcomeClass::kSuccess;
  for (std::size_t k = 1; k < entries.size(); ++k) {
    const ContainerPose before = forward_kinematics(model, entries[k - 1].q);
    const Vec3 offset = -cfg.net_depth * before.z_axis();
    const Vec6& twist = entries[k].twist;
    const Vec3 v_ball =
        twist.head<3>() + twist.tail<3>().cross(offset);
    peak = std::max(peak, (v_ball - v_prev).norm());
    v_prev = v_ball;
    out.log.ball_speed.push_back(v_ball.norm());

    if (out.cls != OutcomeClass::kSuccess) continue;
    const ContainerPose pose = forward_kinematics(model, entries[k].q);
    const double planar =
        (pose.position() - base_position(entries[k].q)).head<2>().norm();
    if (pose.height() < cfg.ground_margin) {
      out.cls = OutcomeClass::kGroundCrash;
    } else if (planar < cfg.collision_radius) {
      out.cls = OutcomeClass::kBaseCrash;
    }
  }
  out.impact_proxy = cfg.ball_mass * peak / tick;
  if (out.cls == OutcomeClass::kSuccess) out.catch_error = pre.catch_error;
  return out;
}

TrialOutcome run_trial(const RobotModel& model, const TrialSpec& spec,
                       const CompliancePolicy& policy, TrialMode mode,
                       const SimConfig& cfg) {
  return run_postcatch(model, run_precatch(model, spec, cfg), policy, mode,
                       cfg);
}

std::vector<TrialSpec> sample_trials(int n, std::uint64_t seed,
                                     const SimConfig& cfg) {
  if (n < 1) throw Error(ErrorCode::kConfigError, "trial count must be >= 1");
  const SamplingConfig& s = cfg.sampling;
  std::mt19937_64 rng(seed);
  std::vector<TrialSpec> specs;
  specs.reserve(n);
  const long long max_attempts = 100LL * n;
  for (long long attempt = 0; static_cast<int>(specs.size()) < n; ++attempt) {
    if (attempt >= max_attempts) {
      throw Error(ErrorCode::kSamplingExhausted,
                  "rejection sampling found " + std::to_string(specs.size()) +
                      " of " + std::to_string(n) + " throws in " +
                      std::to_string(max_attempts) + " attempts");
    }
    const bool adversarial = uniform(rng, 0.0, 1.0) < s.adversarial_fraction;
    const bool flat = adversarial && uniform(rng, 0.0, 1.0) < 0.5;
    const double r = std::sqrt(uniform(
        rng, s.cylinder_radius_min * s.cylinder_radius_min,
        s.cylinder_radius * s.cylinder_radius));
    const double theta =
        flat ? uniform(rng, -s.flat_azimuth, s.flat_azimuth)
             : uniform(rng, -s.azimuth_half_width, s.azimuth_half_width);
    const Vec3 from(r * std::cos(theta), r * std::sin(theta),
                    uniform(rng, s.z_min, s.z_max));
    Vec3 aim;
    double flight = 0.0;
    if (!adversarial) {
      aim = point_in_ball(rng, s.capture_center, s.capture_radius);
      flight = uniform(rng, s.flight_time_min, s.flight_time_max);
    } else if (flat) {
      aim = point_in_ball(rng, s.flat_aim_center, s.flat_aim_radius);
      flight = uniform(rng, s.flat_flight_time_min, s.flat_flight_time_max);
    } else {
      aim = point_in_ball(rng, s.steep_aim_center, s.steep_aim_radius);
      flight = uniform(rng, s.steep_flight_time_min, s.steep_flight_time_max);
    }
    const std::uint64_t noise_seed = rng();

    const Vec3 v = shoot(from, aim, flight, cfg.k_ad, cfg.truth_dt);
    if (!v.allFinite() || v.norm() > s.max_speed) continue;
    if (!passes_region({from, v, 0.0}, s.capture_center, s.capture_radius,
                       s.pass_time_min, flight + 0.5, cfg.truth_dt,
                       cfg.k_ad)) {
      continue;
    }
    TrialSpec spec;
    spec.ball << from, v;
    spec.seed = noise_seed;
    spec.observation_window = cfg.observation_window;
    spec.control_rate = cfg.control_rate;
    spec.adversarial = adversarial;
    specs.push_back(spec);
  }
  return specs;
}

ImpactStats impact_stats(std::vector<double> values) {
  ImpactStats stats;
  stats.count = static_cast<int>(values.size());
  if (values.empty()) return stats;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  stats.mean = sum / values.size();
  const std::size_t mid = values.size() / 2;
  stats.median = values.size() % 2 == 1
                     ? values[mid]
                     : 0.5 * (values[mid - 1] + values[mid]);
  stats.max = values.back();
  return stats;
}

namespace {

MonteCarloReport summarize(TrialMode mode, std::uint64_t seed,
                           std::vector<TrialOutcome> trials) {
  MonteCarloReport report;
  report.mode = mode;
  report.seed = seed;
  report.n = static_cast<int>(trials.size());
  std::vector<double> impacts;
  for (const TrialOutcome& t : trials) {
    ++report.counts[static_cast<int>(t.cls)];
    if (t.cls == OutcomeClass::kSuccess) impacts.push_back(t.impact_proxy);
  }
  report.impact = impact_stats(std::move(impacts));
  report.trials = std::move(trials);
  return report;
}

}  // namespace

MonteCarloReport monte_carlo(const RobotModel& model, int n,
                             std::uint64_t seed, TrialMode mode,
                             const CompliancePolicy& policy,
                             const SimConfig& cfg) {
  const std::vector<TrialSpec> specs = sample_trials(n, seed, cfg);
  std::vector<TrialOutcome> trials;
  trials.reserve(specs.size());
  for (const TrialSpec& spec : specs) {
    trials.push_back(run_trial(model, spec, policy, mode, cfg));
  }
  return summarize(mode, seed, std::move(trials));
}

AblationReport ablate(const RobotModel& model, int n, std::uint64_t seed,
                      const CompliancePolicy& policy, const SimConfig& cfg) {
  constexpr TrialMode kModes[] = {TrialMode::kFull, TrialMode::kNoZCbf,
                                  TrialMode::kNoXyCbf, TrialMode::kRigidHold};
  const std::vector<TrialSpec> specs = sample_trials(n, seed, cfg);
  std::vector<std::vector<TrialOutcome>> per_mode(std::size(kModes));
  for (const TrialSpec& spec : specs) {
    const PreCatch pre = run_precatch(model, spec, cfg);
    for (std::size_t m = 0; m < std::size(kModes); ++m) {
      per_mode[m].push_back(run_postcatch(model, pre, policy, kModes[m], cfg));
    }
  }

  AblationReport report;
  std::vector<double> reductions;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const TrialOutcome& full = per_mode[0][i];
    const TrialOutcome& rigid = per_mode[3][i];
    if (full.cls != OutcomeClass::kSuccess ||
        rigid.cls != OutcomeClass::kSuccess) {
      continue;
    }
    ++report.shared_successes;
    if (full.impact_proxy < rigid.impact_proxy) ++report.full_lower_impact;
    reductions.push_back(rigid.impact_proxy > 0.0
                             ? 1.0 - full.impact_proxy / rigid.impact_proxy
                             : 0.0);
  }
  report.median_reduction = impact_stats(std::move(reductions)).median;
  for (std::size_t m = 0; m < std::size(kModes); ++m) {
    report.modes.push_back(summarize(kModes[m], seed, std::move(per_mode[m])));
  }
  return report;
}

}  // namespace cccm
