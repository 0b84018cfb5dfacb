// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cccm/ballistics.h"
#include "cccm/poc.h"
#include "cccm/prc.h"
#include "cccm/sim.h"
#include "qp_oracle.h"
#include "test_util.h"

namespace cccm {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- shared policy -------------------------------------------------------

struct Learned {
  PlstmParams with_pe;
  double held_with_pe = 0.0;
  double held_without_pe = 0.0;
  double train_seconds = 0.0;
};

const Learned& learned() {
  static const Learned l = [] {
    const auto t0 = Clock::now();
    const std::vector<Demonstration> demos = generate_demos(2000, 7);
    const std::vector<Demonstration> held = generate_demos(200, 8);
    Learned out;
    for (bool pe : {true, false}) {
      TrainConfig tc;
      tc.epochs = 40;
      tc.model.use_positional_encoding = pe;
      const TrainResult r = plstm_train(demos, tc, 7);
      const double loss = plstm_loss(r.params, held, tc.model);
      if (pe) {
        out.with_pe = r.params;
        out.held_with_pe = loss;
      } else {
        out.held_without_pe = loss;
      }
    }
    out.train_seconds = seconds_since(t0);
    return out;
  }();
  return l;
}

CompliancePolicy network_policy() {
  return CompliancePolicy::network(learned().with_pe);
}

double pct(double rate) { return 100.0 * rate; }

int count(const MonteCarloReport& r, OutcomeClass c) {
  return r.counts[static_cast<int>(c)];
}

// ---- criteria ------------------------------------------------------------

Verdict success_rate() {
  const RobotModel model = RobotModel::default_model();
  const SimConfig cfg;
  const CompliancePolicy policy = network_policy();
  const auto t0 = Clock::now();
  const MonteCarloReport r =
      monte_carlo(model, 500, 7, TrialMode::kFull, policy, cfg);
  const double elapsed = seconds_since(t0);
  const double rate = r.rate(OutcomeClass::kSuccess);
  return {rate >= 0.90 && elapsed < 300.0,
          fmt("success %.1f%% (>= 90%%), %.1f s (< 300 s)", pct(rate), elapsed)};
}

Verdict ablation_directions() {
  const RobotModel model = RobotModel::default_model();
  SimConfig cfg;
  cfg.sampling.adversarial_fraction = 0.8;
  const AblationReport a = ablate(model, 500, 7, network_policy(), cfg);
  const MonteCarloReport& full = a.modes[0];
  const MonteCarloReport& no_z = a.modes[1];
  const MonteCarloReport& no_xy = a.modes[2];
  const double dz = pct(no_z.rate(OutcomeClass::kGroundCrash) -
                        full.rate(OutcomeClass::kGroundCrash));
  const double dxy = pct(no_xy.rate(OutcomeClass::kBaseCrash) -
                         full.rate(OutcomeClass::kBaseCrash));
  double lo = 1.0, hi = 0.0;
  for (const MonteCarloReport& m : a.modes) {
    lo = std::min(lo, m.rate(OutcomeClass::kNotCatch));
    hi = std::max(hi, m.rate(OutcomeClass::kNotCatch));
  }
  const double spread = pct(hi - lo);
  return {dz >= 3.0 && dxy >= 3.0 && spread <= 1.0,
          fmt("ground crash +%.1f pp, base crash +%.1f pp (each >= 3), "
              "not-catch spread %.1f pp (<= 1); adversarial fraction 0.8",
              dz, dxy, spread)};
}

Verdict impact_reduction() {
  const RobotModel model = RobotModel::default_model();
  const SimConfig cfg;
  const AblationReport a = ablate(model, 500, 7, network_policy(), cfg);
  const bool all_lower =
      a.shared_successes > 0 && a.full_lower_impact == a.shared_successes;
  return {all_lower && a.median_reduction >= 0.5,
          fmt("full < rigid on %d/%d pairs, median reduction %.1f%% (>= 50%%)",
              a.full_lower_impact, a.shared_successes,
              pct(a.median_reduction))};
}

std::vector<TimedPosition> noisy_track(const BallState& start, double rate,
                                       int count, double k_ad, double sigma,
                                       std::mt19937_64& rng,
                                       std::vector<BallState>* truth) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<TimedPosition> track;
  BallState s = start;
  const double step = 1.0 / rate;
  for (int k = 0; k < count; ++k) {
    TimedPosition tp{k * step, s.p};
    for (int i = 0; i < 3; ++i) {
      if (sigma > 0.0) tp.p[i] += noise(rng);
    }
    track.push_back(tp);
    if (truth) truth->push_back(s);
    for (int i = 0; i < 10; ++i) s = integrate(s, step / 10, k_ad);
  }
  return track;
}

BallState random_throw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {Vec3(2.5 + 0.5 * u(rng), u(rng), 1.5 + 0.5 * u(rng)),
          Vec3(-4.0 + u(rng), u(rng), 3.0 + u(rng)), 0.0};
}

Verdict estimation() {
  const double k_ad = kDefaultDragCoefficient;
  std::mt19937_64 rng(7);
  double sq = 0.0, vsq = 0.0;
  const int tracks = 200;
  for (int n = 0; n < tracks; ++n) {
    std::vector<BallState> truth;
    const auto track =
        noisy_track(random_throw(rng), 100.0, 11, k_ad, 0.005, rng, &truth);
    const BallBelief b = filter_track(track, TrackFilterConfig{});
    sq += (b.position() - truth.back().p).squaredNorm();
    vsq += (b.velocity() - truth.back().v).squaredNorm();
  }
  const double rmse = std::sqrt(sq / tracks);
  const double vrmse = std::sqrt(vsq / tracks);

  const BallState start{Vec3(0, 0, 1), Vec3(8, 1, 6), 0.0};
  std::mt19937_64 clean_rng(0);
  const double clean = estimate_drag(
      noisy_track(start, 200.0, 201, k_ad, 0.0, clean_rng, nullptr));
  const double clean_err = std::abs(clean - k_ad) / k_ad;
  double worst_noisy = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 r(seed);
    const double k =
        estimate_drag(noisy_track(start, 200.0, 201, k_ad, 0.005, r, nullptr));
    worst_noisy = std::max(worst_noisy, std::abs(k - k_ad) / k_ad);
  }
  return {rmse < 0.005 && clean_err <= 0.02 && worst_noisy <= 0.15,
          fmt("EKF position RMSE %.2f mm after 10 updates (< 5), velocity RMSE "
              "%.3f m/s; drag error %.2f%% noiseless (<= 2), worst %.1f%% "
              "noisy over 5 seeds (<= 15)",
              1e3 * rmse, vrmse, pct(clean_err), pct(worst_noisy))};
}

Verdict solver_correctness() {
  std::mt19937_64 rng(7);
  double worst_qp = 0.0;
  int qp_ok = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    const int me = std::uniform_int_distribution<int>(0, std::min(2, n - 1))(rng);
    const int mi = std::uniform_int_distribution<int>(0, 8)(rng);
    const QpProblem p = testing::random_qp(rng, n, me, mi);
    const auto oracle = testing::brute_force_qp(p);
    const QpSolution s = solve_qp(p);
    if (!oracle || s.status != QpStatus::kOptimal) continue;
    const double err = (s.x - *oracle).cwiseAbs().maxCoeff();
    worst_qp = std::max(worst_qp, err);
    if (err <= 1e-6) ++qp_ok;
  }

  const RobotModel model = RobotModel::default_model();
  const PocConfig cfg;
  double worst_poc = 0.0;
  int poc_checked = 0;
  while (poc_checked < 200) {
    Configuration q = RobotModel::default_home();
    q += testing::random_vector(model.dof(), rng, 0.2);
    q = model.clamp(q);
    const ContainerPose pose = forward_kinematics(model, q);
    if (ground_barrier(pose, cfg) < 0.1 || base_barrier(pose, q, cfg) < 0.1) continue;
    const Vec6 psi = testing::random_vector(6, rng, 0.05);
    const PocStep step = poc_step(model, q, psi, cfg);
    if (step.safety_stop || step.z_active || step.xy_active) continue;
    bool box_active = false;
    for (int i = 0; i < model.dof(); ++i) {
      const JointLimit& l = model.limits()[i];
      const double lo = std::max(-l.qd_max, (l.q_min - q[i]) / cfg.tick);
      const double hi = std::min(l.qd_max, (l.q_max - q[i]) / cfg.tick);
      if (step.qd[i] <= lo + 1e-9 || step.qd[i] >= hi - 1e-9) box_active = true;
    }
    if (box_active) continue;
    const Jacobian jac = extended_jacobian(model, q);
    const VecX closed =
        jac.transpose() *
        (jac * jac.transpose() + Mat6::Identity() / cfg.slack_weight)
            .ldlt()
            .solve(psi);
    worst_poc = std::max(worst_poc, (step.qd - closed).cwiseAbs().maxCoeff());
    ++poc_checked;
  }
  return {qp_ok == 1000 && worst_poc <= 1e-8,
          fmt("QP %d/1000 within 1e-6 of the enumeration oracle (worst %.1e); "
              "POC closed form worst %.1e on %d inactive-barrier steps (<= 1e-8)",
              qp_ok, worst_qp, worst_poc, poc_checked)};
}

Verdict planner_exactness() {
  const RobotModel model = RobotModel::default_model();
  std::mt19937_64 rng(7);
  double worst_end = 0.0;
  int exact_t = 0, inflated = 0;
  double worst_t = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Configuration a = testing::random_configuration(model, rng);
    const Configuration b = testing::random_configuration(model, rng);
    const QuinticTrajectory traj = plan_prc(model, a, b, PrcConfig{});
    const JointSample s0 = traj.sample(0.0);
    const JointSample s1 = traj.sample(traj.duration());
    worst_end = std::max({worst_end, (s0.q - a).cwiseAbs().maxCoeff(),
                          (s1.q - b).cwiseAbs().maxCoeff(),
                          s0.qd.cwiseAbs().maxCoeff(), s1.qd.cwiseAbs().maxCoeff(),
                          s0.qdd.cwiseAbs().maxCoeff(), s1.qdd.cwiseAbs().maxCoeff()});
    double t_max = 0.0;
    for (int i = 0; i < model.dof(); ++i) {
      const JointLimit& l = model.limits()[i];
      t_max = std::max(t_max, min_time(std::abs(b[i] - a[i]), l.qd_max, l.qdd_max));
    }
    if (std::abs(traj.duration() - 1.5 * t_max) <= 1e-12 * traj.duration()) {
      ++exact_t;
      worst_t = std::max(worst_t, std::abs(traj.duration() - 1.5 * t_max));
    } else if (traj.duration() > 1.5 * t_max) {
      ++inflated;
    }
  }
  const double tri = min_time(1.0, 10.0, 5.0);
  const double trap = min_time(1.0, 1.0, 2.0);
  const bool branches =
      std::abs(tri - 0.89443) <= 1e-5 && std::abs(trap - 1.5) <= 1e-5;
  const bool ok = worst_end <= 1e-9 && branches && exact_t + inflated == 200 &&
                  exact_t > 0;
  return {ok, fmt("endpoint error %.1e (<= 1e-9); min_time %.5f, %.5f; "
                  "T = 1.5 max on %d/200 moves, limit re-inflation on %d",
                  worst_end, tri, trap, exact_t, inflated)};
}

Verdict learning() {
  // Gradient check on a 4-unit fixture.
  PlstmParams p = PlstmParams::zeros(4);
  {
    std::mt19937_64 rng(9);
    p.unflatten(testing::random_vector(p.num_parameters(), rng, 0.3));
  }
  const std::vector<Demonstration> fixture = generate_demos(3, 10);
  const LossAndGradient lg = plstm_loss_and_gradient(p, fixture);
  const VecX theta = p.flatten();
  VecX fd(theta.size());
  for (int k = 0; k < theta.size(); ++k) {
    VecX plus = theta, minus = theta;
    plus[k] += 1e-5;
    minus[k] -= 1e-5;
    PlstmParams a = p, b = p;
    a.unflatten(plus);
    b.unflatten(minus);
    fd[k] = (plstm_loss(a, fixture) - plstm_loss(b, fixture)) / 2e-5;
  }
  const double grad_err = (lg.gradient - fd).norm() / fd.norm();

  const std::vector<Demonstration> one = generate_demos(1, 11);
  TrainConfig tc;
  tc.min_demos = 1;
  tc.epochs = 500;
  const double overfit = plstm_loss(plstm_train(one, tc, 7).params, one);

  VecX row0(6);
  row0 << 0, 1, 0, 1, 0, 1;
  const bool pe_ok = positional_encoding(0, 6) == row0;

  const Learned& l = learned();
  const bool ablation = l.held_without_pe > l.held_with_pe;
  return {grad_err < 1e-4 && overfit < 1e-4 && pe_ok && ablation,
          fmt("gradient rel. error %.1e (< 1e-4); 1-demo MSE %.1e (< 1e-4); "
              "PE row 0 %s; held-out MSE %.5f with PE vs %.5f without "
              "(2000 demos, 40 epochs, seed 7, %.0f s)",
              grad_err, overfit, pe_ok ? "exact" : "wrong", l.held_with_pe,
              l.held_without_pe, l.train_seconds)};
}

Verdict safety() {
  const RobotModel model = RobotModel::default_model();
  const PocConfig cfg;
  std::mt19937_64 rng(7);
  double min_f = 1e9, min_g = 1e9;
  int rollouts = 0;
  while (rollouts < 1000) {
    const Configuration q = testing::random_configuration(model, rng, 0.7);
    const ContainerPose pose = forward_kinematics(model, q);
    if (ground_barrier(pose, cfg) < 0.0 || base_barrier(pose, q, cfg) < 0.0) continue;
    ComplianceSequence seq;
    seq.psi = Eigen::Matrix<double, Eigen::Dynamic, 6>(16, 6);
    for (int i = 0; i < 16; ++i) {
      seq.psi.row(i) = testing::random_vector(6, rng, 2.0).transpose();
    }
    const PocRollout r = track_sequence(model, q, seq, cfg);
    for (const PocLogEntry& e : r.log) {
      min_f = std::min(min_f, e.f);
      min_g = std::min(min_g, e.g);
    }
    ++rollouts;
  }
  return {min_f >= -1e-3 && min_g >= -1e-3,
          fmt("min f %.4f m, min g %.4f m over %d rollouts (>= -1e-3)", min_f,
              min_g, rollouts)};
}

}  // namespace
}  // namespace cccm

int main() {
  using namespace cccm;
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"estimation", estimation},
      {"solver-correctness", solver_correctness},
      {"planner-exactness", planner_exactness},
      {"safety-invariance", safety},
      {"learning", learning},
      {"monte-carlo-success", success_rate},
      {"ablation-directions", ablation_directions},
      {"impact-reduction", impact_reduction},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("%s %-20s %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name,
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
