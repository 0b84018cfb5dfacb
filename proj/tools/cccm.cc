// cccm: command-line front end for the catching pipeline.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cccm/capture.h"
#include "cccm/config.h"
#include "cccm/error.h"
#include "cccm/io.h"
#include "cccm/plstm.h"
#include "cccm/prc.h"
#include "cccm/sim.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Usage and configuration problems exit with 2, everything else with 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "run";
  bool paper_literal = false;
};

struct PolicyOptions {
  std::string params_path;
  bool untrained = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run config");
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--out-dir", c.out_dir, "run directory")
      ->capture_default_str();
  cmd->add_flag("--paper-literal", c.paper_literal,
                "equal weights on joint speed and slack (mu = 1)");
}

void add_policy(CLI::App* cmd, PolicyOptions& p) {
  cmd->add_option("--params", p.params_path, "trained P-LSTM parameters");
  cmd->add_flag("--untrained", p.untrained,
                "use the noise-free exponential cushioning profile");
}

cccm::RunConfig resolve(const Common& c) {
  cccm::RunConfig cfg =
      c.config_path.empty() ? cccm::RunConfig{}
                            : cccm::load_run_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.paper_literal) cfg.set_paper_literal();
  cfg.validate();
  return cfg;
}

fs::path prepare_run_dir(const Common& c, const cccm::RunConfig& cfg,
                         const json& invocation) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw cccm::Error(cccm::ErrorCode::kIoError,
                      "cannot create " + dir.string() + ": " + ec.message());
  }
  std::ofstream(dir / "config.json") << cccm::to_json(cfg).dump(2) << "\n";
  std::ofstream(dir / "run.json") << invocation.dump(2) << "\n";
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw cccm::Error(cccm::ErrorCode::kIoError,
                      "cannot write " + path.string());
  }
  out << text;
}

cccm::CompliancePolicy make_policy(const PolicyOptions& p,
                                   const cccm::RunConfig& cfg) {
  if (p.untrained) {
    return cccm::CompliancePolicy::nominal(cfg.sim.nominal_tau, cfg.demos);
  }
  if (p.params_path.empty()) {
    throw UsageError("a trained policy is required: pass --params FILE or "
                     "--untrained");
  }
  if (!fs::exists(p.params_path)) {
    throw UsageError("parameter file not found: " + p.params_path);
  }
  cccm::PlstmParams params = cccm::PlstmParams::load_file(p.params_path);
  if (params.hidden != cfg.train.hidden) {
    throw UsageError("parameter file has hidden size " +
                     std::to_string(params.hidden) + ", config expects " +
                     std::to_string(cfg.train.hidden));
  }
  return cccm::CompliancePolicy::network(std::move(params), cfg.train.model);
}

cccm::TrialSpec single_trial(const std::vector<double>& ball,
                             const cccm::RunConfig& cfg) {
  if (ball.empty()) return cccm::sample_trials(1, cfg.seed, cfg.sim).front();
  if (ball.size() != 6) {
    throw UsageError("--ball takes px,py,pz,vx,vy,vz");
  }
  cccm::TrialSpec spec;
  for (int i = 0; i < 6; ++i) spec.ball[i] = ball[i];
  spec.seed = cfg.seed;
  spec.observation_window = cfg.sim.observation_window;
  spec.control_rate = cfg.sim.control_rate;
  return spec;
}

json ball_json(const cccm::TrialSpec& spec) {
  return json::array({spec.ball[0], spec.ball[1], spec.ball[2], spec.ball[3],
                      spec.ball[4], spec.ball[5]});
}

int cmd_defaults(const Common& c) {
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_file(dir / "defaults.md", cccm::defaults_markdown());
  std::cout << (dir / "defaults.md").string() << "\n";
  return 0;
}

int cmd_predict(const Common& c, const std::string& input) {
  const cccm::RunConfig cfg = resolve(c);
  const auto track = cccm::read_track_csv_file(input);
  const fs::path dir =
      prepare_run_dir(c, cfg, {{"command", "predict"}, {"input", input}});
  cccm::TrackFilterConfig filter;
  filter.k_ad = cfg.sim.k_ad;
  filter.process_noise_pos = cfg.sim.process_noise_pos;
  filter.process_noise_vel = cfg.sim.process_noise_vel;
  filter.measurement_sigma = cfg.sim.measurement_sigma;
  filter.initial_velocity_sigma = cfg.sim.initial_velocity_sigma;
  const cccm::BallBelief belief = cccm::filter_track(track, filter);
  const cccm::BallPrediction prediction = cccm::predict(
      belief, cfg.sim.horizon, cfg.sim.prediction_dt, cfg.sim.k_ad);
  std::ofstream out(dir / "prediction.csv");
  cccm::write_prediction_csv(out, prediction);
  std::cout << "filtered " << track.size() << " samples, wrote "
            << prediction.knots().size() << " knots to "
            << (dir / "prediction.csv").string() << "\n";
  return 0;
}

int cmd_plan(const Common& c, const std::vector<double>& ball) {
  const cccm::RunConfig cfg = resolve(c);
  const cccm::RobotModel model = cfg.robot.build();
  const cccm::TrialSpec spec = single_trial(ball, cfg);
  const fs::path dir = prepare_run_dir(
      c, cfg, {{"command", "plan"}, {"ball", ball_json(spec)}});
  const cccm::PreCatch pre = cccm::run_precatch(model, spec, cfg.sim);
  cccm::TrialOutcome outcome;
  outcome.log = pre.log;
  json j = cccm::trial_json(outcome, false);
  j.erase("class");
  j.erase("impact_proxy");
  j.erase("safety_stop");
  j.erase("catch_error");
  if (pre.caught) j["catch_error"] = pre.catch_error;
  j["ball"] = ball_json(spec);
  j["caught"] = pre.caught;
  if (pre.log.q_ca.size() > 0) {
    const cccm::QuinticTrajectory prc =
        cccm::plan_prc(model, cfg.sim.home, pre.log.q_ca, cfg.sim.prc);
    std::ofstream out(dir / "prc.csv");
    prc.write_csv(out, spec.control_rate);
  }
  write_file(dir / "plan.json", j.dump(2) + "\n");
  std::cout << (pre.caught ? "catch planned" : "no catch: " + pre.log.reason)
            << "\n";
  return 0;
}

int cmd_simulate(const Common& c, const PolicyOptions& p,
                 const std::string& mode_name,
                 const std::vector<double>& ball) {
  const cccm::RunConfig cfg = resolve(c);
  const cccm::TrialMode mode = cccm::parse_trial_mode(mode_name);
  const cccm::RobotModel model = cfg.robot.build();
  const cccm::CompliancePolicy policy = make_policy(p, cfg);
  const cccm::TrialSpec spec = single_trial(ball, cfg);
  const fs::path dir = prepare_run_dir(c, cfg,
                                       {{"command", "simulate"},
                                        {"mode", mode_name},
                                        {"ball", ball_json(spec)},
                                        {"untrained", p.untrained},
                                        {"params", p.params_path}});
  const cccm::TrialOutcome out = cccm::run_trial(model, spec, policy, mode,
                                                 cfg.sim);
  json j = cccm::trial_json(out, true);
  j["ball"] = ball_json(spec);
  j["mode"] = mode_name;
  write_file(dir / "trial.json", j.dump(2) + "\n");
  if (!out.log.rollout.log.empty()) {
    std::ofstream csv(dir / "poc.csv");
    out.log.rollout.write_csv(csv);
  }
  std::printf("%s impact_proxy=%.4f\n", cccm::outcome_name(out.cls),
              out.impact_proxy);
  return 0;
}

int cmd_montecarlo(const Common& c, const PolicyOptions& p,
                   const std::string& mode_name, int n,
                   std::optional<double> adversarial, bool trials) {
  cccm::RunConfig cfg = resolve(c);
  if (adversarial) cfg.sim.sampling.adversarial_fraction = *adversarial;
  cfg.validate();
  const cccm::TrialMode mode = cccm::parse_trial_mode(mode_name);
  const cccm::RobotModel model = cfg.robot.build();
  const cccm::CompliancePolicy policy = make_policy(p, cfg);
  const fs::path dir = prepare_run_dir(c, cfg,
                                       {{"command", "montecarlo"},
                                        {"mode", mode_name},
                                        {"n", n},
                                        {"untrained", p.untrained},
                                        {"params", p.params_path}});
  const cccm::MonteCarloReport report =
      cccm::monte_carlo(model, n, cfg.seed, mode, policy, cfg.sim);
  write_file(dir / "report.json", cccm::report_json(report).dump(2) + "\n");
  if (trials) {
    std::ofstream out(dir / "trials.jsonl");
    for (const cccm::TrialOutcome& t : report.trials) {
      out << cccm::trial_json(t, false).dump() << "\n";
    }
  }
  std::printf("%s n=%d Success %.2f%% GroundCrash %.2f%% BaseCrash %.2f%% "
              "NotCatch %.2f%%\n",
              mode_name.c_str(), report.n,
              100.0 * report.rate(cccm::OutcomeClass::kSuccess),
              100.0 * report.rate(cccm::OutcomeClass::kGroundCrash),
              100.0 * report.rate(cccm::OutcomeClass::kBaseCrash),
              100.0 * report.rate(cccm::OutcomeClass::kNotCatch));
  return 0;
}

int cmd_ablate(const Common& c, const PolicyOptions& p, int n,
               std::optional<double> adversarial) {
  cccm::RunConfig cfg = resolve(c);
  if (adversarial) cfg.sim.sampling.adversarial_fraction = *adversarial;
  cfg.validate();
  const cccm::RobotModel model = cfg.robot.build();
  const cccm::CompliancePolicy policy = make_policy(p, cfg);
  const fs::path dir = prepare_run_dir(c, cfg,
                                       {{"command", "ablate"},
                                        {"n", n},
                                        {"untrained", p.untrained},
                                        {"params", p.params_path}});
  const cccm::AblationReport report =
      cccm::ablate(model, n, cfg.seed, policy, cfg.sim);
  write_file(dir / "ablation.json", cccm::ablation_json(report).dump(2) + "\n");
  const std::string table = cccm::ablation_table(report);
  write_file(dir / "ablation.txt", table);
  std::cout << table;
  return 0;
}

int cmd_gen_demos(const Common& c, std::optional<int> count) {
  cccm::RunConfig cfg = resolve(c);
  if (count) cfg.demo_count = *count;
  cfg.validate();
  const fs::path dir = prepare_run_dir(
      c, cfg, {{"command", "gen-demos"}, {"count", cfg.demo_count}});
  const auto demos = cccm::generate_demos(cfg.demo_count, cfg.seed, cfg.demos);
  std::ofstream out(dir / "demos.jsonl");
  cccm::write_demos_jsonl(out, demos);
  std::cout << "wrote " << demos.size() << " demonstrations to "
            << (dir / "demos.jsonl").string() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& demos_path,
              std::optional<int> epochs) {
  cccm::RunConfig cfg = resolve(c);
  if (epochs) cfg.train.epochs = *epochs;
  cfg.validate();
  std::vector<cccm::Demonstration> demos;
  if (demos_path.empty()) {
    demos = cccm::generate_demos(cfg.demo_count, cfg.seed, cfg.demos);
  } else {
    std::ifstream in(demos_path);
    if (!in) throw UsageError("cannot open demos file " + demos_path);
    demos = cccm::read_demos_jsonl(in);
    // A deliberately tiny set is an overfit run, not a usage error.
    cfg.train.min_demos = std::min<int>(cfg.train.min_demos, demos.size());
  }
  const fs::path dir = prepare_run_dir(c, cfg,
                                       {{"command", "train"},
                                        {"demos", demos_path},
                                        {"demo_count", demos.size()}});
  const cccm::TrainResult result =
      cccm::plstm_train(demos, cfg.train, cfg.seed);
  result.params.save_file((dir / "params.bin").string());
  std::ostringstream loss;
  loss << "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", e + 1, result.loss_curve[e]);
    loss << buf;
  }
  write_file(dir / "loss.csv", loss.str());
  std::printf("trained %zu epochs on %zu demos, final loss %.6g\n",
              result.loss_curve.size(), demos.size(),
              result.loss_curve.empty() ? 0.0 : result.loss_curve.back());
  return 0;
}

bool is_usage_code(cccm::ErrorCode code) {
  return code == cccm::ErrorCode::kConfigError ||
         code == cccm::ErrorCode::kParseError ||
         code == cccm::ErrorCode::kIoError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compliant catching simulator"};
  app.require_subcommand(1);
  Common common;
  PolicyOptions policy;
  std::string mode = "full";
  std::string input;
  std::string demos_path;
  std::vector<double> ball;
  int n = 500;
  std::optional<int> count;
  std::optional<int> epochs;
  std::optional<double> adversarial;
  bool trials = false;

  auto* defaults = app.add_subcommand("defaults", "write defaults.md");
  add_common(defaults, common);

  auto* predict = app.add_subcommand("predict", "filter a track and predict");
  add_common(predict, common);
  predict->add_option("input", input, "CSV with header t,x,y,z")->required();

  auto* plan = app.add_subcommand("plan", "capture and pre-catch plan");
  add_common(plan, common);
  plan->add_option("--ball", ball, "px,py,pz,vx,vy,vz (default: sampled)")
      ->delimiter(',');

  auto* simulate = app.add_subcommand("simulate", "one closed-loop trial");
  add_common(simulate, common);
  add_policy(simulate, policy);
  simulate->add_option("--mode", mode, "full|no-z|no-xy|rigid")
      ->capture_default_str();
  simulate->add_option("--ball", ball, "px,py,pz,vx,vy,vz (default: sampled)")
      ->delimiter(',');

  auto* montecarlo = app.add_subcommand("montecarlo", "random trials");
  add_common(montecarlo, common);
  add_policy(montecarlo, policy);
  montecarlo->add_option("--mode", mode, "full|no-z|no-xy|rigid")
      ->capture_default_str();
  montecarlo->add_option("--n", n, "trial count")->capture_default_str()
      ->check(CLI::PositiveNumber);
  montecarlo->add_option("--adversarial-fraction", adversarial,
                         "share of barrier-stressing throws")
      ->check(CLI::Range(0.0, 1.0));
  montecarlo->add_flag("--trials", trials, "also write trials.jsonl");

  auto* ablate = app.add_subcommand("ablate", "all modes on shared throws");
  add_common(ablate, common);
  add_policy(ablate, policy);
  ablate->add_option("--n", n, "trial count")->capture_default_str()
      ->check(CLI::PositiveNumber);
  ablate->add_option("--adversarial-fraction", adversarial,
                     "share of barrier-stressing throws")
      ->check(CLI::Range(0.0, 1.0));

  auto* gen_demos = app.add_subcommand("gen-demos", "synthetic demonstrations");
  add_common(gen_demos, common);
  gen_demos->add_option("--count", count, "overrides demos.count")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "fit the P-LSTM");
  add_common(train, common);
  train->add_option("--demos", demos_path,
                    "JSONL demonstrations (default: generated)");
  train->add_option("--epochs", epochs, "overrides train.epochs")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*defaults) return cmd_defaults(common);
    if (*predict) return cmd_predict(common, input);
    if (*plan) return cmd_plan(common, ball);
    if (*simulate) return cmd_simulate(common, policy, mode, ball);
    if (*montecarlo) {
      return cmd_montecarlo(common, policy, mode, n, adversarial, trials);
    }
    if (*ablate) return cmd_ablate(common, policy, n, adversarial);
    if (*gen_demos) return cmd_gen_demos(common, count);
    if (*train) return cmd_train(common, demos_path, epochs);
  } catch (const UsageError& e) {
    std::cerr << "cccm: " << e.what() << "\n";
    return 2;
  } catch (const cccm::Error& e) {
    std::cerr << "cccm: " << cccm::error_code_name(e.code()) << ": "
              << e.what() << "\n";
    return is_usage_code(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "cccm: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
