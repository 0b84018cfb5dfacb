#include "cccm/config.h"

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cccm/error.h"

namespace cccm {
namespace {

using nlohmann::json;

constexpr const char* kPublished = "published";
constexpr const char* kChosen = "chosen";

[[noreturn]] void config_error(const std::string& path,
                               const std::string& what) {
  throw Error(ErrorCode::kConfigError, path + ": " + what);
}

json encode(double v) { return v; }
json encode(int v) { return v; }
json encode(bool v) { return v; }
json encode(std::uint64_t v) { return v; }
json encode(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json encode(const VecX& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
json encode(const std::vector<DhRow>& rows) {
  json a = json::array();
  for (const DhRow& r : rows) {
    a.push_back({{"a", r.a},
                 {"alpha", r.alpha},
                 {"d", r.d},
                 {"theta_offset", r.theta_offset}});
  }
  return a;
}
json encode(const std::vector<JointLimit>& limits) {
  json a = json::array();
  for (const JointLimit& l : limits) {
    a.push_back({{"q_min", l.q_min},
                 {"q_max", l.q_max},
                 {"qd_max", l.qd_max},
                 {"qdd_max", l.qdd_max}});
  }
  return a;
}

void decode(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) config_error(path, "expected a number");
  out = j.get<double>();
}
void decode(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) config_error(path, "expected an integer");
  out = j.get<int>();
}
void decode(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) config_error(path, "expected true or false");
  out = j.get<bool>();
}
void decode(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    config_error(path, "expected a non-negative integer");
  }
  out = j.get<std::uint64_t>();
}
void decode(const json& j, const std::string& path, VecX& out) {
  if (!j.is_array()) config_error(path, "expected an array of numbers");
  out.resize(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    decode(j[i], path + "[" + std::to_string(i) + "]", out[i]);
  }
}
void decode(const json& j, const std::string& path, Vec3& out) {
  VecX v;
  decode(j, path, v);
  if (v.size() != 3) config_error(path, "expected 3 numbers");
  out = v;
}

void decode(const json& j, const std::string& path, std::vector<DhRow>& out);
void decode(const json& j, const std::string& path,
            std::vector<JointLimit>& out);

// A JSON object read against a fixed key set; finish() rejects the rest.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path)
      : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) config_error(path_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (auto it = j_->find(key); it != j_->end()) {
      decode(*it, path_ + "." + key, out);
    }
  }

  // Nested object, or nullptr when the key is absent.
  const json* section(const char* key) {
    seen_.insert(key);
    auto it = j_->find(key);
    return it == j_->end() ? nullptr : &*it;
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it) {
      if (!seen_.count(it.key())) {
        config_error(path_ + "." + it.key(), "unknown key");
      }
    }
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

void decode(const json& j, const std::string& path, std::vector<DhRow>& out) {
  if (!j.is_array()) config_error(path, "expected an array of DH rows");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    StrictObject o(j[i], path + "[" + std::to_string(i) + "]");
    DhRow r;
    o.get("a", r.a);
    o.get("alpha", r.alpha);
    o.get("d", r.d);
    o.get("theta_offset", r.theta_offset);
    o.finish();
    out.push_back(r);
  }
}
void decode(const json& j, const std::string& path,
            std::vector<JointLimit>& out) {
  if (!j.is_array()) config_error(path, "expected an array of joint limits");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    StrictObject o(j[i], path + "[" + std::to_string(i) + "]");
    JointLimit l;
    o.get("q_min", l.q_min);
    o.get("q_max", l.q_max);
    o.get("qd_max", l.qd_max);
    o.get("qdd_max", l.qdd_max);
    o.finish();
    out.push_back(l);
  }
}

class Writer {
 public:
  void begin(const char* key) { stack_.emplace_back(key, json::object()); }
  void end() {
    auto [key, obj] = std::move(stack_.back());
    stack_.pop_back();
    top()[key] = std::move(obj);
  }
  template <typename T>
  void field(const char* key, T& value, const char*, const char* = "") {
    top()[key] = encode(value);
  }
  json result() { return std::move(root_); }

 private:
  json& top() { return stack_.empty() ? root_ : stack_.back().second; }
  json root_ = json::object();
  std::vector<std::pair<std::string, json>> stack_;
};

class Reader {
 public:
  explicit Reader(const json& root) { stack_.emplace_back(root, "config"); }
  void begin(const char* key) {
    StrictObject& parent = stack_.back();
    const json* child = parent.section(key);
    stack_.emplace_back(child ? *child : empty_, parent.path() + "." + key);
  }
  void end() {
    stack_.back().finish();
    stack_.pop_back();
  }
  template <typename T>
  void field(const char* key, T& value, const char*, const char* = "") {
    stack_.back().get(key, value);
  }
  void finish() { stack_.back().finish(); }

 private:
  const json empty_ = json::object();
  std::vector<StrictObject> stack_;
};

std::string format_default(const json& v) {
  std::string s = v.dump();
  if (s.size() > 60) s = s.substr(0, 57) + "...";
  return s;
}

class DocWriter {
 public:
  void begin(const char* key) { prefix_.push_back(key); }
  void end() { prefix_.pop_back(); }
  template <typename T>
  void field(const char* key, T& value, const char* provenance,
             const char* note = "") {
    std::string name;
    for (const std::string& p : prefix_) name += p + ".";
    name += key;
    out_ << "| `" << name << "` | `" << format_default(encode(value))
         << "` | " << provenance << " | " << note << " |\n";
  }
  std::string result() const { return out_.str(); }

 private:
  std::vector<std::string> prefix_;
  std::ostringstream out_;
};

template <typename V>
void visit_fields(V& v, RunConfig& c) {
  v.field("seed", c.seed, kChosen, "global seed");

  v.begin("robot");
  v.field("dh", c.robot.dh, kChosen, "generic 7-DoF modified DH table");
  v.field("mount_xyz", c.robot.mount_xyz, kChosen, "arm base in base frame");
  v.field("mount_rpy", c.robot.mount_rpy, kChosen);
  v.field("tool_xyz", c.robot.tool_xyz, kChosen, "container in flange frame");
  v.field("tool_rpy", c.robot.tool_rpy, kChosen);
  v.field("limits", c.robot.limits, kChosen, "per joint, base first");
  v.field("home", c.robot.home, kChosen, "q_0 for every trial");
  v.end();

  SimConfig& s = c.sim;
  v.begin("ballistics");
  v.field("k_ad", s.k_ad, kPublished, "drag coefficient, 1/m");
  v.field("horizon", s.horizon, kPublished, "prediction horizon, s");
  v.field("prediction_dt", s.prediction_dt, kChosen, "knot spacing, s");
  v.field("truth_dt", s.truth_dt, kChosen, "ground-truth RK4 step, s");
  v.field("measurement_rate", s.measurement_rate, kChosen, "Hz");
  v.field("measurement_sigma", s.measurement_sigma, kChosen, "m");
  v.field("process_noise_pos", s.process_noise_pos, kChosen, "m^2");
  v.field("process_noise_vel", s.process_noise_vel, kChosen, "m^2/s^2");
  v.field("initial_velocity_sigma", s.initial_velocity_sigma, kChosen,
          "EKF velocity prior, m/s");
  v.end();

  v.begin("capture");
  v.field("lambda_base", s.capture.lambda_base, kPublished);
  v.field("lambda_arm", s.capture.lambda_arm, kPublished);
  v.field("alpha", s.capture.alpha, kPublished, "late-catch reward");
  v.field("beta", s.capture.beta, kPublished, "height floor, m");
  v.field("t_grid_step", s.capture.t_grid_step, kChosen, "s");
  v.field("t_min", s.capture.t_min, kChosen, "s");
  v.field("pose_max_iterations", s.capture.pose_solve.max_iterations,
          kChosen);
  v.field("pose_tolerance", s.capture.pose_solve.tolerance, kChosen);
  v.field("pose_initial_damping", s.capture.pose_solve.initial_damping,
          kChosen);
  v.end();

  v.begin("prc");
  v.field("lambda", s.prc.lambda, kPublished, "planning-time inflation");
  v.end();

  v.begin("poc");
  v.field("gamma_z", s.poc.gamma_z, kPublished, "per tick");
  v.field("gamma_xy", s.poc.gamma_xy, kPublished, "per tick");
  v.field("z_safe", s.poc.z_safe, kChosen, "m");
  v.field("r_safe", s.poc.r_safe, kChosen, "m");
  v.field("slack_weight", s.poc.slack_weight, kChosen,
          "1 with --paper-literal");
  v.field("tick", s.poc.tick, kChosen, "s");
  v.field("max_backtracks", s.poc.max_backtracks, kChosen);
  v.end();

  v.begin("trial");
  v.field("observation_window", s.observation_window, kChosen, "s");
  v.field("control_rate", s.control_rate, kChosen, "Hz");
  v.field("aperture_radius", s.aperture_radius, kChosen, "catch test, m");
  v.field("alignment_max_deg", s.alignment_max_deg, kChosen, "catch test");
  v.field("ball_mass", s.ball_mass, kChosen, "kg");
  v.field("ground_margin", s.ground_margin, kChosen, "m");
  v.field("collision_radius", s.collision_radius, kChosen, "m");
  v.field("net_depth", s.net_depth, kChosen, "m");
  v.field("nominal_tau", s.nominal_tau, kChosen,
          "cushioning constant with --untrained, s");
  v.end();

  SamplingConfig& sp = s.sampling;
  v.begin("sampling");
  v.field("cylinder_radius", sp.cylinder_radius, kChosen, "m");
  v.field("cylinder_radius_min", sp.cylinder_radius_min, kChosen, "m");
  v.field("z_min", sp.z_min, kChosen, "m");
  v.field("z_max", sp.z_max, kChosen, "m");
  v.field("azimuth_half_width", sp.azimuth_half_width, kChosen, "rad");
  v.field("capture_center", sp.capture_center, kChosen, "m");
  v.field("capture_radius", sp.capture_radius, kChosen, "m");
  v.field("pass_time_min", sp.pass_time_min, kChosen, "s");
  v.field("flight_time_min", sp.flight_time_min, kChosen, "s");
  v.field("flight_time_max", sp.flight_time_max, kChosen, "s");
  v.field("max_speed", sp.max_speed, kChosen, "m/s");
  v.field("adversarial_fraction", sp.adversarial_fraction, kChosen);
  v.field("steep_aim_center", sp.steep_aim_center, kChosen, "m");
  v.field("steep_aim_radius", sp.steep_aim_radius, kChosen, "m");
  v.field("steep_flight_time_min", sp.steep_flight_time_min, kChosen, "s");
  v.field("steep_flight_time_max", sp.steep_flight_time_max, kChosen, "s");
  v.field("flat_aim_center", sp.flat_aim_center, kChosen, "m");
  v.field("flat_aim_radius", sp.flat_aim_radius, kChosen, "m");
  v.field("flat_flight_time_min", sp.flat_flight_time_min, kChosen, "s");
  v.field("flat_flight_time_max", sp.flat_flight_time_max, kChosen, "s");
  v.field("flat_azimuth", sp.flat_azimuth, kChosen, "rad");
  v.end();

  v.begin("train");
  v.field("hidden", c.train.hidden, kPublished, "LSTM hidden size");
  v.field("epochs", c.train.epochs, kChosen);
  v.field("batch_size", c.train.batch_size, kChosen);
  v.field("learning_rate", c.train.learning_rate, kPublished);
  v.field("beta1", c.train.beta1, kChosen);
  v.field("beta2", c.train.beta2, kChosen);
  v.field("epsilon", c.train.epsilon, kChosen);
  v.field("min_demos", c.train.min_demos, kChosen);
  v.field("shuffle", c.train.shuffle, kChosen);
  v.field("positional_encoding", c.train.model.use_positional_encoding,
          kPublished);
  v.field("sequence_length", c.train.model.sequence_length, kPublished,
          "output cap");
  v.end();

  v.begin("demos");
  v.field("count", c.demo_count, kChosen);
  v.field("cylinder_radius", c.demos.cylinder_radius, kChosen, "m");
  v.field("z_min", c.demos.z_min, kChosen, "m");
  v.field("z_max", c.demos.z_max, kChosen, "m");
  v.field("speed_min", c.demos.speed_min, kChosen, "m/s");
  v.field("speed_max", c.demos.speed_max, kChosen, "m/s");
  v.field("descent_min_deg", c.demos.descent_min_deg, kChosen);
  v.field("descent_max_deg", c.demos.descent_max_deg, kChosen);
  v.field("tau_min", c.demos.tau_min, kChosen, "s");
  v.field("tau_max", c.demos.tau_max, kChosen, "s");
  v.field("drift_sigma", c.demos.drift_sigma, kChosen, "m/s");
  v.field("dt", c.demos.dt, kChosen, "s");
  v.field("length", c.demos.length, kPublished, "label rows");
  v.end();
}

Mat3 rpy_rotation(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace

RobotSpec RobotSpec::defaults() {
  const RobotModel model = RobotModel::default_model();
  RobotSpec spec;
  spec.dh = model.arm_dh();
  spec.mount_xyz = model.mount().translation();
  spec.tool_xyz = model.tool().translation();
  spec.tool_rpy = Vec3(0.0, -std::numbers::pi / 2, 0.0);
  spec.limits = model.limits();
  spec.home = RobotModel::default_home();
  return spec;
}

RobotModel RobotSpec::build() const {
  Eigen::Isometry3d mount = Eigen::Isometry3d::Identity();
  mount.translation() = mount_xyz;
  mount.linear() = rpy_rotation(mount_rpy);
  Eigen::Isometry3d tool = Eigen::Isometry3d::Identity();
  tool.translation() = tool_xyz;
  tool.linear() = rpy_rotation(tool_rpy);
  try {
    RobotModel model(dh, mount, tool, limits);
    if (home.size() != model.dof() || !model.within_limits(home)) {
      throw Error(ErrorCode::kConfigError,
                  "robot.home must have " + std::to_string(model.dof()) +
                      " entries inside the joint limits");
    }
    return model;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidModel) {
      throw Error(ErrorCode::kConfigError, std::string("robot: ") + e.what());
    }
    throw;
  }
}

void RunConfig::set_paper_literal() { sim.poc.slack_weight = 1.0; }

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kConfigError, what);
  };
  sim.capture.validate();
  sim.prc.validate();
  sim.poc.validate();
  require(sim.k_ad >= 0.0, "ballistics.k_ad must be non-negative");
  require(sim.horizon > 0.0 && sim.horizon <= 3.0,
          "ballistics.horizon must lie in (0, 3]");
  require(sim.prediction_dt > 0.0 && sim.prediction_dt <= 0.01,
          "ballistics.prediction_dt must lie in (0, 0.01]");
  require(sim.truth_dt > 0.0 && sim.truth_dt <= 0.01,
          "ballistics.truth_dt must lie in (0, 0.01]");
  require(sim.measurement_rate > 0.0,
          "ballistics.measurement_rate must be positive");
  require(sim.measurement_sigma > 0.0,
          "ballistics.measurement_sigma must be positive");
  require(sim.observation_window >= 0.0,
          "trial.observation_window must be non-negative");
  require(sim.control_rate > 0.0, "trial.control_rate must be positive");
  require(sim.aperture_radius > 0.0, "trial.aperture_radius must be positive");
  require(sim.ball_mass > 0.0, "trial.ball_mass must be positive");
  require(sim.nominal_tau > 0.0, "trial.nominal_tau must be positive");
  const SamplingConfig& sp = sim.sampling;
  require(sp.cylinder_radius_min >= 0.0 &&
              sp.cylinder_radius_min < sp.cylinder_radius,
          "sampling: need 0 <= cylinder_radius_min < cylinder_radius");
  require(sp.z_min < sp.z_max, "sampling: need z_min < z_max");
  require(sp.flight_time_min > 0.0 && sp.flight_time_min <= sp.flight_time_max,
          "sampling: need 0 < flight_time_min <= flight_time_max");
  require(sp.adversarial_fraction >= 0.0 && sp.adversarial_fraction <= 1.0,
          "sampling.adversarial_fraction must lie in [0, 1]");
  require(train.hidden > 0 && train.epochs >= 0 && train.batch_size > 0,
          "train: hidden and batch_size must be positive, epochs >= 0");
  require(train.learning_rate > 0.0, "train.learning_rate must be positive");
  require(demo_count >= 1, "demos.count must be >= 1");
  require(demos.tau_min > 0.0 && demos.tau_min <= demos.tau_max,
          "demos: need 0 < tau_min <= tau_max");
  robot.build();
}

RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  Reader reader(j);
  visit_fields(reader, cfg);
  reader.finish();
  cfg.sim.home = cfg.robot.home;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfigError, path + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json to_json(const RunConfig& cfg) {
  RunConfig copy = cfg;
  Writer writer;
  visit_fields(writer, copy);
  return writer.result();
}

std::string defaults_markdown() {
  RunConfig cfg;
  DocWriter doc;
  visit_fields(doc, cfg);
  return "# Configuration defaults\n\n"
         "Generated by `cccm defaults`. Every key may be overridden in the "
         "JSON config; unknown keys are rejected. `published` marks values "
         "given with the published method, `chosen` marks values picked for "
         "this implementation.\n\n"
         "| key | default | source | note |\n"
         "|---|---|---|---|\n" +
         doc.result();
}

}  // namespace cccm
