#ifndef CCCM_CONFIG_H_
#define CCCM_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cccm/model.h"
#include "cccm/plstm.h"
#include "cccm/sim.h"

namespace cccm {

// Robot description as it appears in the config file. Rotations are
// roll-pitch-yaw, R = Rz(yaw) Ry(pitch) Rx(roll).
struct RobotSpec {
  std::vector<DhRow> dh;
  Vec3 mount_xyz = Vec3::Zero();
  Vec3 mount_rpy = Vec3::Zero();
  Vec3 tool_xyz = Vec3::Zero();
  Vec3 tool_rpy = Vec3::Zero();
  std::vector<JointLimit> limits;
  Configuration home;

  static RobotSpec defaults();
  // Throws Error(kConfigError) when the model rejects the description or
  // the home pose does not fit it.
  RobotModel build() const;
};

struct RunConfig {
  std::uint64_t seed = 7;
  RobotSpec robot = RobotSpec::defaults();
  SimConfig sim;
  TrainConfig train;
  DemoConfig demos;
  int demo_count = 2000;

  // Applies --paper-literal: equal weights on joint speed and slack.
  void set_paper_literal();
  // Range checks across sections. Throws Error(kConfigError).
  void validate() const;
};

// Strict: unknown keys and wrong types are Error(kConfigError) naming the
// JSON path. Missing keys keep their defaults.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Complete, resolved config; parse_run_config(to_json(c)) reproduces c.
nlohmann::json to_json(const RunConfig& cfg);

// Markdown table of every key, its default and where the value comes from.
std::string defaults_markdown();

}  // namespace cccm

#endif  // CCCM_CONFIG_H_
