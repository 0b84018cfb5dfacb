#include "cccm/io.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cccm/error.h"

namespace cccm {
namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw Error(ErrorCode::kParseError,
              "line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& s, int line) {
  double value = 0.0;
  const char* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (s.empty() || ec != std::errc() || ptr != end) {
    parse_error(line, "'" + s + "' is not a number");
  }
  return value;
}

json vec_json(const VecX& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json impact_json(const ImpactStats& s) {
  return {{"count", s.count},
          {"mean", s.mean},
          {"median", s.median},
          {"max", s.max}};
}

}  // namespace

std::vector<TimedPosition> read_track_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool header = false;
  std::vector<TimedPosition> track;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (!header) {
      if (fields != std::vector<std::string>{"t", "x", "y", "z"}) {
        parse_error(line_no, "expected header t,x,y,z");
      }
      header = true;
      continue;
    }
    if (fields.size() != 4) {
      parse_error(line_no, "expected 4 fields, got " +
                               std::to_string(fields.size()));
    }
    TimedPosition s;
    s.t = parse_number(fields[0], line_no);
    for (int i = 0; i < 3; ++i) s.p[i] = parse_number(fields[i + 1], line_no);
    if (!track.empty() && !(s.t > track.back().t)) {
      parse_error(line_no, "time does not increase");
    }
    track.push_back(s);
  }
  if (!header) parse_error(1, "expected header t,x,y,z");
  if (track.empty()) parse_error(line_no + 1, "no samples after the header");
  return track;
}

std::vector<TimedPosition> read_track_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  try {
    return read_track_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_prediction_csv(std::ostream& out, const BallPrediction& prediction) {
  out << "t,x,y,z,vx,vy,vz\n";
  char buf[256];
  for (const PredictionKnot& k : prediction.knots()) {
    std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                  prediction.start_time() + k.t, k.p.x(), k.p.y(), k.p.z(),
                  k.v.x(), k.v.y(), k.v.z());
    out << buf;
  }
}

json trial_json(const TrialOutcome& outcome, bool with_rollout) {
  const TrialLog& log = outcome.log;
  json j = {{"class", outcome_name(outcome.cls)},
            {"impact_proxy", outcome.impact_proxy},
            {"safety_stop", outcome.safety_stop}};
  j["catch_error"] =
      outcome.catch_error ? json(*outcome.catch_error) : json(nullptr);
  if (!log.reason.empty()) j["reason"] = log.reason;
  j["t_observe"] = log.t_observe;
  if (log.q_ca.size() > 0) {
    j["t_catch"] = log.t_catch;
    j["t_prc"] = log.t_prc;
    j["q_ca"] = vec_json(log.q_ca);
    j["predicted_p"] = vec_json(log.predicted_p);
    j["predicted_v"] = vec_json(log.predicted_v);
  }
  if (log.catch_tested) {
    j["ball_p"] = vec_json(log.ball_p);
    j["ball_v"] = vec_json(log.ball_v);
    j["alignment_deg"] = log.alignment_deg;
  }
  if (with_rollout) {
    j["ball_speed"] = log.ball_speed;
    json ticks = json::array();
    for (const PocLogEntry& e : log.rollout.log) {
      ticks.push_back({{"t", e.t},
                       {"q", vec_json(e.q)},
                       {"f", e.f},
                       {"g", e.g},
                       {"slack", e.slack_norm},
                       {"z_active", e.z_active},
                       {"xy_active", e.xy_active}});
    }
    j["rollout"] = std::move(ticks);
  }
  return j;
}

json report_json(const MonteCarloReport& report) {
  json counts = json::object();
  json rates = json::object();
  for (int c = 0; c < 4; ++c) {
    const auto cls = static_cast<OutcomeClass>(c);
    counts[outcome_name(cls)] = report.counts[c];
    rates[outcome_name(cls)] = report.rate(cls);
  }
  return {{"mode", trial_mode_name(report.mode)},
          {"seed", report.seed},
          {"n", report.n},
          {"counts", counts},
          {"rates", rates},
          {"impact_proxy", impact_json(report.impact)}};
}

json ablation_json(const AblationReport& report) {
  json modes = json::array();
  for (const MonteCarloReport& m : report.modes) modes.push_back(report_json(m));
  return {{"modes", modes},
          {"impact_pairs",
           {{"shared_successes", report.shared_successes},
            {"full_lower", report.full_lower_impact},
            {"median_reduction", report.median_reduction}}}};
}

std::string ablation_table(const AblationReport& report) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %9s %12s %10s %9s %12s\n", "mode",
                "Success", "GroundCrash", "BaseCrash", "NotCatch",
                "impact_med");
  out += buf;
  for (const MonteCarloReport& m : report.modes) {
    std::snprintf(buf, sizeof buf, "%-6s %8.2f%% %11.2f%% %9.2f%% %8.2f%% %12.4f\n",
                  trial_mode_name(m.mode),
                  100.0 * m.rate(OutcomeClass::kSuccess),
                  100.0 * m.rate(OutcomeClass::kGroundCrash),
                  100.0 * m.rate(OutcomeClass::kBaseCrash),
                  100.0 * m.rate(OutcomeClass::kNotCatch), m.impact.median);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "impact pairs %d, full lower %d, median reduction %.1f%%\n",
                report.shared_successes, report.full_lower_impact,
                100.0 * report.median_reduction);
  out += buf;
  return out;
}

}  // namespace cccm
