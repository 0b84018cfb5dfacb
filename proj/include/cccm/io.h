#ifndef CCCM_IO_H_
#define CCCM_IO_H_

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cccm/ballistics.h"
#include "cccm/sim.h"

namespace cccm {

// CSV with header "t,x,y,z" (whitespace around fields allowed, blank lines
// skipped). Throws Error(kParseError) with "line N:" for the first bad line.
std::vector<TimedPosition> read_track_csv(std::istream& in);
std::vector<TimedPosition> read_track_csv_file(const std::string& path);

// Absolute time, position and velocity of every knot.
void write_prediction_csv(std::ostream& out, const BallPrediction& prediction);

nlohmann::json trial_json(const TrialOutcome& outcome, bool with_rollout);
nlohmann::json report_json(const MonteCarloReport& report);
nlohmann::json ablation_json(const AblationReport& report);

// Fixed-width table: one row per mode with per-class rates.
std::string ablation_table(const AblationReport& report);

}  // namespace cccm

#endif  // CCCM_IO_H_
