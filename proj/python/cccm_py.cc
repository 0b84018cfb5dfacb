#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cccm/ballistics.h"
#include "cccm/config.h"
#include "cccm/error.h"
#include "cccm/io.h"
#include "cccm/prc.h"
#include "cccm/sim.h"

namespace py = pybind11;
using namespace cccm;

namespace {

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig run_config(const py::object& config) {
  if (config.is_none()) return RunConfig{};
  const std::string text =
      py::module_::import("json").attr("dumps")(config).cast<std::string>();
  return parse_run_config(nlohmann::json::parse(text));
}

std::vector<TimedPosition> track_from(const Eigen::MatrixXd& rows) {
  if (rows.cols() != 4) {
    throw Error(ErrorCode::kInvalidDim, "track must have columns t, x, y, z");
  }
  std::vector<TimedPosition> track;
  for (int r = 0; r < rows.rows(); ++r) {
    track.push_back({rows(r, 0), Vec3(rows(r, 1), rows(r, 2), rows(r, 3))});
  }
  return track;
}

CompliancePolicy policy_from(const RunConfig& cfg, const std::string& params) {
  if (params.empty()) return CompliancePolicy::nominal(cfg.sim.nominal_tau, cfg.demos);
  return CompliancePolicy::network(PlstmParams::load_file(params),
                                   cfg.train.model);
}

}  // namespace

PYBIND11_MODULE(cccm, m) {
  m.doc() = "Compliant catching simulator";

  py::register_exception<Error>(m, "Error");

  m.def("default_home", &RobotModel::default_home);

  m.def(
      "forward_kinematics",
      [](const Configuration& q) {
        return Mat4(forward_kinematics(RobotModel::default_model(), q)
                        .transform.matrix());
      },
      py::arg("q"), "Container pose of the default robot as a 4x4 matrix.");

  m.def(
      "jacobian",
      [](const Configuration& q) {
        return MatX(extended_jacobian(RobotModel::default_model(), q));
      },
      py::arg("q"));

  m.def("min_time", &min_time, py::arg("dq"), py::arg("qd_max"),
        py::arg("qdd_max"));

  m.def(
      "prc_duration",
      [](const Configuration& q_0, const Configuration& q_ca, double lambda) {
        PrcConfig cfg;
        cfg.lambda = lambda;
        return plan_prc(RobotModel::default_model(), q_0, q_ca, cfg).duration();
      },
      py::arg("q_0"), py::arg("q_ca"), py::arg("lambda_") = 1.5);

  m.def("positional_encoding", &positional_encoding, py::arg("l"),
        py::arg("k") = kTokenDim);

  m.def(
      "filter_track",
      [](const Eigen::MatrixXd& rows, double k_ad, double sigma) {
        TrackFilterConfig cfg;
        cfg.k_ad = k_ad;
        cfg.measurement_sigma = sigma;
        const BallBelief b = filter_track(track_from(rows), cfg);
        return py::make_tuple(Vec6(b.mean), Mat6(b.cov), b.t);
      },
      py::arg("track"), py::arg("k_ad") = kDefaultDragCoefficient,
      py::arg("sigma") = 0.005,
      "EKF over rows (t, x, y, z); returns (mean, covariance, time).");

  m.def(
      "predict",
      [](const Vec6& state, double horizon, double dt, double k_ad) {
        BallBelief b;
        b.mean = state;
        const BallPrediction pred = predict(b, horizon, dt, k_ad);
        MatX out(pred.knots().size(), 7);
        for (std::size_t k = 0; k < pred.knots().size(); ++k) {
          const PredictionKnot& kn = pred.knots()[k];
          out.row(k) << kn.t, kn.p.transpose(), kn.v.transpose();
        }
        return out;
      },
      py::arg("state"), py::arg("horizon") = 1.5, py::arg("dt") = 0.005,
      py::arg("k_ad") = kDefaultDragCoefficient,
      "Knots as rows (t, x, y, z, vx, vy, vz).");

  m.def(
      "estimate_drag",
      [](const Eigen::MatrixXd& rows) { return estimate_drag(track_from(rows)); },
      py::arg("track"));

  m.def(
      "default_config", [] { return to_python(to_json(RunConfig{})); },
      "Complete default run config as a dict.");

  m.def(
      "simulate",
      [](const Vec6& ball, std::uint64_t seed, const std::string& mode,
         const py::object& config, const std::string& params) {
        const RunConfig cfg = run_config(config);
        TrialSpec spec;
        spec.ball = ball;
        spec.seed = seed;
        spec.observation_window = cfg.sim.observation_window;
        spec.control_rate = cfg.sim.control_rate;
        const TrialOutcome out =
            run_trial(cfg.robot.build(), spec, policy_from(cfg, params),
                      parse_trial_mode(mode), cfg.sim);
        return to_python(trial_json(out, false));
      },
      py::arg("ball"), py::arg("seed") = 0, py::arg("mode") = "full",
      py::arg("config") = py::none(), py::arg("params") = "");

  m.def(
      "monte_carlo",
      [](int n, std::uint64_t seed, const std::string& mode,
         const py::object& config, const std::string& params) {
        const RunConfig cfg = run_config(config);
        return to_python(report_json(
            monte_carlo(cfg.robot.build(), n, seed, parse_trial_mode(mode),
                        policy_from(cfg, params), cfg.sim)));
      },
      py::arg("n"), py::arg("seed") = 7, py::arg("mode") = "full",
      py::arg("config") = py::none(), py::arg("params") = "");
}
