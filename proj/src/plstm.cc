#include "cccm/plstm.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include <nlohmann/json.hpp>

#include "cccm/error.h"

namespace cccm {
namespace {

constexpr char kMagic[6] = {'P', 'L', 'S', 'T', 'M', '1'};

MatX sigmoid(const MatX& x) {
  return (1.0 + (-x.array()).exp()).inverse().matrix();
}

// Per-step activations kept for the backward pass.
struct StepCache {
  MatX x;  // token, 6 x B
  MatX i, f, g, o;
  MatX c, tanh_c, h;
};

struct Rollout {
  std::vector<MatX> outputs;  // L entries of 6 x B
  std::vector<StepCache> steps;
  MatX h0, c0;
};

Rollout run_batch(const PlstmParams& p, const MatX& inputs,
                  const PlstmOptions& opt, bool keep_cache) {
  const int hdim = p.hidden;
  const int batch = static_cast<int>(inputs.cols());
  const int len = opt.sequence_length;
  Rollout r;
  r.h0 = MatX::Zero(hdim, batch);
  r.c0 = MatX::Zero(hdim, batch);
  r.outputs.reserve(len);
  if (keep_cache) r.steps.reserve(len);

  MatX h = r.h0, c = r.c0;
  MatX token = inputs;
  for (int step = 0; step < len; ++step) {
    if (opt.use_positional_encoding) {
      token.colwise() += positional_encoding(step, kTokenDim);
    }
    MatX gates = p.w * token + p.u * h;
    gates.colwise() += p.b;
    StepCache sc;
    sc.i = sigmoid(gates.topRows(hdim));
    sc.f = sigmoid(gates.middleRows(hdim, hdim));
    sc.g = gates.middleRows(2 * hdim, hdim).array().tanh().matrix();
    sc.o = sigmoid(gates.bottomRows(hdim));
    c = (sc.f.array() * c.array() + sc.i.array() * sc.g.array()).matrix();
    sc.tanh_c = c.array().tanh().matrix();
    h = (sc.o.array() * sc.tanh_c.array()).matrix();
    MatX out = p.head_w * h;
    out.colwise() += p.head_b;
    r.outputs.push_back(out);
    if (keep_cache) {
      sc.x = token;
      sc.c = c;
      sc.h = h;
      r.steps.push_back(std::move(sc));
    }
    token = out;
  }
  return r;
}

void pack_demos(std::span<const Demonstration> demos, int len, MatX& inputs,
                std::vector<MatX>& targets) {
  const int batch = static_cast<int>(demos.size());
  inputs.resize(kTokenDim, batch);
  targets.assign(len, MatX(kTokenDim, batch));
  for (int j = 0; j < batch; ++j) {
    inputs.col(j) = demos[j].pre_catch;
    if (demos[j].label.rows() < len) {
      throw Error(ErrorCode::kInvalidDim, "demonstration label too short");
    }
    for (int t = 0; t < len; ++t) {
      targets[t].col(j) = demos[j].label.row(t).transpose();
    }
  }
}

template <typename Rng>
double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <typename M>
void write_block(std::ostream& out, const M& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
}

template <typename M>
void read_block(std::istream& in, M& m) {
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      m(r, c) = v;
    }
  }
}

}  // namespace

VecX positional_encoding(int l, int k) {
  if (k <= 0 || k % 2 != 0) {
    throw Error(ErrorCode::kInvalidDim,
                "positional encoding dimension must be even and positive");
  }
  if (l < 0) {
    throw Error(ErrorCode::kInvalidDim, "position index must be non-negative");
  }
  VecX pe(k);
  for (int i = 0; i < k / 2; ++i) {
    const double angle = l / std::pow(10000.0, 2.0 * i / k);
    pe[2 * i] = std::sin(angle);
    pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

PlstmParams PlstmParams::zeros(int hidden) {
  PlstmParams p;
  p.hidden = hidden;
  p.w = MatX::Zero(4 * hidden, kTokenDim);
  p.u = MatX::Zero(4 * hidden, hidden);
  p.b = VecX::Zero(4 * hidden);
  p.head_w = MatX::Zero(kTokenDim, hidden);
  p.head_b = VecX::Zero(kTokenDim);
  return p;
}

PlstmParams PlstmParams::init(int hidden, std::uint64_t seed) {
  if (hidden <= 0) throw Error(ErrorCode::kInvalidDim, "hidden size <= 0");
  PlstmParams p = zeros(hidden);
  std::mt19937_64 rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  VecX flat = p.flatten();
  for (int i = 0; i < flat.size(); ++i) flat[i] = uniform(rng, -k, k);
  p.unflatten(flat);
  return p;
}

int PlstmParams::num_parameters() const {
  return static_cast<int>(w.size() + u.size() + b.size() + head_w.size() +
                          head_b.size());
}

VecX PlstmParams::flatten() const {
  VecX flat(num_parameters());
  int at = 0;
  auto put = [&](const MatX& m) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) flat[at++] = m(r, c);
    }
  };
  put(w);
  put(u);
  put(b);
  put(head_w);
  put(head_b);
  return flat;
}

void PlstmParams::unflatten(const VecX& flat) {
  if (flat.size() != num_parameters()) {
    throw Error(ErrorCode::kInvalidDim, "parameter vector has wrong length");
  }
  int at = 0;
  auto take = [&](auto& m) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) m(r, c) = flat[at++];
    }
  };
  take(w);
  take(u);
  take(b);
  take(head_w);
  take(head_b);
}

bool PlstmParams::all_finite() const {
  return w.allFinite() && u.allFinite() && b.allFinite() &&
         head_w.allFinite() && head_b.allFinite();
}

void PlstmParams::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t dims[3] = {kTokenDim, static_cast<std::uint32_t>(hidden),
                                 kTokenDim};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  write_block(out, w);
  write_block(out, u);
  write_block(out, b);
  write_block(out, head_w);
  write_block(out, head_b);
}

PlstmParams PlstmParams::load(std::istream& in) {
  char magic[6] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kParseError, "parameter file lacks PLSTM1 magic");
  }
  std::uint32_t dims[3] = {};
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || dims[0] != kTokenDim || dims[2] != kTokenDim || dims[1] == 0 ||
      dims[1] > 4096) {
    throw Error(ErrorCode::kParseError, "parameter file has invalid dims");
  }
  PlstmParams p = zeros(static_cast<int>(dims[1]));
  read_block(in, p.w);
  read_block(in, p.u);
  read_block(in, p.b);
  read_block(in, p.head_w);
  read_block(in, p.head_b);
  if (!in) throw Error(ErrorCode::kParseError, "parameter file truncated");
  return p;
}

void PlstmParams::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  save(out);
}

PlstmParams PlstmParams::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path);
  return load(in);
}

SequenceMatrix plstm_forward(const PlstmParams& params, const Vec6& input,
                             const PlstmOptions& options) {
  const Rollout r = run_batch(params, MatX(input), options, false);
  SequenceMatrix out(options.sequence_length, kTokenDim);
  for (int t = 0; t < options.sequence_length; ++t) {
    out.row(t) = r.outputs[t].col(0).transpose();
  }
  return out;
}

double plstm_loss(const PlstmParams& params,
                  std::span<const Demonstration> demos,
                  const PlstmOptions& options) {
  MatX inputs;
  std::vector<MatX> targets;
  pack_demos(demos, options.sequence_length, inputs, targets);
  const Rollout r = run_batch(params, inputs, options, false);
  double sum = 0.0;
  for (int t = 0; t < options.sequence_length; ++t) {
    sum += (r.outputs[t] - targets[t]).squaredNorm();
  }
  return sum / (double(demos.size()) * options.sequence_length * kTokenDim);
}

LossAndGradient plstm_loss_and_gradient(const PlstmParams& p,
                                        std::span<const Demonstration> demos,
                                        const PlstmOptions& options) {
  const int len = options.sequence_length;
  const int hdim = p.hidden;
  MatX inputs;
  std::vector<MatX> targets;
  pack_demos(demos, len, inputs, targets);
  const int batch = static_cast<int>(inputs.cols());
  const Rollout r = run_batch(p, inputs, options, true);

  const double scale = 1.0 / (double(batch) * len * kTokenDim);
  LossAndGradient result;
  for (int t = 0; t < len; ++t) {
    result.loss += (r.outputs[t] - targets[t]).squaredNorm();
  }
  result.loss *= scale;

  PlstmParams grad = PlstmParams::zeros(hdim);
  MatX dh_next = MatX::Zero(hdim, batch);
  MatX dc_next = MatX::Zero(hdim, batch);
  MatX dtoken_next = MatX::Zero(kTokenDim, batch);
  MatX dgates(4 * hdim, batch);

  for (int t = len - 1; t >= 0; --t) {
    const StepCache& sc = r.steps[t];
    // Output t feeds token t+1 as well as the loss.
    MatX dout = 2.0 * scale * (r.outputs[t] - targets[t]);
    if (t + 1 < len) dout += dtoken_next;
    grad.head_w.noalias() += dout * sc.h.transpose();
    grad.head_b += dout.rowwise().sum();

    const MatX dh = p.head_w.transpose() * dout + dh_next;
    const MatX& c_prev = t > 0 ? r.steps[t - 1].c : r.c0;
    const MatX& h_prev = t > 0 ? r.steps[t - 1].h : r.h0;

    const auto tc = sc.tanh_c.array();
    const MatX dc = (dh.array() * sc.o.array() * (1.0 - tc * tc) +
                     dc_next.array())
                        .matrix();
    const auto ia = sc.i.array(), fa = sc.f.array(), ga = sc.g.array(),
               oa = sc.o.array();
    dgates.topRows(hdim) = (dc.array() * ga * ia * (1.0 - ia)).matrix();
    dgates.middleRows(hdim, hdim) =
        (dc.array() * c_prev.array() * fa * (1.0 - fa)).matrix();
    dgates.middleRows(2 * hdim, hdim) =
        (dc.array() * ia * (1.0 - ga * ga)).matrix();
    dgates.bottomRows(hdim) = (dh.array() * tc * oa * (1.0 - oa)).matrix();

    grad.w.noalias() += dgates * sc.x.transpose();
    grad.u.noalias() += dgates * h_prev.transpose();
    grad.b += dgates.rowwise().sum();

    dtoken_next = p.w.transpose() * dgates;
    dh_next = p.u.transpose() * dgates;
    dc_next = (dc.array() * fa).matrix();
  }
  result.gradient = grad.flatten();
  return result;
}

TrainResult plstm_train(std::span<const Demonstration> demos,
                        const TrainConfig& cfg, std::uint64_t seed) {
  if (static_cast<int>(demos.size()) < cfg.min_demos) {
    throw Error(ErrorCode::kInvalidDim,
                "training needs at least " + std::to_string(cfg.min_demos) +
                    " demonstrations, got " + std::to_string(demos.size()));
  }
  if (cfg.batch_size <= 0 || cfg.epochs < 0) {
    throw Error(ErrorCode::kConfigError, "invalid batch size or epoch count");
  }
  TrainResult result;
  result.params = PlstmParams::init(cfg.hidden, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);

  VecX theta = result.params.flatten();
  VecX m = VecX::Zero(theta.size());
  VecX v = VecX::Zero(theta.size());
  long step = 0;

  const int n = static_cast<int>(demos.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Demonstration> batch;
  batch.reserve(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      batch.clear();
      for (int k = start; k < stop; ++k) batch.push_back(demos[order[k]]);

      result.params.unflatten(theta);
      const LossAndGradient lg =
          plstm_loss_and_gradient(result.params, batch, cfg.model);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        throw Error(ErrorCode::kTrainingDiverged,
                    "training diverged at epoch " + std::to_string(epoch));
      }
      epoch_loss += lg.loss * (stop - start);

      ++step;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * lg.gradient;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * lg.gradient.cwiseAbs2();
      const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
      theta.array() -= cfg.learning_rate * (m.array() / bc1) /
                       ((v.array() / bc2).sqrt() + cfg.epsilon);
    }
    result.loss_curve.push_back(epoch_loss / n);
  }
  result.params.unflatten(theta);
  return result;
}

int detect_catch_index(std::span<const TrackSample> track) {
  if (track.size() < 3) {
    throw Error(ErrorCode::kInvalidTrack,
                "catch detection needs at least 3 samples");
  }
  int best = 0;
  double best_var = -1.0;
  for (std::size_t k = 0; k + 1 < track.size(); ++k) {
    const double var = (track[k + 1].v - track[k].v).cwiseAbs().mean();
    if (var > best_var) {
      best_var = var;
      best = static_cast<int>(k);
    }
  }
  return best;
}

SequenceMatrix cushioning_label(const Vec3& pdot, double tau,
                                const DemoConfig& cfg) {
  SequenceMatrix label = SequenceMatrix::Zero(cfg.length, kTokenDim);
  for (int j = 1; j <= cfg.length; ++j) {
    label.row(j - 1).head<3>() =
        (pdot * std::exp(-j * cfg.dt / tau)).transpose();
  }
  return label;
}

std::vector<Demonstration> generate_demos(int count, std::uint64_t seed,
                                          const DemoConfig& cfg) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Demonstration> demos;
  demos.reserve(std::max(count, 0));
  constexpr double kDeg = std::numbers::pi / 180.0;
  for (int n = 0; n < count; ++n) {
    const double r = cfg.cylinder_radius * std::sqrt(uniform(rng, 0.0, 1.0));
    const double theta = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const Vec3 p(r * std::cos(theta), r * std::sin(theta),
                 uniform(rng, cfg.z_min, cfg.z_max));
    const double speed = uniform(rng, cfg.speed_min, cfg.speed_max);
    const double heading = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double descent =
        uniform(rng, cfg.descent_min_deg, cfg.descent_max_deg) * kDeg;
    const Vec3 pdot = speed * Vec3(std::cos(descent) * std::cos(heading),
                                   std::cos(descent) * std::sin(heading),
                                   -std::sin(descent));
    const double tau = uniform(rng, cfg.tau_min, cfg.tau_max);

    Demonstration demo;
    demo.pre_catch << p, pdot;
    demo.label = cushioning_label(pdot, tau, cfg);
    // Random-walk drift in the plane normal to the incoming velocity.
    const Vec3 dir = pdot.normalized();
    const Vec3 e1 = dir.cross(std::abs(dir.z()) < 0.9 ? Vec3::UnitZ()
                                                      : Vec3::UnitX())
                        .normalized();
    const Vec3 e2 = dir.cross(e1);
    Vec3 drift = Vec3::Zero();
    for (int j = 0; j < cfg.length; ++j) {
      const double n1 = normal(rng);
      const double n2 = normal(rng);
      drift += cfg.drift_sigma * (n1 * e1 + n2 * e2);
      demo.label.row(j).head<3>() += drift.transpose();
    }
    demos.push_back(std::move(demo));
  }
  return demos;
}

void write_demos_jsonl(std::ostream& out,
                       std::span<const Demonstration> demos) {
  for (const Demonstration& d : demos) {
    nlohmann::json j;
    j["p"] = {d.pre_catch[0], d.pre_catch[1], d.pre_catch[2]};
    j["v"] = {d.pre_catch[3], d.pre_catch[4], d.pre_catch[5]};
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < d.label.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < kTokenDim; ++c) row.push_back(d.label(r, c));
      rows.push_back(row);
    }
    j["label"] = rows;
    out << j.dump() << "\n";
  }
}

std::vector<Demonstration> read_demos_jsonl(std::istream& in) {
  std::vector<Demonstration> demos;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      Demonstration d;
      for (int k = 0; k < 3; ++k) {
        d.pre_catch[k] = j.at("p").at(k).get<double>();
        d.pre_catch[3 + k] = j.at("v").at(k).get<double>();
      }
      const auto& rows = j.at("label");
      d.label.resize(static_cast<int>(rows.size()), kTokenDim);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != kTokenDim) throw std::runtime_error("row width");
        for (int c = 0; c < kTokenDim; ++c) {
          d.label(static_cast<int>(r), c) = rows[r][c].get<double>();
        }
      }
      demos.push_back(std::move(d));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kParseError, "demo line " +
                                              std::to_string(line_no) + ": " +
                                              e.what());
    }
  }
  return demos;
}

}  // namespace cccm
