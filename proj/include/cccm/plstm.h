#ifndef CCCM_PLSTM_H_
#define CCCM_PLSTM_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cccm/model.h"

namespace cccm {

inline constexpr int kTokenDim = 6;
inline constexpr int kDefaultHidden = 64;
inline constexpr int kSequenceLength = 16;

using SequenceMatrix = Eigen::Matrix<double, Eigen::Dynamic, kTokenDim>;

// Interleaved sinusoidal encoding: entry 2i is sin(l / 10000^(2i/k)),
// entry 2i+1 the matching cos. Throws Error(kInvalidDim) for odd or
// non-positive k.
VecX positional_encoding(int l, int k);

// One LSTM cell (gate order i, f, g, o; single bias) and a linear head
// from the hidden state to a 6-d twist.
struct PlstmParams {
  int hidden = kDefaultHidden;
  MatX w;       // 4H x 6
  MatX u;       // 4H x H
  VecX b;       // 4H
  MatX head_w;  // 6 x H
  VecX head_b;  // 6

  // Uniform(-k, k), k = 1/sqrt(H), from a seeded 64-bit Mersenne twister.
  static PlstmParams init(int hidden, std::uint64_t seed);
  static PlstmParams zeros(int hidden);

  int num_parameters() const;
  VecX flatten() const;
  void unflatten(const VecX& flat);
  bool all_finite() const;

  // "PLSTM1", then uint32 input, hidden, output dims, then row-major
  // float64 blocks W, U, b, head_w, head_b.
  void save(std::ostream& out) const;
  static PlstmParams load(std::istream& in);
  void save_file(const std::string& path) const;
  static PlstmParams load_file(const std::string& path);
};

struct PlstmOptions {
  bool use_positional_encoding = true;
  int sequence_length = kSequenceLength;
};

// Autoregressive rollout. Token 1 is input + PE(0); token i is
// out_{i-1} + PE(i-1). The shared cell runs over the token sequence from a
// zero state and the head maps the last hidden state to out_i. Since earlier
// tokens never change, re-encoding the prefix equals carrying the state
// forward one token at a time, which is what this does.
SequenceMatrix plstm_forward(const PlstmParams& params, const Vec6& input,
                             const PlstmOptions& options = {});

struct Demonstration {
  Vec6 pre_catch = Vec6::Zero();  // (p, pdot) at the catch moment
  SequenceMatrix label;           // 16 x 6 post-catch container twists
};

// Mean squared error over a batch of demos and its gradient (flattened in
// the same order as PlstmParams::flatten), by backpropagation through the
// unrolled rollout including the feedback of outputs into later tokens.
struct LossAndGradient {
  double loss = 0.0;
  VecX gradient;
};
LossAndGradient plstm_loss_and_gradient(const PlstmParams& params,
                                        std::span<const Demonstration> demos,
                                        const PlstmOptions& options = {});
double plstm_loss(const PlstmParams& params,
                  std::span<const Demonstration> demos,
                  const PlstmOptions& options = {});

struct TrainConfig {
  int hidden = kDefaultHidden;
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int min_demos = 100;
  bool shuffle = true;
  PlstmOptions model;
};

struct TrainResult {
  PlstmParams params;
  std::vector<double> loss_curve;  // per-epoch mean training loss
};

// Adam on mini-batches, no teacher forcing. Throws Error(kTrainingDiverged)
// naming the epoch if the loss becomes non-finite, and Error(kInvalidDim)
// for fewer than min_demos demos.
TrainResult plstm_train(std::span<const Demonstration> demos,
                        const TrainConfig& cfg, std::uint64_t seed);

struct TrackSample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

// argmax_k mean_axes |v[k+1] - v[k]|, earliest on ties. Throws
// Error(kInvalidTrack) for fewer than 3 samples.
int detect_catch_index(std::span<const TrackSample> track);

struct DemoConfig {
  double cylinder_radius = 1.5;  // m, catch positions around the origin
  double z_min = 0.4;
  double z_max = 1.6;
  double speed_min = 2.0;  // m/s
  double speed_max = 6.0;
  // Descent angle below horizontal, degrees.
  double descent_min_deg = 10.0;
  double descent_max_deg = 70.0;
  double tau_min = 0.1;  // s
  double tau_max = 0.3;
  double drift_sigma = 0.02;  // m/s, lateral random walk step
  double dt = 0.02;
  int length = kSequenceLength;
};

// Noise-free cushioning profile: row j (1-based) is pdot exp(-j dt / tau),
// angular rows zero. generate_demos adds the lateral drift on top.
SequenceMatrix cushioning_label(const Vec3& pdot, double tau,
                                const DemoConfig& cfg);

std::vector<Demonstration> generate_demos(int count, std::uint64_t seed,
                                          const DemoConfig& cfg = {});

// Demonstrations as JSON lines: {"p":[3],"v":[3],"label":[[6] x 16]}.
void write_demos_jsonl(std::ostream& out, std::span<const Demonstration> demos);
std::vector<Demonstration> read_demos_jsonl(std::istream& in);

}  // namespace cccm

#endif  // CCCM_PLSTM_H_
