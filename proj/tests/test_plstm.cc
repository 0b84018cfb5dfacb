#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cccm/error.h"
#include "cccm/plstm.h"
#include "test_util.h"

namespace cccm {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec6 sample_input() {
  Vec6 x;
  x << 0.4, -0.2, 0.9, 1.5, -0.5, -2.0;
  return x;
}

PlstmParams random_params(int hidden, std::uint64_t seed, double scale) {
  PlstmParams p = PlstmParams::zeros(hidden);
  std::mt19937_64 rng(seed);
  p.unflatten(testing::random_vector(p.num_parameters(), rng, scale));
  return p;
}

TEST(PositionalEncoding, Values) {
  const VecX row0 = positional_encoding(0, 6);
  VecX expected(6);
  expected << 0, 1, 0, 1, 0, 1;
  EXPECT_EQ(row0, expected);
  EXPECT_NEAR(positional_encoding(1, 6)[0], 0.84147, 1e-5);
  EXPECT_NEAR(positional_encoding(3, 6)[3], std::cos(3.0 / std::pow(1e4, 2.0 / 6)),
              1e-15);
  for (int l = 0; l < 200; ++l) {
    EXPECT_LE(positional_encoding(l, 6).cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(PositionalEncoding, RejectsOddDimension) {
  try {
    positional_encoding(1, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDim);
  }
  EXPECT_THROW(positional_encoding(-1, 6), Error);
}

TEST(PlstmForward, DeadNetworkEmitsHeadBias) {
  PlstmParams p = PlstmParams::zeros(8);
  p.head_b << 1, 2, 3, 4, 5, 6;
  const SequenceMatrix out = plstm_forward(p, sample_input());
  ASSERT_EQ(out.rows(), 16);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(out.row(i).transpose(), p.head_b);
}

TEST(PlstmForward, Deterministic) {
  const PlstmParams p = PlstmParams::init(16, 42);
  EXPECT_EQ(plstm_forward(p, sample_input()), plstm_forward(p, sample_input()));
  EXPECT_EQ(PlstmParams::init(16, 42).flatten(), p.flatten());
  EXPECT_NE(PlstmParams::init(16, 43).flatten(), p.flatten());
}

TEST(PlstmForward, InitRange) {
  const PlstmParams p = PlstmParams::init(16, 1);
  EXPECT_LE(p.flatten().cwiseAbs().maxCoeff(), 0.25);
  EXPECT_EQ(p.num_parameters(), 4 * 16 * 6 + 4 * 16 * 16 + 4 * 16 + 6 * 16 + 6);
}

// Two hidden units, gate arithmetic written out by hand.
TEST(PlstmForward, MatchesHandUnrolledCell) {
  const PlstmParams p = random_params(2, 5, 0.5);
  const Vec6 input = sample_input();

  Eigen::Vector2d h = Eigen::Vector2d::Zero(), c = Eigen::Vector2d::Zero();
  Vec6 token = input;
  std::vector<Vec6> expected;
  for (int step = 0; step < 3; ++step) {
    token += positional_encoding(step, 6);
    Eigen::Vector2d hn, cn;
    for (int u = 0; u < 2; ++u) {
      auto pre = [&](int gate) {
        const int r = gate * 2 + u;
        return p.w.row(r).dot(token) + p.u.row(r).dot(h) + p.b[r];
      };
      const double ig = sigmoid(pre(0));
      const double fg = sigmoid(pre(1));
      const double gg = std::tanh(pre(2));
      const double og = sigmoid(pre(3));
      cn[u] = fg * c[u] + ig * gg;
      hn[u] = og * std::tanh(cn[u]);
    }
    h = hn;
    c = cn;
    const Vec6 out = p.head_w * h + p.head_b;
    expected.push_back(out);
    token = out;
  }
  const SequenceMatrix got = plstm_forward(p, input);
  for (int i = 0; i < 3; ++i) {
    EXPECT_LT((got.row(i).transpose() - expected[i]).norm(), 1e-14);
  }
}

TEST(PlstmForward, CarriedStateEqualsReencodingThePrefix) {
  const PlstmParams p = random_params(3, 6, 0.4);
  const SequenceMatrix out = plstm_forward(p, sample_input());
  // Re-run the cell over the whole prefix from zero state for step 5.
  const int target = 4;
  Eigen::Vector3d h = Eigen::Vector3d::Zero(), c = Eigen::Vector3d::Zero();
  for (int step = 0; step <= target; ++step) {
    Vec6 token = step == 0 ? sample_input() : Vec6(out.row(step - 1).transpose());
    token += positional_encoding(step, 6);
    const VecX gates = p.w * token + p.u * h + p.b;
    const auto sig = [](const VecX& x) {
      return (1.0 / (1.0 + (-x.array()).exp())).matrix().eval();
    };
    const VecX i = sig(gates.segment(0, 3));
    const VecX f = sig(gates.segment(3, 3));
    const VecX g = gates.segment(6, 3).array().tanh().matrix();
    const VecX o = sig(gates.segment(9, 3));
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    h = (o.array() * c.array().tanh()).matrix();
  }
  const Vec6 expected = p.head_w * h + p.head_b;
  EXPECT_LT((out.row(target).transpose() - expected).norm(), 1e-13);
}

std::vector<Demonstration> small_demos(int n, std::uint64_t seed) {
  return generate_demos(n, seed);
}

TEST(PlstmGradient, MatchesCentralDifferences) {
  PlstmParams p = random_params(4, 9, 0.3);
  const std::vector<Demonstration> demos = small_demos(3, 10);
  for (bool pe : {true, false}) {
    PlstmOptions opt;
    opt.use_positional_encoding = pe;
    const LossAndGradient lg = plstm_loss_and_gradient(p, demos, opt);
    EXPECT_NEAR(lg.loss, plstm_loss(p, demos, opt), 1e-14);
    const VecX theta = p.flatten();
    VecX fd(theta.size());
    const double eps = 1e-5;
    for (int k = 0; k < theta.size(); ++k) {
      VecX plus = theta, minus = theta;
      plus[k] += eps;
      minus[k] -= eps;
      PlstmParams a = p, b = p;
      a.unflatten(plus);
      b.unflatten(minus);
      fd[k] = (plstm_loss(a, demos, opt) - plstm_loss(b, demos, opt)) / (2 * eps);
    }
    EXPECT_LT((lg.gradient - fd).norm() / fd.norm(), 1e-4);
  }
}

TEST(PlstmTrain, MemorizesOneDemo) {
  const std::vector<Demonstration> demos = small_demos(1, 11);
  TrainConfig cfg;
  cfg.min_demos = 1;
  cfg.epochs = 500;
  const TrainResult r = plstm_train(demos, cfg, 7);
  ASSERT_EQ(r.loss_curve.size(), 500u);
  EXPECT_LT(r.loss_curve.back(), 1e-4);
  EXPECT_LT(plstm_loss(r.params, demos), 1e-4);
}

TEST(PlstmTrain, FullBatchIgnoresDemoOrder) {
  std::vector<Demonstration> demos = small_demos(100, 12);
  TrainConfig cfg;
  cfg.hidden = 6;
  cfg.epochs = 3;
  cfg.batch_size = 100;
  const TrainResult a = plstm_train(demos, cfg, 3);
  std::reverse(demos.begin(), demos.end());
  const TrainResult b = plstm_train(demos, cfg, 3);
  EXPECT_LT((a.params.flatten() - b.params.flatten()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PlstmTrain, Errors) {
  const std::vector<Demonstration> few = small_demos(5, 13);
  try {
    plstm_train(few, TrainConfig{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidDim);
  }
  std::vector<Demonstration> bad = small_demos(1, 14);
  bad[0].label(3, 0) = 1e300;
  TrainConfig cfg;
  cfg.min_demos = 1;
  cfg.epochs = 2;
  try {
    plstm_train(bad, cfg, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrainingDiverged);
    EXPECT_NE(std::string(e.what()).find("epoch 0"), std::string::npos);
  }
}

std::vector<TrackSample> constant_track(int n) {
  std::vector<TrackSample> track(n);
  for (int k = 0; k < n; ++k) {
    track[k].t = 0.01 * k;
    track[k].v = Vec3(1, 0, -2);
  }
  return track;
}

TEST(DetectCatch, ConstantVelocityGivesFirstIndex) {
  EXPECT_EQ(detect_catch_index(constant_track(20)), 0);
}

TEST(DetectCatch, IsolatedSpike) {
  std::vector<TrackSample> track = constant_track(20);
  track[8].v.x() += 3.0;  // jump between samples 7 and 8
  track[9].v.x() += 3.0;
  track[10].v.x() += 3.0;
  EXPECT_EQ(detect_catch_index(track), 7);
}

TEST(DetectCatch, FlightThenDecay) {
  std::vector<TrackSample> track;
  Vec3 v(2, 0, 1);
  for (int k = 0; k < 30; ++k) {
    track.push_back({0.01 * k, Vec3::Zero(), v});
    v.z() -= 9.81 * 0.01;
  }
  for (int j = 1; j <= 16; ++j) {
    track.push_back({0.3 + 0.02 * j, Vec3::Zero(), 0.6 * v * std::exp(-0.02 * j / 0.2)});
  }
  EXPECT_EQ(detect_catch_index(track), 29);
}

TEST(DetectCatch, TooShort) {
  try {
    detect_catch_index(constant_track(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidTrack);
  }
}

TEST(Demos, CushioningArithmetic) {
  const DemoConfig cfg;
  const SequenceMatrix label = cushioning_label(Vec3(0, 0, -4), 0.16, cfg);
  EXPECT_NEAR(label.row(15).norm(), 4 * std::exp(-2.0), 1e-12);
  EXPECT_NEAR(label.row(15).norm(), 0.5413, 1e-4);
  for (int j = 1; j < 16; ++j) {
    EXPECT_NEAR(label(j, 2) / label(j - 1, 2), std::exp(-0.02 / 0.16), 1e-12);
  }
  EXPECT_EQ(label.rightCols(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Demos, GeneratorIsSeededAndInRange) {
  const std::vector<Demonstration> a = generate_demos(200, 7);
  const std::vector<Demonstration> b = generate_demos(200, 7);
  ASSERT_EQ(a.size(), 200u);
  const DemoConfig cfg;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].pre_catch, b[k].pre_catch);
    EXPECT_EQ(a[k].label, b[k].label);
    const Vec3 p = a[k].pre_catch.head<3>();
    const Vec3 v = a[k].pre_catch.tail<3>();
    EXPECT_LE(p.head<2>().norm(), cfg.cylinder_radius + 1e-12);
    EXPECT_GE(p.z(), cfg.z_min);
    EXPECT_LE(p.z(), cfg.z_max);
    EXPECT_GE(v.norm(), cfg.speed_min - 1e-12);
    EXPECT_LE(v.norm(), cfg.speed_max + 1e-12);
    EXPECT_LT(v.z(), 0.0);
    EXPECT_TRUE(a[k].label.allFinite());
    EXPECT_EQ(a[k].label.rightCols(3).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LT(a[k].label.row(15).norm(), a[k].label.row(0).norm());
  }
  EXPECT_NE(generate_demos(1, 8)[0].pre_catch, a[0].pre_catch);
}

TEST(Demos, NoDriftGivesPureExponentials) {
  DemoConfig cfg;
  cfg.drift_sigma = 0.0;
  for (const Demonstration& d : generate_demos(20, 3, cfg)) {
    const double ratio = d.label(1, 0) / d.label(0, 0);
    for (int j = 2; j < 16; ++j) {
      EXPECT_NEAR(d.label(j, 0) / d.label(j - 1, 0), ratio, 1e-12);
    }
  }
}

TEST(PlstmParams, SaveLoadRoundTrip) {
  const PlstmParams p = PlstmParams::init(5, 3);
  std::stringstream buf;
  p.save(buf);
  const PlstmParams q = PlstmParams::load(buf);
  EXPECT_EQ(q.hidden, 5);
  EXPECT_EQ(q.flatten(), p.flatten());
}

TEST(PlstmParams, LoadRejectsGarbage) {
  std::stringstream bad("NOTPLSTM and more bytes here");
  try {
    PlstmParams::load(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
  }
  const PlstmParams p = PlstmParams::init(5, 3);
  std::stringstream buf;
  p.save(buf);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 9);
  std::stringstream truncated(bytes);
  EXPECT_THROW(PlstmParams::load(truncated), Error);
  EXPECT_THROW(PlstmParams::load_file("/nonexistent/params.bin"), Error);
}

TEST(Demos, JsonLinesRoundTrip) {
  const std::vector<Demonstration> demos = generate_demos(4, 2);
  std::stringstream buf;
  write_demos_jsonl(buf, demos);
  const std::vector<Demonstration> back = read_demos_jsonl(buf);
  ASSERT_EQ(back.size(), demos.size());
  for (std::size_t k = 0; k < demos.size(); ++k) {
    EXPECT_EQ(back[k].pre_catch, demos[k].pre_catch);
    EXPECT_EQ(back[k].label, demos[k].label);
  }
}

TEST(Demos, JsonLinesRejectsMalformedRows) {
  std::stringstream buf("{\"p\":[0,0,1],\"v\":[1,0,-1],\"label\":[[1,2,3]]}\n");
  try {
    read_demos_jsonl(buf);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("demo line 1"), std::string::npos);
  }
}

}  // namespace
}  // namespace cccm
