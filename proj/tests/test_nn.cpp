#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "samplepair/nn/adam.hpp"
#include "samplepair/nn/checkpoint.hpp"
#include "samplepair/nn/gradcheck.hpp"
#include "samplepair/nn/loss.hpp"
#include "samplepair/nn/network.hpp"

using namespace samplepair;
using namespace samplepair::nn;

namespace {

Tensor<double> random_batch(std::size_t n, Shape s, std::uint64_t seed, double scale = 1.0) {
  RandomSource rng{seed};
  Tensor<double> x(n, s);
  for (auto& v : x.data) v = scale * (uniform01(rng) - 0.3);
  return x;
}

ParamView<double> find_param(Network<double>& net, const std::string& name) {
  for (auto& p : net.params())
    if (p.name == name) return p;
  throw std::runtime_error("no parameter " + name);
}

}  // namespace

TEST(Network, Figure2StageShapes) {
  const auto spec = figure2_network(10);
  const auto shapes = spec.stage_shapes();
  std::vector<Shape> got;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto k = spec.layers[i].kind;
    if (k == LayerKind::Conv3x3 || k == LayerKind::MaxPool2x2 || k == LayerKind::FullyConnected)
      got.push_back(shapes[i]);
  }
  const std::vector<Shape> want{{28, 28, 64}, {28, 28, 96}, {14, 14, 96}, {14, 14, 96},
                                {14, 14, 128}, {7, 7, 128}, {7, 7, 128},  {7, 7, 192},
                                {4, 4, 192},   {1, 1, 512}, {1, 1, 10}};
  EXPECT_EQ(got, want);
  EXPECT_EQ(spec.layers.front().kind, LayerKind::BatchNorm);
  EXPECT_EQ(spec.n_classes(), 10u);
}

TEST(Network, DropoutRatesFollowTheTable) {
  std::vector<double> rates;
  for (const auto& l : figure2_network(10).layers)
    if (l.kind == LayerKind::Dropout) rates.push_back(l.rate);
  EXPECT_EQ(rates, (std::vector<double>{0.4, 0.3}));
}

TEST(Network, RejectsMalformedSpecs) {
  NetworkSpec no_softmax{{4, 4, 3}, {LayerSpec::dense(3)}};
  EXPECT_THROW(no_softmax.validate(), std::invalid_argument);
  NetworkSpec softmax_mid{{4, 4, 3}, {LayerSpec::softmax(), LayerSpec::dense(3), LayerSpec::softmax()}};
  EXPECT_THROW(softmax_mid.validate(), std::invalid_argument);
  Network<double> net(linear_network({4, 4, 3}, 3));
  Tensor<double> wrong(2, {4, 4, 2});
  EXPECT_THROW(net.forward(wrong, {Mode::Eval}), std::invalid_argument);
  EXPECT_THROW(net.backward(Tensor<double>(2, {1, 1, 3})), std::logic_error);
}

TEST(Network, EvalIsDeterministic) {
  Network<double> net(shrunk_figure2_network(5, {8, 8, 3}));
  net.init(3);
  const auto x = random_batch(4, {8, 8, 3}, 1);
  const auto a = net.forward(x, {Mode::Eval});
  const auto b = net.forward(x, {Mode::Eval});
  EXPECT_EQ(a, b);
}

TEST(Network, TrainPassLeavesEvalPassUnchangedWithoutStatUpdates) {
  Network<double> net(shrunk_figure2_network(5, {8, 8, 3}));
  net.init(3);
  const auto x = random_batch(4, {8, 8, 3}, 1);
  const auto a = net.forward(x, {Mode::Eval});
  RandomSource rng{1};
  net.forward(x, {Mode::Train, &rng, false, false});
  EXPECT_EQ(net.forward(x, {Mode::Eval}), a);
}

TEST(Network, CopyIsDeep) {
  Network<double> a(linear_network({2, 2, 1}, 2));
  a.init(1);
  Network<double> b = a;
  b.params()[0].value[0] += 1.0;
  EXPECT_NE(a.params()[0].value[0], b.params()[0].value[0]);
}

TEST(Network, InitIsSeeded) {
  Network<double> a(shrunk_figure2_network()), b(shrunk_figure2_network()), c(shrunk_figure2_network());
  a.init(5);
  b.init(5);
  c.init(6);
  EXPECT_EQ(checkpoint_bytes(a, OptimizerState<double>{}), checkpoint_bytes(b, OptimizerState<double>{}));
  EXPECT_NE(checkpoint_bytes(a, OptimizerState<double>{}), checkpoint_bytes(c, OptimizerState<double>{}));
}

TEST(Dropout, ZeroRateIsIdentity) {
  Dropout<double> d(0.0);
  const auto x = random_batch(3, {2, 2, 4}, 2);
  Tensor<double> y;
  RandomSource rng{1};
  d.forward(x, y, {Mode::Train, &rng});
  EXPECT_EQ(y, x);
  d.forward(x, y, {Mode::Eval});
  EXPECT_EQ(y, x);
}

TEST(Dropout, InvertedScalingAndEvalIdentity) {
  Dropout<double> d(0.4);
  Tensor<double> x(1, {1, 1, 20000});
  std::fill(x.data.begin(), x.data.end(), 1.0);
  Tensor<double> y;
  RandomSource rng{3};
  d.forward(x, y, {Mode::Train, &rng});
  double s = 0;
  for (double v : y.data) {
    ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.6) < 1e-12);
    s += v;
  }
  EXPECT_NEAR(s / 20000, 1.0, 0.03);
  d.forward(x, y, {Mode::Eval});
  EXPECT_EQ(y, x);
  EXPECT_THROW(Dropout<double>(1.0), std::invalid_argument);
}

TEST(BatchNormLayer, TrainOutputIsStandardized) {
  BatchNorm<double> bn(4);
  const auto x = random_batch(16, {3, 3, 4}, 4, 10.0);
  Tensor<double> y;
  bn.forward(x, y, {Mode::Train});
  const std::size_t m = y.rows();
  for (std::size_t ch = 0; ch < 4; ++ch) {
    double mean = 0, var = 0;
    for (std::size_t r = 0; r < m; ++r) mean += y.data[r * 4 + ch];
    mean /= m;
    for (std::size_t r = 0; r < m; ++r) var += std::pow(y.data[r * 4 + ch] - mean, 2);
    var /= m;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-4);
  }
}

TEST(BatchNormLayer, RunningStatsUseMomentumAndUnbiasedVariance) {
  BatchNorm<double> bn(1);
  Tensor<double> x(4, {1, 1, 1});
  x.data = {1, 2, 3, 6};  // mean 3, unbiased variance 14/3
  Tensor<double> y;
  bn.forward(x, y, {Mode::Train});
  auto bufs = bn.buffers();
  EXPECT_NEAR(bufs[0].value[0], 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(bufs[1].value[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
  EXPECT_THROW(bn.forward(Tensor<double>(1, {1, 1, 1}), y, {Mode::Train}), std::invalid_argument);
}

TEST(MaxPool, CeilModeAndRouting) {
  MaxPool2x2<double> pool;
  EXPECT_EQ(pool.output_shape({7, 7, 3}), (Shape{4, 4, 3}));
  Tensor<double> x(1, {3, 3, 1});
  x.data = {1, 5, 2, 3, 4, 9, 8, 7, 6};
  Tensor<double> y, dy(1, {2, 2, 1}), dx;
  pool.forward(x, y, {});
  EXPECT_EQ(y.data, (std::vector<double>{5, 9, 8, 6}));
  dy.data = {1, 2, 3, 4};
  pool.backward(x, y, dy, dx);
  EXPECT_EQ(dx.data, (std::vector<double>{0, 1, 0, 0, 0, 2, 3, 0, 4}));
}

TEST(ReLULayer, ZeroRegionBlocksGradient) {
  ReLU<double> r;
  Tensor<double> x(1, {1, 1, 4}), y, dy(1, {1, 1, 4}), dx;
  x.data = {-1, 0, 2, -3};
  dy.data = {5, 5, 5, 5};
  r.forward(x, y, {});
  r.backward(x, y, dy, dx);
  EXPECT_EQ(dx.data, (std::vector<double>{0, 0, 5, 0}));
}

TEST(Loss, UniformLogitsGiveLogK) {
  Tensor<double> z(1, {1, 1, 10});
  std::vector<double> t(10, 0.0);
  t[3] = 1.0;
  EXPECT_NEAR(loss_xent_soft(z, std::span<const double>(t)).loss, std::log(10.0), 1e-12);
  EXPECT_NEAR(std::log(10.0), 2.302585, 1e-6);
}

TEST(Loss, SoftmaxTargetGivesEntropy) {
  Tensor<double> z(1, {1, 1, 4});
  z.data = {0.3, -1.2, 2.0, 0.0};
  const auto p = softmax_row(z.data.data(), 4);
  double h = 0;
  for (double v : p) h -= v * std::log(v);
  const std::vector<double> t(p.begin(), p.end());
  const auto r = loss_xent_soft(z, std::span<const double>(t));
  EXPECT_NEAR(r.loss, h, 1e-12);
  for (double g : r.dlogits.data) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Loss, LinearInTarget) {
  Tensor<double> z(1, {1, 1, 5});
  z.data = {0.1, 0.5, -0.7, 1.1, 0.0};
  std::vector<double> a(5, 0.0), b(5, 0.0), mid(5, 0.0);
  a[1] = b[3] = 1.0;
  mid[1] = mid[3] = 0.5;
  auto L = [&](const std::vector<double>& t) { return loss_xent_soft(z, std::span<const double>(t)).loss; };
  EXPECT_NEAR(L(mid), 0.5 * (L(a) + L(b)), 1e-12);
  EXPECT_GE(L(a), 0.0);
}

TEST(Loss, SoftmaxIsOnSimplex) {
  RandomSource rng{8};
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z(7);
    for (auto& v : z) v = 40 * (uniform01(rng) - 0.5);
    const auto p = softmax_row(z.data(), 7);
    double s = 0;
    for (double v : p) {
      ASSERT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Loss, PredictionTiesGoToLowestClass) {
  Tensor<float> z(3, {1, 1, 4});
  z.data = {1, 1, 1, 1, 0, 2, 2, 1, 3, 0, 0, 3};
  EXPECT_EQ(predict_classes(z), (std::vector<int>{0, 1, 0}));
}

// Two-class logistic regression, one sample: dL/dW = x (softmax - t)^T.
TEST(Backward, LinearClosedForm) {
  Network<double> net(linear_network({1, 1, 3}, 2));
  auto w = find_param(net, "0.dense.weight");
  const std::vector<double> wv{0.2, -0.1, 0.4, 0.3, -0.5, 0.05};
  std::copy(wv.begin(), wv.end(), w.value.begin());
  Tensor<double> x(1, {1, 1, 3});
  x.data = {1.0, -2.0, 0.5};
  const std::vector<double> t{0.0, 1.0};
  net.zero_grad();
  const auto& z = net.forward(x, {Mode::Train});
  const auto r = loss_xent_soft(z, std::span<const double>(t));
  net.backward(r.dlogits);

  double z0 = 0, z1 = 0;
  for (int i = 0; i < 3; ++i) z0 += x.data[i] * wv[i * 2], z1 += x.data[i] * wv[i * 2 + 1];
  const double p0 = 1.0 / (1.0 + std::exp(z1 - z0)), p1 = 1.0 - p0;
  const double d[2] = {p0 - t[0], p1 - t[1]};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(w.grad[i * 2 + k], x.data[i] * d[k], 1e-14);
  auto b = find_param(net, "0.dense.bias");
  EXPECT_NEAR(b.grad[0], d[0], 1e-14);
  EXPECT_NEAR(b.grad[1], d[1], 1e-14);
}

TEST(GradCheck, ShrunkSixConvNet) {
  for (std::uint64_t seed : {1, 2, 3}) {
    GradCheckOptions opt;
    opt.seed = seed;
    const auto r = grad_check(shrunk_figure2_network(), 1e-4, opt);
    EXPECT_TRUE(r.passed) << "seed " << seed << " err " << r.max_rel_error << " at " << r.worst_param;
    EXPECT_GT(r.checked, 0.95 * static_cast<double>(r.checked + r.nonsmooth_skipped));
  }
}

TEST(GradCheck, FourChannelVariant) {
  const auto spec = conv_family({4, 4, 3}, {4, 4, 4, 4, 4, 4}, 4, 3);
  const auto r = grad_check(spec, 1e-4, {});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst_param;
}

TEST(GradCheck, HeavyDropoutWithHeldMask) {
  const auto spec = conv_family({4, 4, 3}, {4, 6, 6, 8, 8, 8}, 8, 3, 0.7, 0.7);
  GradCheckOptions opt;
  opt.seed = 9;
  const auto r = grad_check(spec, 1e-4, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error << " at " << r.worst_param;
}

TEST(GradCheck, LinearNetAtNoiseFloor) {
  GradCheckOptions opt;
  opt.step = 3e-3;
  const auto r = grad_check(linear_network({4, 4, 3}, 3), 1e-8, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_EQ(r.nonsmooth_skipped, 0u);
}

TEST(GradCheck, DetectsABrokenGradient) {
  // relative_error itself: the oracle must flag a 1% discrepancy
  EXPECT_NEAR(relative_error(1.01, 1.0, 1e-5), 0.01 / 1.01, 1e-15);
  EXPECT_NEAR(relative_error(1e-9, 0.0, 1e-5), 1e-4, 1e-18);
}

TEST(Adam, FirstStepMovesByStepSize) {
  std::vector<double> v{0.0}, g{1.0};
  std::vector<ParamView<double>> ps{{"p", {1}, v, g}};
  OptimizerState<double> st;
  adam_step<double>(ps, st);
  // m_hat = 1, v_hat = 1  ->  delta = 0.001 / (1 + 1e-8)
  EXPECT_NEAR(v[0], -0.001 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, NegativeGradientAndScaleInvariance) {
  for (double gv : {-3.0, 0.02, 500.0}) {
    std::vector<double> v{1.0}, g{gv};
    std::vector<ParamView<double>> ps{{"p", {1}, v, g}};
    OptimizerState<double> st;
    adam_step<double>(ps, st);
    EXPECT_NEAR(v[0], 1.0 - 0.001 * (gv > 0 ? 1 : -1), 1e-9);
  }
}

TEST(Adam, ZeroGradientsLeaveParameters) {
  std::vector<double> v{0.7, -0.2}, g{0.0, 0.0};
  std::vector<ParamView<double>> ps{{"p", {2}, v, g}};
  OptimizerState<double> st;
  for (int i = 0; i < 50; ++i) adam_step<double>(ps, st);
  EXPECT_EQ(v, (std::vector<double>{0.7, -0.2}));
}

TEST(Adam, IdenticalProblemsIdenticalTrajectories) {
  auto run = [] {
    std::vector<double> v{2.0}, g{0.0};
    std::vector<ParamView<double>> ps{{"p", {1}, v, g}};
    OptimizerState<double> st;
    std::vector<double> traj;
    for (int i = 0; i < 200; ++i) {
      g[0] = 2 * (v[0] - 0.5);  // d/dp (p-0.5)^2
      adam_step<double>(ps, st);
      traj.push_back(v[0]);
    }
    return traj;
  };
  const auto a = run();
  EXPECT_EQ(a, run());
  EXPECT_LT(std::abs(a.back() - 0.5), std::abs(2.0 - 0.5));
}

TEST(Adam, RejectsMismatchedState) {
  std::vector<double> v{1.0}, g{1.0};
  std::vector<ParamView<double>> ps{{"p", {1}, v, g}};
  OptimizerState<double> st;
  st.m = {{0.0}, {0.0}};
  st.v = st.m;
  EXPECT_THROW(adam_step<double>(ps, st), std::invalid_argument);
}

TEST(Checkpoint, RoundTripIsExact) {
  Network<float> net(shrunk_figure2_network(4, {8, 8, 3}));
  net.init(2);
  OptimizerState<float> opt;
  Tensor<float> x(6, {8, 8, 3});
  RandomSource rng{1};
  for (auto& v : x.data) v = static_cast<float>(uniform01(rng));
  std::vector<float> t(6 * 4, 0.25f);
  for (int step = 0; step < 3; ++step) {
    net.zero_grad();
    auto r = loss_xent_soft(net.forward(x, {Mode::Train, &rng}), std::span<const float>(t));
    net.backward(r.dlogits);
    adam_step<float>(net.params(), opt);
  }
  const auto bytes = checkpoint_bytes(net, opt);
  std::istringstream in(bytes);
  auto [net2, opt2] = read_checkpoint<float>(in);
  EXPECT_EQ(opt2, opt);
  EXPECT_EQ(checkpoint_bytes(net2, opt2), bytes);
  EXPECT_EQ(net2.forward(x, {Mode::Eval}), net.forward(x, {Mode::Eval}));
}

TEST(Checkpoint, RejectsCorruptInput) {
  Network<float> net(linear_network({2, 2, 1}, 2));
  const auto bytes = checkpoint_bytes(net, OptimizerState<float>{});
  std::istringstream bad_magic("XXXXXXXX" + bytes.substr(8));
  EXPECT_THROW(read_checkpoint<float>(bad_magic), CheckpointError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint<float>(truncated), CheckpointError);
  std::istringstream wrong_type(bytes);
  EXPECT_THROW(read_checkpoint<double>(wrong_type), CheckpointError);
}

TEST(Spec, JsonRoundTrip) {
  const auto spec = reduced_network(10);
  const nlohmann::json j = spec;
  EXPECT_EQ(j.get<NetworkSpec>(), spec);
  nlohmann::json bad = j;
  bad["layers"][0]["kind"] = "attention";
  EXPECT_ANY_THROW((void)bad.get<NetworkSpec>());
}
