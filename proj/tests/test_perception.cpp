#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "modreach/perception.hpp"

using namespace modreach;

namespace {

// Tiny corpus with labels that are linear functions of the image so a small
// regressor can actually fit it.
Dataset toy_dataset(int count, uint64_t seed, int w = 6, int h = 6, int dof = 1) {
  Dataset ds;
  ds.dof = dof;
  ds.w = w;
  ds.h = h;
  ds.seed = seed;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    std::vector<uint8_t> img(size_t(w) * size_t(h));
    for (auto& b : img) b = uint8_t(rng.uniform_int(256));
    double mean = 0, left = 0, top = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = img[size_t(y * w + x)] / 255.0;
        mean += v;
        if (x < w / 2) left += v;
        if (y < h / 2) top += v;
      }
    mean /= w * h;
    left /= (w / 2) * h;
    top /= w * (h / 2);
    ds.images.insert(ds.images.end(), img.begin(), img.end());
    ds.thetas.push_back(float(mean));
    ds.thetas.push_back(float(left));
    for (int k = 0; k < dof; ++k) ds.thetas.push_back(float(top));
  }
  return ds;
}

NetworkSpec toy_spec(int w = 6, int h = 6, int dof = 1) {
  NetworkSpec s;
  s.input_shape = {h, w, 1};
  s.layers = {LayerSpec::fc(16), LayerSpec::relu(), LayerSpec::fc(2 + dof),
              LayerSpec::sigmoid()};
  return s;
}

}  // namespace

TEST(MixPolicy, ExactPerBatchComposition) {
  MixPolicy mix;
  mix.p_real = 0.75;
  EXPECT_EQ(mix.count_b(128), 96);
  EXPECT_EQ(mix.count_a(128), 32);
  mix.p_real = 0.0;
  EXPECT_EQ(mix.count_b(128), 0);
  mix.p_real = 1.0;
  EXPECT_EQ(mix.count_b(128), 128);
  EXPECT_EQ(mix.count_a(128), 0);
  mix.p_real = 0.5;
  EXPECT_EQ(mix.count_b(64), 32);
}

TEST(MixPolicy, RejectsBadFractionAndBatch) {
  MixPolicy mix;
  mix.p_real = 1.5;
  EXPECT_THROW(mix.count_b(128), std::invalid_argument);
  mix.p_real = -0.1;
  EXPECT_THROW(mix.count_b(128), std::invalid_argument);
  mix.p_real = 0.5;
  EXPECT_THROW(mix.count_b(0), std::invalid_argument);
}

TEST(EvalPerception, ZeroErrorWhenNetOutputsLabels) {
  Dataset ds = toy_dataset(8, 1);
  for (auto& v : ds.thetas) v = 0.5f;
  Network net(toy_spec());
  for (auto& p : net.params) p.fill(0.f);
  const PerceptionEval ev = eval_perception(net, ds);
  EXPECT_DOUBLE_EQ(ev.e_mu, 0.0);
  EXPECT_DOUBLE_EQ(ev.e_sigma, 0.0);
}

TEST(EvalPerception, ConstantHalfOutputMatchesHandComputedNorms) {
  const Dataset ds = toy_dataset(16, 2);
  Network net(toy_spec());
  for (auto& p : net.params) p.fill(0.f);
  const PerceptionEval ev = eval_perception(net, ds);
  ASSERT_EQ(ev.errors.size(), 16u);
  double want_mu = 0;
  std::vector<double> want(16);
  for (int64_t i = 0; i < 16; ++i) {
    double s = 0;
    for (int k = 0; k < ds.theta_dim(); ++k) {
      const double d = 0.5 - double(ds.theta(i)[k]);
      s += d * d;
    }
    want[size_t(i)] = std::sqrt(s);
    want_mu += want[size_t(i)];
  }
  want_mu /= 16;
  EXPECT_NEAR(ev.e_mu, want_mu, 1e-7);
  for (int64_t i = 0; i < 16; ++i) EXPECT_NEAR(ev.errors[size_t(i)], want[size_t(i)], 1e-7);
}

TEST(EvalPerception, DeterministicAcrossCalls) {
  const Dataset ds = toy_dataset(10, 3);
  Network net(toy_spec());
  Rng rng(4);
  net.init_weights(rng);
  const PerceptionEval a = eval_perception(net, ds);
  const PerceptionEval b = eval_perception(net, ds);
  EXPECT_EQ(a.e_mu, b.e_mu);
  EXPECT_EQ(a.errors, b.errors);
}

TEST(EvalPerception, RejectsEmptyCorpusAndLabelMismatch) {
  Dataset empty;
  Network net(toy_spec());
  EXPECT_THROW(eval_perception(net, empty), std::invalid_argument);
  const Dataset ds = toy_dataset(4, 5, 6, 6, 2);
  EXPECT_THROW(eval_perception(net, ds), std::invalid_argument);
}

TEST(TrainPerception, PureStyleAMatchesRunWithoutStyleBCorpus) {
  const Dataset a = toy_dataset(32, 6);
  const Dataset b = toy_dataset(32, 7);
  PerceptionTrainOpts o;
  o.steps = 120;
  o.batch = 8;
  o.eval_every = 0;
  o.trace_every = 0;
  o.mix.p_real = 0.0;

  Network n1(toy_spec()), n2(toy_spec());
  Rng init1(8), init2(8);
  n1.init_weights(init1);
  n2.init_weights(init2);
  OptimizerState o1(n1), o2(n2);
  Rng r1(9), r2(9);
  train_perception(n1, o1, r1, &a, &b, o, nullptr, nullptr);
  train_perception(n2, o2, r2, &a, nullptr, o, nullptr, nullptr);
  for (size_t i = 0; i < n1.params.size(); ++i) EXPECT_EQ(n1.params[i].data, n2.params[i].data);
}

TEST(TrainPerception, NonzeroShareWithMissingCorpusThrows) {
  const Dataset a = toy_dataset(16, 10);
  PerceptionTrainOpts o;
  o.steps = 10;
  o.batch = 8;
  o.mix.p_real = 0.5;
  Network net(toy_spec());
  Rng init(11);
  net.init_weights(init);
  OptimizerState opt(net);
  Rng rng(12);
  EXPECT_THROW(train_perception(net, opt, rng, &a, nullptr, o, nullptr, nullptr),
               std::invalid_argument);
  Dataset empty;
  EXPECT_THROW(train_perception(net, opt, rng, &a, &empty, o, nullptr, nullptr),
               std::invalid_argument);
}

TEST(TrainPerception, SmoothedLossTraceDecreases) {
  const Dataset a = toy_dataset(64, 13);
  PerceptionTrainOpts o;
  o.steps = 1000;
  o.batch = 32;
  o.lr_start = 0.01;
  o.lr_end = 0.002;
  o.eval_every = 0;
  o.trace_every = 1;

  Network net(toy_spec());
  Rng init(14);
  net.init_weights(init);
  OptimizerState opt(net);
  Rng rng(15);
  const auto res = train_perception(net, opt, rng, &a, nullptr, o, nullptr, nullptr);
  ASSERT_EQ(res.loss_trace.size(), 1000u);

  // smooth with non-overlapping window-10 means, then check the trend at a
  // granularity individual minibatch noise cannot flip
  const int window = 10;
  std::vector<double> smooth;
  for (size_t i = 0; i + window <= res.loss_trace.size(); i += window) {
    double s = 0;
    for (int k = 0; k < window; ++k) s += res.loss_trace[i + size_t(k)].second;
    smooth.push_back(s / window);
  }
  ASSERT_EQ(smooth.size(), 100u);
  EXPECT_LT(smooth.back(), 0.5 * smooth.front());
  std::array<double, 4> quarter{};
  for (size_t i = 0; i < smooth.size(); ++i) quarter[i / 25] += smooth[i] / 25;
  for (size_t i = 1; i < quarter.size(); ++i)
    EXPECT_LT(quarter[i], quarter[i - 1]) << "quarter " << i;
}

TEST(TrainPerception, EvaluationDoesNotPerturbTrajectory) {
  const Dataset a = toy_dataset(32, 16);
  const Dataset hold = toy_dataset(16, 17);
  PerceptionTrainOpts fast;
  fast.steps = 80;
  fast.batch = 8;
  fast.trace_every = 0;
  PerceptionTrainOpts noisy = fast;
  fast.eval_every = 0;
  noisy.eval_every = 5;

  Network n1(toy_spec()), n2(toy_spec());
  Rng i1(18), i2(18);
  n1.init_weights(i1);
  n2.init_weights(i2);
  OptimizerState o1(n1), o2(n2);
  Rng r1(19), r2(19);
  train_perception(n1, o1, r1, &a, nullptr, fast, &hold, nullptr);
  int evals = 0;
  train_perception(n2, o2, r2, &a, nullptr, noisy, &hold, nullptr,
                   [&](const PerceptionEvalPoint&) { ++evals; });
  EXPECT_EQ(evals, 16);
  for (size_t i = 0; i < n1.params.size(); ++i) EXPECT_EQ(n1.params[i].data, n2.params[i].data);
}

TEST(TrainPerception, StopErrEndsEarlyOnceHeldOutErrorIsLow) {
  const Dataset a = toy_dataset(32, 20);
  PerceptionTrainOpts o;
  o.steps = 5000;
  o.batch = 8;
  o.eval_every = 10;
  o.trace_every = 0;
  o.stop_err = 10.0;
  Network net(toy_spec());
  Rng init(21);
  net.init_weights(init);
  OptimizerState opt(net);
  Rng rng(22);
  const auto res = train_perception(net, opt, rng, &a, nullptr, o, &a, nullptr);
  EXPECT_EQ(res.steps_run, 10);
}

TEST(TrainPerception, CheckpointHookFiresAtMultiples) {
  const Dataset a = toy_dataset(16, 23);
  PerceptionTrainOpts o;
  o.steps = 50;
  o.batch = 4;
  o.eval_every = 0;
  o.trace_every = 0;
  Network net(toy_spec());
  Rng init(24);
  net.init_weights(init);
  OptimizerState opt(net);
  Rng rng(25);
  std::vector<int64_t> hits;
  train_perception(net, opt, rng, &a, nullptr, o, nullptr, nullptr, {}, 0,
                   [&](int64_t s) { hits.push_back(s); }, 20);
  EXPECT_EQ(hits, (std::vector<int64_t>{20, 40}));
}

TEST(TrainPerception, OutputsStayInUnitInterval) {
  const Dataset a = toy_dataset(32, 26);
  PerceptionTrainOpts o;
  o.steps = 200;
  o.batch = 8;
  o.eval_every = 0;
  o.trace_every = 0;
  Network net(toy_spec());
  Rng init(27);
  net.init_weights(init);
  OptimizerState opt(net);
  Rng rng(28);
  train_perception(net, opt, rng, &a, nullptr, o, nullptr, nullptr);
  Tensor in({int(a.size()), a.h, a.w, 1});
  for (int64_t i = 0; i < a.size(); ++i)
    a.decode_image(i, in.ptr() + i * a.image_numel());
  const Tensor& out = net.forward(in);
  for (float v : out.data) {
    EXPECT_GE(v, 0.f);
    EXPECT_LE(v, 1.f);
  }
}
