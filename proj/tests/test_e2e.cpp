#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "modreach/e2e.hpp"

using namespace modreach;

namespace {

ArmModel arm_of(int dof) {
  ArmModel m;
  m.dof = dof;
  return m;
}

// Q head with all weights zero and a fixed bias vector on the output layer,
// so the greedy action ignores the input entirely.
Network fixed_bias_control(int dof, const std::vector<float>& bias) {
  Network net(NetworkSpec::control(dof));
  for (auto& p : net.params) p.fill(0.f);
  for (size_t i = 0; i < bias.size(); ++i) net.params.back().data[i] = bias[i];
  return net;
}

bool params_equal(const Network& a, const Network& b) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].data != b.params[i].data) return false;
  return true;
}

FinetuneOpts tiny_finetune_opts() {
  FinetuneOpts o;
  o.updates = 10;
  o.q_batch = 4;
  o.per_batch_b = 3;
  o.per_batch_a = 2;
  o.replay_capacity = 64;
  o.warmup = 8;
  o.target_sync = 2;
  o.explore_eps = 1.0;  // guided collection only, no net forwards while acting
  o.eval_episodes = 2;
  o.seed = 7;
  return o;
}

}  // namespace

TEST(CheckCombinable, AcceptsMatchingBottleneckDims) {
  Network per(NetworkSpec::perception(2));
  Network ctl(NetworkSpec::control(2));
  EXPECT_NO_THROW(check_combinable(per, ctl));
}

TEST(CheckCombinable, RejectsDimMismatch) {
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(2));
  EXPECT_THROW(check_combinable(per, ctl), std::invalid_argument);
}

TEST(ObsTensor, ImageAndQuantizedBytesAgreeBitwise) {
  const ArmModel m = arm_of(2);
  Rng rng(11);
  const SceneConfig scene = sample_scene(m, rng).scene;
  const Image img = render_scene(m, scene, RenderStyle::a);

  const Tensor from_img = obs_tensor(img);
  ASSERT_EQ(from_img.shape, (std::vector<int>{1, 84, 84, 1}));

  std::vector<uint8_t> bytes(img.px.size());
  for (size_t i = 0; i < bytes.size(); ++i) bytes[i] = quantize_px(img.px[i]);
  const Tensor from_bytes = obs_tensor(bytes, 84, 84);

  ASSERT_EQ(from_img.data.size(), from_bytes.data.size());
  for (size_t i = 0; i < from_img.data.size(); ++i) {
    EXPECT_EQ(from_img.data[i], from_bytes.data[i]);
    EXPECT_GE(from_img.data[i], 0.f);
    EXPECT_LE(from_img.data[i], 1.f);
  }
}

TEST(ObsTensor, RejectsByteCountMismatch) {
  std::vector<uint8_t> bytes(84 * 84 - 1, 0);
  EXPECT_THROW(obs_tensor(bytes, 84, 84), std::invalid_argument);
}

TEST(GreedyVisualAction, MatchesManualChainArgmax) {
  const ArmModel m = arm_of(1);
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));
  Rng init(3);
  per.init_weights(init);
  ctl.init_weights(init);

  Rng rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const SceneConfig scene = sample_scene(m, rng).scene;
    const Tensor obs = obs_tensor(render_scene(m, scene, RenderStyle::a));

    const Action a = greedy_visual_action(m, per, ctl, obs);

    const Tensor& th = per.forward(obs);
    const Tensor& q = ctl.forward(th);
    const Action want = action_from_id(m, argmax_index(q.ptr(), m.num_actions()));
    EXPECT_EQ(a.id, want.id);
    EXPECT_EQ(a.joint, want.joint);
    EXPECT_EQ(a.delta, want.delta);
  }
}

TEST(GreedyVisualAction, RejectsQHeadArityMismatch) {
  const ArmModel m = arm_of(3);  // nine actions
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));  // three outputs
  const Tensor obs({1, 84, 84, 1});
  EXPECT_THROW(greedy_visual_action(m, per, ctl, obs), std::invalid_argument);
}

TEST(MixGradients, WeightedSumAtSeveralBetas) {
  Rng rng(5);
  std::vector<Tensor> a, b;
  for (const auto& shape : {std::vector<int>{3, 4}, std::vector<int>{2}}) {
    Tensor ta(shape), tb(shape);
    for (auto& v : ta.data) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : tb.data) v = float(rng.uniform(-1.0, 1.0));
    a.push_back(std::move(ta));
    b.push_back(std::move(tb));
  }
  for (const double beta : {0.0, 0.3, 0.8, 1.0}) {
    const auto out = mix_gradients(beta, a, b);
    ASSERT_EQ(out.size(), a.size());
    for (size_t i = 0; i < out.size(); ++i) {
      ASSERT_EQ(out[i].shape, a[i].shape);
      for (size_t k = 0; k < out[i].data.size(); ++k) {
        const double want = beta * a[i].data[k] + (1.0 - beta) * b[i].data[k];
        EXPECT_NEAR(out[i].data[k], want, 1e-6);
      }
    }
  }
}

TEST(MixGradients, PureEndpointsReturnOneSide) {
  std::vector<Tensor> a{Tensor({2})}, b{Tensor({2})};
  a[0].data = {1.f, -2.f};
  b[0].data = {5.f, 7.f};
  EXPECT_EQ(mix_gradients(1.0, a, b)[0].data, a[0].data);
  EXPECT_EQ(mix_gradients(0.0, a, b)[0].data, b[0].data);
}

TEST(MixGradients, RejectsMismatchedLists) {
  std::vector<Tensor> a{Tensor({2}), Tensor({3})};
  std::vector<Tensor> b{Tensor({2})};
  EXPECT_THROW(mix_gradients(0.5, a, b), std::invalid_argument);
  b.push_back(Tensor({4}));
  EXPECT_THROW(mix_gradients(0.5, a, b), std::invalid_argument);
}

TEST(EvaluateVisual, InputBlindPolicyMatchesStateSpaceRollout) {
  // A constant Q head picks the same action in both harnesses, so the rollout
  // statistics must agree exactly if the episode streams are shared.
  ArmModel m = arm_of(1);
  m.max_steps = 25;
  Network per(NetworkSpec::perception(1));
  Rng init(2);
  per.init_weights(init);
  Network ctl = fixed_bias_control(1, {0.2f, 0.0f, 0.1f});

  const EvalStats vis = evaluate_visual(m, per, ctl, RenderStyle::a, 3, 99);
  const EvalStats dir = evaluate_control(m, ctl, 3, 99);

  EXPECT_EQ(vis.episodes, dir.episodes);
  EXPECT_EQ(vis.success_rate, dir.success_rate);
  EXPECT_EQ(vis.d_med_cm, dir.d_med_cm);
  EXPECT_EQ(vis.d_q3_cm, dir.d_q3_cm);
  EXPECT_EQ(vis.avg_reward, dir.avg_reward);
}

TEST(EvaluateVisual, RejectsUncombinableNets) {
  const ArmModel m = arm_of(2);
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(2));
  EXPECT_THROW(evaluate_visual(m, per, ctl, RenderStyle::a, 1, 1), std::invalid_argument);
}

TEST(FinetuneTrainer, RejectsBetaOutsideUnitInterval) {
  const ArmModel m = arm_of(1);
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));
  const Dataset ds_b = gen_dataset(m, 2, RenderStyle::b, 21);
  const Dataset ds_a = gen_dataset(m, 2, RenderStyle::a, 22);
  FinetuneOpts o = tiny_finetune_opts();
  o.beta = 1.5;
  EXPECT_THROW(FinetuneTrainer(m, per, ctl, o, &ds_b, &ds_a), std::invalid_argument);
  o.beta = -0.1;
  EXPECT_THROW(FinetuneTrainer(m, per, ctl, o, &ds_b, &ds_a), std::invalid_argument);
}

TEST(FinetuneTrainer, RegressionTermRequiresLabelledCorpora) {
  const ArmModel m = arm_of(1);
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));
  const Dataset ds_b = gen_dataset(m, 2, RenderStyle::b, 21);
  const Dataset ds_a = gen_dataset(m, 2, RenderStyle::a, 22);
  FinetuneOpts o = tiny_finetune_opts();
  EXPECT_THROW(FinetuneTrainer(m, per, ctl, o, nullptr, &ds_a), std::invalid_argument);
  EXPECT_THROW(FinetuneTrainer(m, per, ctl, o, &ds_b, nullptr), std::invalid_argument);

  o.naive = true;
  EXPECT_NO_THROW(FinetuneTrainer(m, per, ctl, o, nullptr, nullptr));
}

TEST(FinetuneTrainer, MixWeightTouchesOnlyTheRegressor) {
  // Trainers that differ only in the loss mix must produce bit-identical Q
  // heads after one update; the regressor weights are where they diverge.
  const ArmModel m = arm_of(1);
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));
  Rng init(4);
  per.init_weights(init);
  ctl.init_weights(init);
  const Dataset ds_b = gen_dataset(m, 4, RenderStyle::b, 31);
  const Dataset ds_a = gen_dataset(m, 4, RenderStyle::a, 32);

  FinetuneOpts o_hi = tiny_finetune_opts();
  o_hi.beta = 0.8;
  FinetuneOpts o_lo = o_hi;
  o_lo.beta = 0.3;
  FinetuneOpts o_naive = o_hi;
  o_naive.naive = true;

  FinetuneTrainer hi(m, per, ctl, o_hi, &ds_b, &ds_a);
  FinetuneTrainer lo(m, per, ctl, o_lo, &ds_b, &ds_a);
  FinetuneTrainer task_only(m, per, ctl, o_naive, nullptr, nullptr);
  hi.run(1);
  lo.run(1);
  task_only.run(1);
  ASSERT_EQ(hi.updates_done, 1);
  ASSERT_EQ(lo.updates_done, 1);
  ASSERT_EQ(task_only.updates_done, 1);

  EXPECT_TRUE(params_equal(hi.ctl, lo.ctl));
  EXPECT_TRUE(params_equal(hi.ctl, task_only.ctl));
  EXPECT_FALSE(params_equal(hi.per, lo.per));
  EXPECT_FALSE(params_equal(hi.per, task_only.per));
  EXPECT_FALSE(params_equal(lo.per, task_only.per));

  EXPECT_TRUE(std::isfinite(hi.last_lq));
  EXPECT_TRUE(std::isfinite(hi.last_lp));
  EXPECT_TRUE(std::isnan(task_only.last_lp));
}

TEST(FinetuneTrainer, DeterministicAcrossIdenticalRuns) {
  const ArmModel m = arm_of(1);
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));
  Rng init(4);
  per.init_weights(init);
  ctl.init_weights(init);
  const Dataset ds_b = gen_dataset(m, 4, RenderStyle::b, 31);
  const Dataset ds_a = gen_dataset(m, 4, RenderStyle::a, 32);
  const FinetuneOpts o = tiny_finetune_opts();

  FinetuneTrainer t1(m, per, ctl, o, &ds_b, &ds_a);
  FinetuneTrainer t2(m, per, ctl, o, &ds_b, &ds_a);
  t1.run(2);
  t2.run(2);
  EXPECT_TRUE(params_equal(t1.per, t2.per));
  EXPECT_TRUE(params_equal(t1.ctl, t2.ctl));
  EXPECT_EQ(t1.env_steps, t2.env_steps);
  EXPECT_EQ(t1.last_lq, t2.last_lq);
  EXPECT_EQ(t1.last_lp, t2.last_lp);
}

TEST(FinetuneTrainer, RunUpdatesParamsAndFiresHooks) {
  ArmModel m = arm_of(1);
  m.max_steps = 15;
  Network per(NetworkSpec::perception(1));
  Network ctl(NetworkSpec::control(1));
  Rng init(6);
  per.init_weights(init);
  ctl.init_weights(init);
  const Dataset ds_b = gen_dataset(m, 4, RenderStyle::b, 41);
  const Dataset ds_a = gen_dataset(m, 4, RenderStyle::a, 42);
  FinetuneOpts o = tiny_finetune_opts();
  o.eval_every = 2;

  FinetuneTrainer tr(m, per, ctl, o, &ds_b, &ds_a);
  std::vector<int64_t> evals, checkpoints;
  tr.run(
      3, [&](const FinetuneEvalPoint& pt) { evals.push_back(pt.update); },
      [&](int64_t u) { checkpoints.push_back(u); }, 3);

  EXPECT_EQ(tr.updates_done, 3);
  EXPECT_EQ(evals, (std::vector<int64_t>{2}));
  EXPECT_EQ(checkpoints, (std::vector<int64_t>{3}));
  EXPECT_FALSE(params_equal(tr.per, per));
  EXPECT_FALSE(params_equal(tr.ctl, ctl));
  for (const auto& p : tr.per.params) EXPECT_TRUE(p.all_finite());
  for (const auto& p : tr.ctl.params) EXPECT_TRUE(p.all_finite());

  const FinetuneEvalPoint pt = tr.eval_point();
  EXPECT_EQ(pt.update, 3);
  EXPECT_EQ(pt.stats.episodes, o.eval_episodes);
  EXPECT_TRUE(std::isfinite(pt.loss_q));
}
