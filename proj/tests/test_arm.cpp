#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "modreach/arm.hpp"
#include "modreach/rng.hpp"

using namespace modreach;

namespace {

const double kPi = 3.14159265358979323846;

ArmModel arm3() {
  ArmModel m;
  m.dof = 3;
  return m;
}

}  // namespace

TEST(ForwardKinematics, CollinearLinksSumAtZero) {
  const ArmModel m = arm3();
  const Vec2 p = forward_kinematics(m, {0.0, 0.0, 0.0});
  EXPECT_NEAR(p.x, 0.973, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
}

TEST(ForwardKinematics, QuarterTurnRotatesRigidly) {
  const ArmModel m = arm3();
  const Vec2 p = forward_kinematics(m, {kPi / 2, 0.0, 0.0});
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 0.973, 1e-12);
}

TEST(ForwardKinematics, MatchesScalarTrigEvaluation) {
  const ArmModel m = arm3();
  const Vec2 p = forward_kinematics(m, {0.3, -0.2, 0.1});
  const double x = 0.37 * std::cos(0.3) + 0.374 * std::cos(0.3 - 0.2) +
                   0.229 * std::cos(0.3 - 0.2 + 0.1);
  const double y = 0.37 * std::sin(0.3) + 0.374 * std::sin(0.3 - 0.2) +
                   0.229 * std::sin(0.3 - 0.2 + 0.1);
  EXPECT_NEAR(p.x, x, 1e-12);
  EXPECT_NEAR(p.y, y, 1e-12);
}

TEST(ForwardKinematics, LowerDofFreezesInactiveJointsAtRest) {
  ArmModel m1 = arm3();
  m1.dof = 1;
  const Vec2 p1 = forward_kinematics(m1, JointConfig{0.5});
  const Vec2 p3 = forward_kinematics(arm3(), {m1.rest[0], 0.5, m1.rest[2]});
  EXPECT_NEAR(p1.x, p3.x, 1e-15);
  EXPECT_NEAR(p1.y, p3.y, 1e-15);
  EXPECT_DOUBLE_EQ(m1.lo(0), m1.limit_lo[1]);
  EXPECT_DOUBLE_EQ(m1.hi(0), m1.limit_hi[1]);
}

TEST(ApplyAction, NudgesExactlyOneJoint) {
  const ArmModel m = arm3();
  const JointConfig q = apply_action(m, {0.0, 0.0, 0.0}, {1, 0.04, 4});
  EXPECT_DOUBLE_EQ(q[0], 0.0);
  EXPECT_DOUBLE_EQ(q[1], 0.04);
  EXPECT_DOUBLE_EQ(q[2], 0.0);
}

TEST(ApplyAction, NoOpLeavesConfigUnchanged) {
  const ArmModel m = arm3();
  const JointConfig q = apply_action(m, {0.0, 0.0, 0.0}, {0, 0.0, 1});
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(q[i], 0.0);
}

TEST(ApplyAction, ClampsAtJointLimit) {
  const ArmModel m = arm3();
  JointConfig q{m.hi(0), 0.0, 0.0};
  const JointConfig q2 = apply_action(m, q, {0, m.action_step, 0});
  EXPECT_DOUBLE_EQ(q2[0], m.hi(0));
}

TEST(ApplyAction, StepBoundAndSingleComponentChange) {
  const ArmModel m = arm3();
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const JointConfig q = sample_config(m, rng);
    const Action a = action_from_id(m, rng.uniform_int(m.num_actions()));
    const JointConfig q2 = apply_action(m, q, a);
    int changed = 0;
    for (int i = 0; i < 3; ++i) {
      const double d = std::abs(q2[i] - q[i]);
      EXPECT_LE(d, 0.04 + 1e-15);
      changed += d > 0;
    }
    EXPECT_LE(changed, 1);
    EXPECT_TRUE(m.within_limits(q2));
  }
}

TEST(ApplyAction, InvalidActionIdThrows) {
  const ArmModel m = arm3();
  EXPECT_THROW(action_from_id(m, 9), std::invalid_argument);
  EXPECT_THROW(action_from_id(m, -1), std::invalid_argument);
}

TEST(ActionFromId, EnumeratesAllJointDeltaPairs) {
  const ArmModel m = arm3();
  for (int id = 0; id < m.num_actions(); ++id) {
    const Action a = action_from_id(m, id);
    EXPECT_EQ(a.id, id);
    EXPECT_GE(a.joint, 0);
    EXPECT_LT(a.joint, m.dof);
    EXPECT_TRUE(a.delta == 0.0 || std::abs(a.delta) == m.action_step);
  }
}

TEST(Reward, ShapingValueOutsideThreshold) {
  const ArmModel m = arm3();
  EXPECT_NEAR(reward(m, 0.10, 0), -5e-4, 1e-15);
}

TEST(Reward, ZeroWhileHoldingShortOfStreak) {
  const ArmModel m = arm3();
  EXPECT_DOUBLE_EQ(reward(m, 0.04, 2), 0.0);
}

TEST(Reward, OneOnCompletedStreak) {
  const ArmModel m = arm3();
  EXPECT_DOUBLE_EQ(reward(m, 0.04, 4), 1.0);
  EXPECT_DOUBLE_EQ(reward(m, 0.04, 5), 1.0);
}

TEST(Reward, ContinuousAtThreshold) {
  const ArmModel m = arm3();
  EXPECT_LT(std::abs(reward(m, 0.05 + 1e-8, 0)), 1e-6);
}

TEST(Reward, StrictlyDecreasingBeyondThreshold) {
  const ArmModel m = arm3();
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const double d1 = rng.uniform(0.0500001, 1.9);
    const double d2 = d1 + rng.uniform(1e-6, 0.5);
    EXPECT_LT(reward(m, d2, 0), reward(m, d1, 0));
    EXPECT_LT(reward(m, d1, 0), 0.0);
    EXPECT_GT(reward(m, d2, 0), m.reward_lambda * (m.reach_delta / 2.4 - 1.0));
  }
}

TEST(Step, ShapingRewardAndResetStreakFarFromTarget) {
  const ArmModel m = arm3();
  EpisodeState s;
  s.scene.q = {0.0, 0.0, 0.0};
  s.scene.target = {0.673, 0.0};
  s.n = 2;
  const StepResult r = step(m, s, {0, 0.0, 1});
  EXPECT_NEAR(end_effector_distance(m, r.state), 0.3, 1e-12);
  EXPECT_NEAR(r.reward, 1e-3 * (0.05 / 0.3 - 1.0), 1e-12);
  EXPECT_EQ(r.state.n, 0);
  EXPECT_FALSE(r.done);
  EXPECT_EQ(r.state.step, 1);
}

TEST(Step, FourConsecutiveCloseStepsFinishWithUnitReward) {
  const ArmModel m = arm3();
  EpisodeState s;
  s.scene.q = {0.0, 0.0, 0.0};
  s.scene.target = forward_kinematics(m, s.scene.q);
  const Action hold{0, 0.0, 1};
  for (int k = 1; k <= 3; ++k) {
    const StepResult r = step(m, s, hold);
    EXPECT_DOUBLE_EQ(r.reward, 0.0);
    EXPECT_FALSE(r.done);
    EXPECT_EQ(r.state.n, k);
    s = r.state;
  }
  const StepResult last = step(m, s, hold);
  EXPECT_DOUBLE_EQ(last.reward, 1.0);
  EXPECT_TRUE(last.done);
  EXPECT_TRUE(last.state.success);
  EXPECT_GE(last.state.step, 4);
}

TEST(Step, TimeoutEndsEpisodeWithoutSuccess) {
  ArmModel m = arm3();
  m.max_steps = 5;
  EpisodeState s;
  s.scene.q = {0.0, 0.0, 0.0};
  s.scene.target = {-0.9, -0.9};
  StepResult r{};
  for (int k = 0; k < 5; ++k) {
    r = step(m, s, {0, 0.0, 1});
    s = r.state;
  }
  EXPECT_TRUE(r.done);
  EXPECT_FALSE(r.state.success);
  EXPECT_LT(r.reward, 0.0);
}

TEST(Step, SteppingFinishedEpisodeThrows) {
  const ArmModel m = arm3();
  EpisodeState s;
  s.done = true;
  EXPECT_THROW(step(m, s, {0, 0.0, 1}), std::logic_error);
}

TEST(SampleScene, DeterministicForFixedSeed) {
  const ArmModel m = arm3();
  Rng a(77), b(77);
  const EpisodeState s1 = sample_scene(m, a);
  const EpisodeState s2 = sample_scene(m, b);
  EXPECT_EQ(s1.scene.target.x, s2.scene.target.x);
  EXPECT_EQ(s1.scene.target.y, s2.scene.target.y);
  for (int i = 0; i < m.dof; ++i) {
    EXPECT_EQ(s1.scene.q[i], s2.scene.q[i]);
    EXPECT_EQ(s1.q_star[i], s2.q_star[i]);
  }
}

TEST(SampleScene, JointMeansNearMidpointOverManySamples) {
  const ArmModel m = arm3();
  Rng rng(5);
  const int n = 100000;
  double sum[3] = {0, 0, 0};
  for (int k = 0; k < n; ++k) {
    const EpisodeState s = sample_scene(m, rng);
    for (int i = 0; i < m.dof; ++i) sum[i] += s.scene.q[i];
  }
  for (int i = 0; i < m.dof; ++i) {
    const double mid = 0.5 * (m.lo(i) + m.hi(i));
    const double range = m.hi(i) - m.lo(i);
    EXPECT_NEAR(sum[i] / n, mid, 0.01 * range) << "joint " << i;
  }
}

TEST(SampleScene, TargetAlwaysInFrameAndReachable) {
  const ArmModel m = arm3();
  const double reach = m.links[0] + m.links[1] + m.links[2];
  Rng rng(6);
  for (int k = 0; k < 20000; ++k) {
    const EpisodeState s = sample_scene(m, rng);
    EXPECT_TRUE(m.in_frame(s.scene.target));
    EXPECT_LE(norm(s.scene.target), reach + 1e-12);
    const Vec2 goal = forward_kinematics(m, s.q_star);
    EXPECT_NEAR(goal.x, s.scene.target.x, 1e-15);
    EXPECT_NEAR(goal.y, s.scene.target.y, 1e-15);
  }
}

TEST(SampleScene, ImpossibleFrameExhaustsRetries) {
  ArmModel m = arm3();
  m.frame_half = 1e-6;
  Rng rng(1);
  EXPECT_THROW(sample_scene(m, rng, 50), std::runtime_error);
}

TEST(Episode, SuccessImpliesAtLeastFourSteps) {
  const ArmModel m = arm3();
  Rng rng(13);
  for (int ep = 0; ep < 50; ++ep) {
    EpisodeState s = sample_scene(m, rng);
    while (!s.done) {
      const Action a = action_from_id(m, rng.uniform_int(m.num_actions()));
      s = step(m, s, a).state;
    }
    if (s.success) {
      EXPECT_GE(s.step, 4);
    }
  }
}

TEST(NormalizeTheta, RangeEndpointsMapToUnitInterval) {
  const ArmModel m = arm3();
  SceneConfig lo_scene;
  lo_scene.target = {-m.frame_half, -m.frame_half};
  lo_scene.q = {m.lo(0), m.lo(1), m.lo(2)};
  const auto lo_theta = normalize_theta(m, lo_scene);
  for (double v : lo_theta) EXPECT_DOUBLE_EQ(v, 0.0);

  SceneConfig hi_scene;
  hi_scene.target = {m.frame_half, m.frame_half};
  hi_scene.q = {m.hi(0), m.hi(1), m.hi(2)};
  const auto hi_theta = normalize_theta(m, hi_scene);
  for (double v : hi_theta) EXPECT_DOUBLE_EQ(v, 1.0);

  SceneConfig mid_scene;
  mid_scene.target = {0.0, 0.0};
  mid_scene.q = {0.5 * (m.lo(0) + m.hi(0)), 0.5 * (m.lo(1) + m.hi(1)), 0.5 * (m.lo(2) + m.hi(2))};
  for (double v : normalize_theta(m, mid_scene)) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(NormalizeTheta, RoundTripWithinTolerance) {
  const ArmModel m = arm3();
  Rng rng(14);
  for (int k = 0; k < 1000; ++k) {
    const EpisodeState s = sample_scene(m, rng);
    const SceneConfig back = denormalize_theta(m, normalize_theta(m, s.scene));
    EXPECT_NEAR(back.target.x, s.scene.target.x, 1e-7);
    EXPECT_NEAR(back.target.y, s.scene.target.y, 1e-7);
    for (int i = 0; i < m.dof; ++i) EXPECT_NEAR(back.q[i], s.scene.q[i], 1e-7);
  }
}

TEST(NormalizeTheta, OutOfRangeInputThrows) {
  const ArmModel m = arm3();
  SceneConfig s;
  s.target = {2.0, 0.0};
  s.q = {0.0, 0.0, 0.0};
  EXPECT_THROW(normalize_theta(m, s), std::domain_error);
  s.target = {0.0, 0.0};
  s.q = {5.0, 0.0, 0.0};
  EXPECT_THROW(normalize_theta(m, s), std::domain_error);
}

TEST(DenormalizeTheta, ValidatesArityAndRange) {
  const ArmModel m = arm3();
  EXPECT_THROW(denormalize_theta(m, {0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(denormalize_theta(m, {0.5, 0.5, 0.5, 0.5, 1.5}), std::domain_error);
}

TEST(ArmModel, ValidateRejectsBadConstants) {
  ArmModel m = arm3();
  m.dof = 0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = arm3();
  m.limit_lo[1] = m.limit_hi[1];
  EXPECT_THROW(m.validate(), std::invalid_argument);
  m = arm3();
  m.action_step = 0;
  EXPECT_THROW(m.validate(), std::invalid_argument);
}
