#include <gtest/gtest.h>

#include <sstream>

#include "ppmc/reward.hpp"

namespace ppmc {
namespace {

TEST(Reward, WeightsMatchTheReference) {
  const RewardWeights w;
  EXPECT_EQ(w.velocity_to_goal, 12.5);
  EXPECT_EQ(w.alive, 0.025);
  EXPECT_EQ(w.reverse, 0.01);
  EXPECT_EQ(w.torque, 0.002);
  EXPECT_DOUBLE_EQ(w.turning, 1.0 / 18.0);
}

TEST(Reward, HandEvaluatedCases) {
  EXPECT_NEAR(compute_reward({1.0, 1.0, 0.0, 0.0, 0.0}), 12.525, 1e-12);
  EXPECT_EQ(compute_reward({}), 0.0);
  // 0.025 - 800/500 - 1/18
  EXPECT_NEAR(compute_reward({0.0, 1.0, 0.0, 800.0, 1.0}), 0.025 - 1.6 - 1.0 / 18.0, 1e-12);
  EXPECT_NEAR(compute_reward({-0.2, 1.0, 0.2, 0.0, 0.0}), -2.5 + 0.025 - 0.002, 1e-12);
}

TEST(RewardTerms, ProjectsVelocityOntoGoalDirection) {
  RoverState prev;
  prev.position = {1.0, 1.0, 0.0};
  RoverState next = prev;
  next.velocity_world = {0.3, 0.4, 0.0};
  next.velocity_body = {-0.1, 0.0, 0.0};
  next.wheel_torques = {10.0, -20.0, 10.0, -20.0};
  next.angular_velocity.z = -0.7;
  const RewardTerms t = compute_terms(prev, next, {4.0, 5.0});
  EXPECT_NEAR(t.velocity_to_goal, (0.3 * 3.0 + 0.4 * 4.0) / 5.0, 1e-15);
  EXPECT_EQ(t.alive, 1.0);
  EXPECT_DOUBLE_EQ(t.reverse, 0.1);
  EXPECT_DOUBLE_EQ(t.torque, 60.0);
  EXPECT_DOUBLE_EQ(t.turning, 0.7);
}

TEST(RewardTerms, AlignedOpposedAndReversing) {
  RoverState prev;
  RoverState next;
  next.velocity_world = {0.2, 0.0, 0.0};
  next.velocity_body = {0.2, 0.0, 0.0};
  EXPECT_NEAR(compute_terms(prev, next, {5.0, 0.0}).velocity_to_goal, 0.2, 1e-15);
  const RewardTerms behind = compute_terms(prev, next, {-5.0, 0.0});
  EXPECT_NEAR(behind.velocity_to_goal, -0.2, 1e-15);
  EXPECT_EQ(behind.reverse, 0.0);
  next.velocity_body = {-0.1, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(compute_terms(prev, next, {5.0, 0.0}).reverse, 0.1);
}

TEST(RewardTerms, FailedStepLosesAliveBonus) {
  RoverState prev;
  RoverState next;
  next.fail = FailReason::kRollover;
  next.velocity_body.x = 0.1;
  const RewardTerms t = compute_terms(prev, next, {0.0, 0.0});
  EXPECT_EQ(t.alive, 0.0);
  EXPECT_EQ(t.velocity_to_goal, 0.0);  // goal at the rover
  EXPECT_EQ(t.reverse, 0.0);
}

TEST(Reward, DecompositionRow) {
  std::ostringstream out;
  write_reward_header(out);
  write_reward_row(out, 1.5, {0.25, 1.0, 0.0, 40.0, 0.5}, 2.5);
  EXPECT_EQ(out.str(), "t,V_G,A,Rv,T,Tr,total\n1.500,0.25,1,0,40,0.5,2.5\n");
}

}  // namespace
}  // namespace ppmc
