#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ppmc/observation.hpp"

namespace ppmc {
namespace {

RoverState sample_state() {
  RoverState s;
  s.wheel_speeds = {1.0, -0.5, 1.0, -0.5};
  s.wheel_torques = {100.0, -400.0, 100.0, -400.0};
  s.position = {3.0, -6.0, 0.3};
  s.velocity_world = {0.1, -0.2, 0.0};
  s.velocity_body = {0.2, 0.05, 0.0};
  s.angular_velocity = {0.0, 0.0, -std::numbers::pi / 4.0};
  s.roll = 0.1;
  s.pitch = -std::numbers::pi / 4.0;
  s.yaw = std::numbers::pi / 2.0;
  s.elapsed_time = 25.0;
  return s;
}

TEST(Observation, WidthAndLayout) {
  const RoverState s = sample_state();
  const GoalPair goals{{3.0, 0.0}, {-7.5, 30.0}, false};
  const ObservationVector obs = encode(s, goals, 100.0);
  ASSERT_EQ(obs.size(), 29u);
  EXPECT_DOUBLE_EQ(obs[obs_index::kWheelSpeed], 0.5);
  EXPECT_DOUBLE_EQ(obs[obs_index::kWheelSpeed + 1], -0.25);
  EXPECT_DOUBLE_EQ(obs[obs_index::kWheelTorque], 0.5);
  EXPECT_DOUBLE_EQ(obs[obs_index::kWheelTorque + 1], -1.0);  // clamped
  EXPECT_DOUBLE_EQ(obs[obs_index::kPosition], 0.2);
  EXPECT_DOUBLE_EQ(obs[obs_index::kPosition + 1], -0.4);
  EXPECT_DOUBLE_EQ(obs[obs_index::kPosition + 2], 0.02);
  EXPECT_DOUBLE_EQ(obs[obs_index::kVelocityWorld + 1], -0.4);
  EXPECT_DOUBLE_EQ(obs[obs_index::kVelocityBody], 0.4);
  EXPECT_DOUBLE_EQ(obs[obs_index::kAngularVelocity + 2], -0.25);
  EXPECT_DOUBLE_EQ(obs[obs_index::kPitch], -0.5);
  EXPECT_DOUBLE_EQ(obs[obs_index::kYaw], 0.5);
  EXPECT_DOUBLE_EQ(obs[obs_index::kElapsedTime], -0.5);
  // Goal straight ahead: the rover faces +y and the goal is at +y.
  EXPECT_NEAR(obs[obs_index::kWaypointAngle], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(obs[obs_index::kCurrentGoal], 0.2);
  EXPECT_DOUBLE_EQ(obs[obs_index::kCurrentGoal + 1], 0.0);
  EXPECT_DOUBLE_EQ(obs[obs_index::kNextGoal], -0.5);
  EXPECT_DOUBLE_EQ(obs[obs_index::kNextGoal + 1], 1.0);
}

TEST(Observation, ZeroStateAtOrigin) {
  const ObservationVector obs = encode(RoverState{}, GoalPair{}, 100.0);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    EXPECT_EQ(obs[i], i == obs_index::kElapsedTime ? -1.0 : 0.0) << "entry " << i;
  }
}

TEST(Observation, LimitCasesAndWaypointAngle) {
  RoverState s;
  s.wheel_speeds = {2.0, 2.0, 2.0, 2.0};
  s.wheel_torques = {-200.0, -200.0, -200.0, -200.0};
  const ObservationVector obs = encode(s, GoalPair{{0.0, 5.0}, {0.0, 5.0}, false}, 100.0);
  EXPECT_EQ(obs[obs_index::kWheelSpeed], 1.0);
  EXPECT_EQ(obs[obs_index::kWheelTorque], -1.0);
  EXPECT_DOUBLE_EQ(obs[obs_index::kWaypointAngle], 0.5);
}

TEST(Observation, SinCosYawValues) {
  const GoalPair goals{};
  RoverState s;
  const auto yaw_pair = [&](double yaw) {
    s.yaw = yaw;
    const ObservationVector obs = encode_yaw_sincos(s, goals, 100.0);
    return std::pair{obs[obs_index::kYaw], obs[obs_index::kYaw + 1]};
  };
  EXPECT_EQ(yaw_pair(0.0), (std::pair{0.0, 1.0}));
  const auto [s_pi, c_pi] = yaw_pair(std::numbers::pi);
  EXPECT_NEAR(s_pi, 0.0, 1e-15);
  EXPECT_EQ(c_pi, -1.0);
  const auto [s_q, c_q] = yaw_pair(std::numbers::pi / 4.0);
  EXPECT_NEAR(s_q, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(c_q, std::sqrt(0.5), 1e-15);
}

TEST(Observation, SinCosVariantShiftsLaterEntries) {
  const RoverState s = sample_state();
  const GoalPair goals{{3.0, 0.0}, {-7.5, 3.0}, false};
  const ObservationVector a = encode(s, goals, 100.0);
  const ObservationVector b = encode_yaw_sincos(s, goals, 100.0);
  ASSERT_EQ(b.size(), 30u);
  EXPECT_EQ(observation_width(YawEncoding::kSinCos), 30u);
  for (std::size_t i = 0; i < obs_index::kYaw; ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_NEAR(b[obs_index::kYaw], 1.0, 1e-15);
  EXPECT_NEAR(b[obs_index::kYaw + 1], 0.0, 1e-15);
  for (std::size_t i = obs_index::kYaw + 1; i < a.size(); ++i) EXPECT_EQ(a[i], b[i + 1]);
  EXPECT_EQ(encode(YawEncoding::kSinCos, s, goals, 100.0), b);
}

TEST(Observation, TimeEntrySpansTheEpisode) {
  RoverState s = sample_state();
  const GoalPair goals{};
  s.elapsed_time = 0.0;
  EXPECT_DOUBLE_EQ(encode(s, goals, 200.0)[obs_index::kElapsedTime], -1.0);
  s.elapsed_time = 200.0;
  EXPECT_DOUBLE_EQ(encode(s, goals, 200.0)[obs_index::kElapsedTime], 1.0);
  s.elapsed_time = 250.0;
  EXPECT_DOUBLE_EQ(encode(s, goals, 200.0)[obs_index::kElapsedTime], 1.0);
}

TEST(AngleToWaypoint, SignsAndWrap) {
  RoverState s;
  EXPECT_NEAR(angle_to_waypoint(s, {0.0, 1.0}), std::numbers::pi / 2.0, 1e-15);
  EXPECT_NEAR(angle_to_waypoint(s, {0.0, -1.0}), -std::numbers::pi / 2.0, 1e-15);
  EXPECT_NEAR(angle_to_waypoint(s, {-1.0, 0.0}), std::numbers::pi, 1e-15);
  EXPECT_EQ(angle_to_waypoint(s, {1.0, 0.0}), 0.0);
  s.yaw = std::numbers::pi / 2.0;
  EXPECT_NEAR(angle_to_waypoint(s, {1.0, 1.0}), -std::numbers::pi / 4.0, 1e-15);
  s.yaw = 3.0;
  // atan2 = -3 rad, minus yaw 3 rad, wraps to 2pi - 6.
  EXPECT_NEAR(angle_to_waypoint(s, {std::cos(-3.0), std::sin(-3.0)}), 2.0 * std::numbers::pi - 6.0, 1e-12);
  EXPECT_EQ(angle_to_waypoint(s, {0.0, 0.0}), 0.0);
}

TEST(Observation, RejectsNonFiniteInput) {
  RoverState s = sample_state();
  EXPECT_THROW(encode(s, {}, 0.0), std::invalid_argument);
  EXPECT_THROW(encode(s, {}, -1.0), std::invalid_argument);
  EXPECT_THROW(encode(s, GoalPair{{NAN, 0.0}, {}, false}, 100.0), std::invalid_argument);
  s.wheel_torques[2] = INFINITY;
  EXPECT_THROW(encode(s, {}, 100.0), std::invalid_argument);
}

TEST(NormalizationLimits, ArrayRoundTrip) {
  NormalizationLimits n;
  n.goal = 12.0;
  n.torque = 150.0;
  EXPECT_EQ(NormalizationLimits::from_array(n.to_array()), n);
  EXPECT_EQ(n.to_array()[1], 150.0);
  EXPECT_EQ(n.to_array()[8], 12.0);
}

}  // namespace
}  // namespace ppmc
