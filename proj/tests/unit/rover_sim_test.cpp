#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "ppmc/rover_sim.hpp"

namespace ppmc {
namespace {

struct Plane {
  double a;  // dh/dx
  double b;  // dh/dy
  double height_at(double x, double y) const { return a * x + b * y; }
};

RoverState drive(const HeightField& field, ActionCommand cmd, int steps, const RoverParams& params = {}) {
  RoverState s = reset(field, params);
  for (int i = 0; i < steps && !s.failed(); ++i) s = step(s, cmd, field, params);
  return s;
}

TEST(RoverParams, DefaultsAreValid) {
  const RoverParams p;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.substeps(), 20);
  EXPECT_DOUBLE_EQ(p.top_speed(), 0.2);
  EXPECT_DOUBLE_EQ(p.ride_height(), 0.15);
}

TEST(RoverParams, RejectsNonIntegerSubsteps) {
  RoverParams p;
  p.physics_dt = 0.003;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = RoverParams{};
  p.mass = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(ActionCommand, ClampsAndZeroesNan) {
  EXPECT_EQ((ActionCommand{2.0, -3.0}.clamped()), (ActionCommand{1.0, -1.0}));
  EXPECT_EQ((ActionCommand{std::nan(""), 0.5}.clamped()), (ActionCommand{0.0, 0.5}));
}

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  const double pi = std::numbers::pi;
  EXPECT_DOUBLE_EQ(wrap_angle(0.5), 0.5);
  EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
  EXPECT_NEAR(wrap_angle(3.0 * pi), pi, 1e-12);
  EXPECT_NEAR(wrap_angle(-0.5 - 4.0 * pi), -0.5, 1e-12);
}

TEST(ConformPose, MatchesInclinedPlaneGeometry) {
  const RoverParams p;
  const Plane plane{0.2, -0.1};
  const ChassisPose pose = conform_pose(plane, 1.0, 2.0, 0.0, p);
  EXPECT_NEAR(pose.pitch, std::atan(0.2), 1e-12);
  // The left side sits at +y, which is lower on this plane.
  EXPECT_NEAR(pose.roll, std::atan(-0.1), 1e-12);
  EXPECT_NEAR(pose.z, plane.height_at(1.0, 2.0) + p.ride_height(), 1e-12);

  // Facing +y the same plane becomes a roll to the right and a downhill pitch.
  const ChassisPose turned = conform_pose(plane, 1.0, 2.0, std::numbers::pi / 2.0, p);
  EXPECT_NEAR(turned.pitch, std::atan(-0.1), 1e-12);
  EXPECT_NEAR(turned.roll, std::atan(-0.2), 1e-12);
}

TEST(ConformPose, GentleRampAlongX) {
  const RoverParams p;
  const Plane ramp{0.1, 0.0};
  const ChassisPose ahead = conform_pose(ramp, 2.0, 1.0, 0.0, p);
  EXPECT_NEAR(ahead.pitch, std::atan(0.1), 1e-6);
  EXPECT_NEAR(ahead.roll, 0.0, 1e-12);
  const ChassisPose side = conform_pose(ramp, 2.0, 1.0, std::numbers::pi / 2.0, p);
  EXPECT_NEAR(std::abs(side.roll), std::atan(0.1), 1e-6);
  EXPECT_NEAR(side.pitch, 0.0, 1e-12);
}

TEST(Rover, FlatResetPose) {
  const RoverParams p;
  const RoverState s = reset(HeightField(flat_terrain()), p);
  EXPECT_EQ(s.position, (Vec3{0.0, 0.0, p.wheel_radius + p.chassis_clearance}));
  EXPECT_EQ(s.roll, 0.0);
  EXPECT_EQ(s.pitch, 0.0);
}

TEST(Rover, IdleCommandOnlyAdvancesTime) {
  const HeightField field(flat_terrain());
  const RoverParams p;
  const RoverState start = reset(field, p);
  RoverState s = step(start, {0.0, 0.0}, field, p);
  EXPECT_EQ(s.elapsed_time, 0.1);
  EXPECT_EQ(s.control_steps, 1);
  s.elapsed_time = start.elapsed_time;
  s.control_steps = start.control_steps;
  EXPECT_EQ(s, start);
}

TEST(Rover, ResetsAtOriginConformedToTerrain) {
  for (int id = 1; id <= 3; ++id) {
    const HeightField field(terrain_preset(id));
    const RoverState s = reset(field, RoverParams{});
    EXPECT_EQ(s.position.x, 0.0);
    EXPECT_EQ(s.position.y, 0.0);
    EXPECT_EQ(s.yaw, 0.0);
    EXPECT_EQ(s.elapsed_time, 0.0);
    EXPECT_FALSE(s.failed());
    EXPECT_LT(std::abs(s.roll), 0.05);
    EXPECT_LT(std::abs(s.pitch), 0.05);
  }
}

TEST(Rover, RandomHeadingIsSeeded) {
  const HeightField field(flat_terrain());
  const RoverState a = reset(field, RoverParams{}, 11, true);
  const RoverState b = reset(field, RoverParams{}, 11, true);
  const RoverState c = reset(field, RoverParams{}, 12, true);
  EXPECT_EQ(a.yaw, b.yaw);
  EXPECT_NE(a.yaw, c.yaw);
}

TEST(Rover, StraightDriveReachesTopSpeedOnFlatGround) {
  const HeightField field(flat_terrain());
  const RoverState s = drive(field, {1.0, 1.0}, 100);
  EXPECT_NEAR(s.velocity_world.x, 0.2, 1e-6);
  EXPECT_NEAR(s.velocity_world.y, 0.0, 1e-12);
  EXPECT_NEAR(s.velocity_body.x, 0.2, 1e-6);
  EXPECT_EQ(s.yaw, 0.0);
  // Ten seconds at no more than top speed, minus the short spin-up.
  EXPECT_GT(s.position.x, 1.8);
  EXPECT_LE(s.position.x, 2.0);
  EXPECT_DOUBLE_EQ(s.position.z, RoverParams{}.ride_height());
}

TEST(Rover, BodyVelocityFollowsHeading) {
  const HeightField field(flat_terrain());
  const RoverParams p;
  RoverState s = reset(field, p);
  for (int i = 0; i < 30; ++i) s = step(s, {-1.0, 1.0}, field, p);
  for (int i = 0; i < 60; ++i) s = step(s, {1.0, 1.0}, field, p);
  EXPECT_NEAR(s.velocity_body.x, s.planar_speed(), 1e-9);
  EXPECT_NEAR(s.velocity_body.y, 0.0, 1e-9);
  EXPECT_NEAR(std::atan2(s.velocity_world.y, s.velocity_world.x), s.yaw, 1e-9);
}

TEST(Rover, DifferentialCommandTurnsInTheCommandedDirection) {
  const HeightField field(flat_terrain());
  const RoverState ccw = drive(field, {-1.0, 1.0}, 10);
  const RoverState cw = drive(field, {1.0, -1.0}, 10);
  EXPECT_GT(ccw.yaw, 0.0);
  EXPECT_LT(cw.yaw, 0.0);
  // Steady in-place spin: r (wR - wL) / W with both wheels at the limit.
  const RoverState settled = drive(field, {-1.0, 1.0}, 30);
  EXPECT_NEAR(settled.angular_velocity.z, 0.1 * 4.0 / 0.3, 1e-6);
  EXPECT_NEAR(ccw.position.x, 0.0, 1e-12);
  EXPECT_NEAR(ccw.planar_speed(), 0.0, 1e-12);
}

TEST(Rover, WheelEntriesDuplicatePerSide) {
  const HeightField field(terrain_preset(1));
  const RoverState s = drive(field, {0.3, 0.9}, 25);
  EXPECT_EQ(s.wheel_speeds[0], s.wheel_speeds[2]);
  EXPECT_EQ(s.wheel_speeds[1], s.wheel_speeds[3]);
  EXPECT_EQ(s.wheel_torques[0], s.wheel_torques[2]);
  EXPECT_EQ(s.wheel_torques[1], s.wheel_torques[3]);
  for (double t : s.wheel_torques) EXPECT_LE(std::abs(t), 200.0);
  for (double w : s.wheel_speeds) EXPECT_LE(std::abs(w), 2.0);
}

TEST(Rover, SingleSubstepFollowsDriveModel) {
  RoverParams p;
  p.control_dt = p.physics_dt;
  const HeightField field(flat_terrain());
  const RoverState s = drive(field, {1.0, -0.25}, 1, p);
  // Left: error 2 rad/s asks for 240 N·m, clamped to 200. Right: error -0.5
  // gives -60 N·m. Speed gains dt * torque / inertia.
  EXPECT_DOUBLE_EQ(s.wheel_torques[0], 200.0);
  EXPECT_DOUBLE_EQ(s.wheel_torques[1], -60.0);
  EXPECT_DOUBLE_EQ(s.wheel_speeds[0], 0.005 * 200.0 / 20.0);
  EXPECT_DOUBLE_EQ(s.wheel_speeds[1], 0.005 * -60.0 / 20.0);
}

TEST(Rover, ElapsedTimeIsExactStepCount) {
  const HeightField field(flat_terrain());
  const RoverState s = drive(field, {0.0, 0.0}, 1000);
  EXPECT_EQ(s.control_steps, 1000);
  EXPECT_EQ(s.elapsed_time, 100.0);
  EXPECT_EQ(s.position.x, 0.0);
}

TEST(Rover, GravitySlowsClimbing) {
  const RoverParams p;
  const HeightField rough(terrain_preset(3));
  RoverState s = reset(rough, p);
  double worst_gap = 0.0;
  for (int i = 0; i < 300 && !s.failed(); ++i) {
    s = step(s, {1.0, 1.0}, rough, p);
    if (s.pitch > 0.2) worst_gap = std::max(worst_gap, 2.0 - s.wheel_speeds[0]);
  }
  EXPECT_GT(worst_gap, 0.0);
}

TEST(Rover, RolloverFailsAndStopsStepping) {
  RoverParams p;
  p.rollover_threshold = 0.05;
  const HeightField field(terrain_preset(3));
  const RoverState s = drive(field, {1.0, 1.0}, 400, p);
  ASSERT_TRUE(s.failed());
  EXPECT_EQ(s.fail, FailReason::kRollover);
  EXPECT_THROW(step(s, {1.0, 1.0}, field, p), std::logic_error);
}

TEST(Rover, SustainedSpinFails) {
  RoverParams p;
  p.spin_threshold = 1.0;
  p.spin_window = 0.5;
  const HeightField field(flat_terrain());
  RoverState s = reset(field, p);
  int steps = 0;
  while (!s.failed() && steps < 100) {
    s = step(s, {-1.0, 1.0}, field, p);
    ++steps;
  }
  EXPECT_EQ(s.fail, FailReason::kExcessiveTurning);
  EXPECT_GE(s.spin_time, 0.5 - 1e-12);
  EXPECT_LT(steps, 20);
}

TEST(Rover, DefaultSpinLimitIsUnreachableByInPlaceRotation) {
  const HeightField field(flat_terrain());
  const RoverState s = drive(field, {-1.0, 1.0}, 300);
  EXPECT_FALSE(s.failed());
}

TEST(Rover, CheckFailThresholds) {
  const RoverParams p;
  RoverState s;
  EXPECT_EQ(check_fail(s, p), FailReason::kNone);
  s.roll = p.rollover_threshold;
  EXPECT_EQ(check_fail(s, p), FailReason::kNone);
  s.roll = -(p.rollover_threshold + 1e-9);
  EXPECT_EQ(check_fail(s, p), FailReason::kRollover);
  s.roll = 0.0;
  s.angular_velocity.z = 3.5;
  s.spin_time = 1.9;
  EXPECT_EQ(check_fail(s, p), FailReason::kNone);
  s.spin_time = 2.0;
  EXPECT_EQ(check_fail(s, p), FailReason::kExcessiveTurning);
}

TEST(Rover, DefaultFailVerdicts) {
  const RoverParams p;
  RoverState s;
  s.roll = 80.0 * std::numbers::pi / 180.0;
  EXPECT_EQ(check_fail(s, p), FailReason::kRollover);
  s.roll = 0.0;
  s.pitch = -80.0 * std::numbers::pi / 180.0;
  EXPECT_EQ(check_fail(s, p), FailReason::kRollover);

  // 3.5 rad/s held for 2.5 s, accumulated the way step() does.
  const HeightField field(flat_terrain());
  RoverState spin = reset(field, p);
  spin.angular_velocity.z = 3.5;
  FailReason verdict = FailReason::kNone;
  for (int i = 0; i < 25 && verdict == FailReason::kNone; ++i) {
    spin.spin_time += p.control_dt;
    verdict = check_fail(spin, p);
  }
  EXPECT_EQ(verdict, FailReason::kExcessiveTurning);
}

TEST(Rover, SameCommandsGiveIdenticalStates) {
  const HeightField field(terrain_preset(1));
  const RoverParams p;
  RoverState a = reset(field, p);
  RoverState b = reset(field, p);
  for (int i = 0; i < 200; ++i) {
    const ActionCommand cmd{std::sin(0.1 * i), std::cos(0.07 * i)};
    a = step(a, cmd, field, p);
    b = step(b, cmd, field, p);
    ASSERT_EQ(a, b);
  }
}

TEST(Rover, TrajectoryCsvRoundTripsDoubles) {
  const HeightField field(terrain_preset(1));
  const RoverState s = drive(field, {0.7, 0.4}, 37);
  std::ostringstream out;
  write_trajectory_csv(out, std::span<const RoverState>(&s, 1));
  std::istringstream in(out.str());
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,x,y,z,roll,pitch,yaw,vx,vy,wL,wR,torqueL,torqueR");
  std::istringstream fields(row);
  std::string cell;
  std::vector<double> values;
  while (std::getline(fields, cell, ',')) values.push_back(std::stod(cell));
  ASSERT_EQ(values.size(), 13u);
  EXPECT_EQ(values[0], s.elapsed_time);
  EXPECT_EQ(values[1], s.position.x);
  EXPECT_EQ(values[6], s.yaw);
  EXPECT_EQ(values[12], s.right_torque());
}

}  // namespace
}  // namespace ppmc
