#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <span>
#include <string_view>

#include "ppmc/terrain.hpp"

namespace ppmc {

// Four-wheel rover with one velocity-controlled motor per side.
struct RoverParams {
  double chassis_length = 0.3;   // wheelbase between front and rear contacts, m
  double chassis_width = 0.3;    // track width between left and right contacts, m
  double wheel_radius = 0.1;     // m
  double mass = 7.5;             // kg
  double max_torque = 200.0;     // N·m per motor
  double max_wheel_speed = 2.0;  // rad/s
  double control_dt = 0.1;       // s
  double physics_dt = 0.005;     // s

  // Body origin height above the mean wheel-contact height is
  // wheel_radius + chassis_clearance.
  double chassis_clearance = 0.05;
  // Drivetrain inertia per side, referred to the wheel axle (kg·m²), and
  // proportional gain of the motor velocity loop (N·m·s/rad). Together they
  // give a ~1/6 s tracking time constant: 95 % of a full-speed step in ~0.5 s.
  double drive_inertia = 20.0;
  double velocity_gain = 120.0;
  double gravity = 9.81;

  double rollover_threshold = 60.0 * std::numbers::pi / 180.0;  // rad
  double spin_threshold = 3.0;                                   // rad/s
  double spin_window = 2.0;                                      // s

  // Throws std::invalid_argument when a magnitude is non-positive or
  // control_dt is not an integer multiple of physics_dt.
  void validate() const;
  int substeps() const;
  double top_speed() const { return wheel_radius * max_wheel_speed; }
  double ride_height() const { return wheel_radius + chassis_clearance; }
};

enum class FailReason { kNone, kRollover, kExcessiveTurning };

std::string_view to_string(FailReason reason);

// Wheel array order: front-left, front-right, rear-left, rear-right.
// Front and rear entries on the same side always carry the side motor's
// value.
struct RoverState {
  Vec3 position;
  double roll = 0.0;   // left side up positive
  double pitch = 0.0;  // nose up positive
  double yaw = 0.0;    // CCW from +x, wrapped to (-pi, pi]
  Vec3 velocity_world;
  Vec3 velocity_body;     // forward, left, up
  Vec3 angular_velocity;  // roll rate, pitch rate, yaw rate
  std::array<double, 4> wheel_speeds{};
  std::array<double, 4> wheel_torques{};
  double elapsed_time = 0.0;  // control_steps * control_dt
  std::int64_t control_steps = 0;
  double spin_time = 0.0;  // continuous time with |yaw rate| over threshold
  FailReason fail = FailReason::kNone;

  bool failed() const { return fail != FailReason::kNone; }
  double left_speed() const { return wheel_speeds[0]; }
  double right_speed() const { return wheel_speeds[1]; }
  double left_torque() const { return wheel_torques[0]; }
  double right_torque() const { return wheel_torques[1]; }
  double planar_speed() const { return std::hypot(velocity_world.x, velocity_world.y); }

  friend bool operator==(const RoverState&, const RoverState&) = default;
};

struct ActionCommand {
  double left = 0.0;
  double right = 0.0;

  ActionCommand clamped() const;
  friend bool operator==(const ActionCommand&, const ActionCommand&) = default;
};

struct ChassisPose {
  double z = 0.0;
  double roll = 0.0;
  double pitch = 0.0;
};

double wrap_angle(double angle);

// Fits the chassis to the terrain heights under the four wheel contacts of
// a chassis centered at (x, y) with the given heading. Works with any
// height source exposing height_at(x, y).
template <class HeightSource>
ChassisPose conform_pose(const HeightSource& terrain, double x, double y, double yaw,
                         const RoverParams& params) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  const double hl = 0.5 * params.chassis_length;
  const double hw = 0.5 * params.chassis_width;
  auto contact = [&](double fwd, double left) {
    return terrain.height_at(x + c * fwd - s * left, y + s * fwd + c * left);
  };
  const double front_left = contact(hl, hw);
  const double front_right = contact(hl, -hw);
  const double rear_left = contact(-hl, hw);
  const double rear_right = contact(-hl, -hw);

  ChassisPose pose;
  pose.z = 0.25 * (front_left + front_right + rear_left + rear_right) + params.ride_height();
  pose.pitch = std::atan2(0.5 * (front_left + front_right) - 0.5 * (rear_left + rear_right),
                          params.chassis_length);
  pose.roll = std::atan2(0.5 * (front_left + rear_left) - 0.5 * (front_right + rear_right),
                         params.chassis_width);
  return pose;
}

// Rover at the origin facing +x, at rest, conformed to the terrain. With
// randomize_heading the yaw is drawn uniformly from the seed instead.
RoverState reset(const HeightField& field, const RoverParams& params, std::uint64_t seed = 0,
                 bool randomize_heading = false);

// Advances exactly one control step (params.substeps() physics sub-steps).
// Throws std::logic_error when the state has already failed.
RoverState step(const RoverState& state, ActionCommand cmd, const HeightField& field,
                const RoverParams& params);

FailReason check_fail(const RoverState& state, const RoverParams& params);

// Trajectory CSV: t,x,y,z,roll,pitch,yaw,vx,vy,wL,wR,torqueL,torqueR.
// Values are printed with round-trip precision so re-simulations can be
// compared byte for byte.
void write_trajectory_header(std::ostream& out);
void write_trajectory_row(std::ostream& out, const RoverState& state);
void write_trajectory_csv(std::ostream& out, std::span<const RoverState> states);

}  // namespace ppmc
