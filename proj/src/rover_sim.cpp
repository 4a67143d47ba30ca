#include "ppmc/rover_sim.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

namespace ppmc {

void RoverParams::validate() const {
  const double magnitudes[] = {chassis_length, chassis_width, wheel_radius, mass,
                               max_torque,     max_wheel_speed, control_dt, physics_dt,
                               drive_inertia,  velocity_gain,   rollover_threshold,
                               spin_threshold, spin_window};
  for (double m : magnitudes) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw std::invalid_argument("rover parameters must be finite and strictly positive");
    }
  }
  if (chassis_clearance < 0.0 || gravity < 0.0) {
    throw std::invalid_argument("rover clearance and gravity must be non-negative");
  }
  const double ratio = control_dt / physics_dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw std::invalid_argument("control_dt must be an integer multiple of physics_dt");
  }
}

int RoverParams::substeps() const {
  return static_cast<int>(std::round(control_dt / physics_dt));
}

std::string_view to_string(FailReason reason) {
  switch (reason) {
    case FailReason::kNone: return "none";
    case FailReason::kRollover: return "rollover";
    case FailReason::kExcessiveTurning: return "excessive_turning";
  }
  return "unknown";
}

ActionCommand ActionCommand::clamped() const {
  auto clip = [](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0); };
  return ActionCommand{clip(left), clip(right)};
}

double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * std::numbers::pi);
  if (wrapped <= -std::numbers::pi) wrapped += 2.0 * std::numbers::pi;
  return wrapped;
}

namespace {

// Body-frame components of a world vector for the given attitude.
Vec3 to_body(const Vec3& v, double roll, double pitch, double yaw) {
  // Body axes: forward f, left l, up u, with nose-up pitch and left-up roll.
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const Vec3 f{cp * cy, cp * sy, sp};
  // Left axis before roll is (-sy, cy, 0); up before roll is (-sp*cy, -sp*sy, cp).
  const Vec3 l0{-sy, cy, 0.0};
  const Vec3 u0{-sp * cy, -sp * sy, cp};
  const Vec3 l{cr * l0.x + sr * u0.x, cr * l0.y + sr * u0.y, cr * l0.z + sr * u0.z};
  const Vec3 u{-sr * l0.x + cr * u0.x, -sr * l0.y + cr * u0.y, -sr * l0.z + cr * u0.z};
  auto dot = [&](const Vec3& a) { return a.x * v.x + a.y * v.y + a.z * v.z; };
  return Vec3{dot(f), dot(l), dot(u)};
}

}  // namespace

RoverState reset(const HeightField& field, const RoverParams& params, std::uint64_t seed,
                 bool randomize_heading) {
  params.validate();
  RoverState state;
  if (randomize_heading) {
    std::mt19937_64 gen(seed);
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    state.yaw = wrap_angle(2.0 * std::numbers::pi * u - std::numbers::pi);
  }
  const ChassisPose pose = conform_pose(field, 0.0, 0.0, state.yaw, params);
  state.position = Vec3{0.0, 0.0, pose.z};
  state.roll = pose.roll;
  state.pitch = pose.pitch;
  return state;
}

FailReason check_fail(const RoverState& state, const RoverParams& params) {
  if (std::abs(state.roll) > params.rollover_threshold ||
      std::abs(state.pitch) > params.rollover_threshold) {
    return FailReason::kRollover;
  }
  if (std::abs(state.angular_velocity.z) > params.spin_threshold &&
      state.spin_time >= params.spin_window) {
    return FailReason::kExcessiveTurning;
  }
  return FailReason::kNone;
}

RoverState step(const RoverState& state, ActionCommand cmd, const HeightField& field,
                const RoverParams& params) {
  if (state.failed()) throw std::logic_error("cannot step a failed rover state");
  const ActionCommand command = cmd.clamped();
  const double dt = params.physics_dt;
  const int substeps = params.substeps();
  const double target[2] = {command.left * params.max_wheel_speed,
                            command.right * params.max_wheel_speed};

  RoverState next = state;
  double omega[2] = {state.wheel_speeds[0], state.wheel_speeds[1]};
  double torque[2] = {0.0, 0.0};

  for (int i = 0; i < substeps; ++i) {
    // Gravity along the slope, shared equally by both sides.
    const double gravity_torque =
        0.5 * params.mass * params.gravity * std::sin(next.pitch) * params.wheel_radius;
    for (int side = 0; side < 2; ++side) {
      torque[side] = std::clamp(params.velocity_gain * (target[side] - omega[side]),
                                -params.max_torque, params.max_torque);
      omega[side] += dt * (torque[side] - gravity_torque) / params.drive_inertia;
      omega[side] = std::clamp(omega[side], -params.max_wheel_speed, params.max_wheel_speed);
    }

    const double forward = params.wheel_radius * 0.5 * (omega[0] + omega[1]);
    const double yaw_rate = params.wheel_radius * (omega[1] - omega[0]) / params.chassis_width;

    const Vec3 before = next.position;
    const double roll_before = next.roll;
    const double pitch_before = next.pitch;

    next.yaw = wrap_angle(next.yaw + yaw_rate * dt);
    const double horizontal = forward * std::cos(next.pitch);
    next.position.x += horizontal * std::cos(next.yaw) * dt;
    next.position.y += horizontal * std::sin(next.yaw) * dt;

    const ChassisPose pose = conform_pose(field, next.position.x, next.position.y, next.yaw, params);
    next.position.z = pose.z;
    next.roll = pose.roll;
    next.pitch = pose.pitch;

    next.velocity_world = Vec3{(next.position.x - before.x) / dt, (next.position.y - before.y) / dt,
                               (next.position.z - before.z) / dt};
    next.angular_velocity =
        Vec3{(next.roll - roll_before) / dt, (next.pitch - pitch_before) / dt, yaw_rate};
    next.spin_time = std::abs(yaw_rate) > params.spin_threshold ? next.spin_time + dt : 0.0;

    next.fail = check_fail(next, params);
    if (next.failed()) break;
  }

  next.velocity_body = to_body(next.velocity_world, next.roll, next.pitch, next.yaw);
  next.wheel_speeds = {omega[0], omega[1], omega[0], omega[1]};
  next.wheel_torques = {torque[0], torque[1], torque[0], torque[1]};
  next.control_steps = state.control_steps + 1;
  next.elapsed_time = static_cast<double>(next.control_steps) * params.control_dt;
  return next;
}

void write_trajectory_header(std::ostream& out) {
  out << "t,x,y,z,roll,pitch,yaw,vx,vy,wL,wR,torqueL,torqueR\n";
}

void write_trajectory_row(std::ostream& out, const RoverState& s) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                s.elapsed_time, s.position.x, s.position.y, s.position.z, s.roll, s.pitch, s.yaw,
                s.velocity_world.x, s.velocity_world.y, s.left_speed(), s.right_speed(),
                s.left_torque(), s.right_torque());
  out << buf;
}

void write_trajectory_csv(std::ostream& out, std::span<const RoverState> states) {
  write_trajectory_header(out);
  for (const RoverState& s : states) write_trajectory_row(out, s);
}

}  // namespace ppmc
