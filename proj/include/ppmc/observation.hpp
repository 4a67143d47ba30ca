#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ppmc/rover_sim.hpp"

namespace ppmc {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct GoalPair {
  Point2 current;
  Point2 next;
  bool reached_final = false;

  friend bool operator==(const GoalPair&, const GoalPair&) = default;
};

// Divisors that bring each raw quantity onto [-1, 1]. Quantities are
// clamped after division.
struct NormalizationLimits {
  double wheel_speed = 2.0;                         // rad/s
  double torque = 200.0;                            // N·m
  double position = 15.0;                           // m
  double velocity = 0.5;                            // m/s
  double angular_velocity = std::numbers::pi;       // rad/s
  double roll_pitch = std::numbers::pi / 2.0;       // rad
  double yaw = std::numbers::pi;                    // rad
  double waypoint_angle = std::numbers::pi;         // rad
  double goal = 15.0;                               // m

  static constexpr std::size_t kCount = 9;
  std::array<double, kCount> to_array() const;
  static NormalizationLimits from_array(const std::array<double, kCount>& values);

  friend bool operator==(const NormalizationLimits&, const NormalizationLimits&) = default;
};

enum class YawEncoding { kNormalized, kSinCos };

// Observation layout (29 entries, kNormalized):
//   [0..3]   wheel speeds FL, FR, RL, RR
//   [4..7]   wheel torques FL, FR, RL, RR
//   [8..10]  body x, y, z
//   [11..13] world-frame velocity
//   [14..16] body-frame velocity
//   [17..19] angular velocity
//   [20..22] roll, pitch, yaw
//   [23]     elapsed episode time, 2 t / limit - 1
//   [24]     angle to the current waypoint
//   [25..26] current goal x, y
//   [27..28] next goal x, y
// kSinCos replaces the yaw slot with (sin yaw, cos yaw), shifting every
// later index by one (30 entries).
namespace obs_index {
inline constexpr std::size_t kWheelSpeed = 0;
inline constexpr std::size_t kWheelTorque = 4;
inline constexpr std::size_t kPosition = 8;
inline constexpr std::size_t kVelocityWorld = 11;
inline constexpr std::size_t kVelocityBody = 14;
inline constexpr std::size_t kAngularVelocity = 17;
inline constexpr std::size_t kRoll = 20;
inline constexpr std::size_t kPitch = 21;
inline constexpr std::size_t kYaw = 22;
inline constexpr std::size_t kElapsedTime = 23;
inline constexpr std::size_t kWaypointAngle = 24;
inline constexpr std::size_t kCurrentGoal = 25;
inline constexpr std::size_t kNextGoal = 27;
}  // namespace obs_index

inline constexpr std::size_t kObservationSize = 29;

constexpr std::size_t observation_width(YawEncoding encoding) {
  return encoding == YawEncoding::kSinCos ? kObservationSize + 1 : kObservationSize;
}

using ObservationVector = std::vector<double>;

// atan2(goal - position) - yaw, wrapped to (-pi, pi]; 0 when the goal
// coincides with the rover position.
double angle_to_waypoint(const RoverState& state, Point2 goal);

// Throws std::invalid_argument on non-finite input or a non-positive
// episode limit.
ObservationVector encode(const RoverState& state, const GoalPair& goals, double episode_limit,
                         const NormalizationLimits& limits = {});
ObservationVector encode_yaw_sincos(const RoverState& state, const GoalPair& goals,
                                    double episode_limit, const NormalizationLimits& limits = {});
ObservationVector encode(YawEncoding encoding, const RoverState& state, const GoalPair& goals,
                         double episode_limit, const NormalizationLimits& limits = {});

}  // namespace ppmc
