#include "ppmc/observation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppmc {

std::array<double, NormalizationLimits::kCount> NormalizationLimits::to_array() const {
  return {wheel_speed, torque, position, velocity, angular_velocity,
          roll_pitch,  yaw,    waypoint_angle, goal};
}

NormalizationLimits NormalizationLimits::from_array(const std::array<double, kCount>& v) {
  return NormalizationLimits{.wheel_speed = v[0],
                             .torque = v[1],
                             .position = v[2],
                             .velocity = v[3],
                             .angular_velocity = v[4],
                             .roll_pitch = v[5],
                             .yaw = v[6],
                             .waypoint_angle = v[7],
                             .goal = v[8]};
}

double angle_to_waypoint(const RoverState& state, Point2 goal) {
  const double dx = goal.x - state.position.x;
  const double dy = goal.y - state.position.y;
  if (dx == 0.0 && dy == 0.0) return 0.0;
  return wrap_angle(std::atan2(dy, dx) - state.yaw);
}

namespace {

bool finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

void require_finite(const RoverState& s, const GoalPair& g, double limit) {
  bool ok = finite(s.position) && finite(s.velocity_world) && finite(s.velocity_body) &&
            finite(s.angular_velocity) && std::isfinite(s.roll) && std::isfinite(s.pitch) &&
            std::isfinite(s.yaw) && std::isfinite(s.elapsed_time) && std::isfinite(g.current.x) &&
            std::isfinite(g.current.y) && std::isfinite(g.next.x) && std::isfinite(g.next.y);
  for (double v : s.wheel_speeds) ok = ok && std::isfinite(v);
  for (double v : s.wheel_torques) ok = ok && std::isfinite(v);
  if (!ok) throw std::invalid_argument("cannot encode a non-finite rover state");
  if (!(limit > 0.0) || !std::isfinite(limit)) {
    throw std::invalid_argument("episode limit must be finite and positive");
  }
}

double scaled(double value, double divisor) { return std::clamp(value / divisor, -1.0, 1.0); }

ObservationVector encode_impl(YawEncoding encoding, const RoverState& s, const GoalPair& g,
                              double limit, const NormalizationLimits& n) {
  require_finite(s, g, limit);
  ObservationVector obs;
  obs.reserve(observation_width(encoding));
  for (double w : s.wheel_speeds) obs.push_back(scaled(w, n.wheel_speed));
  for (double t : s.wheel_torques) obs.push_back(scaled(t, n.torque));
  obs.push_back(scaled(s.position.x, n.position));
  obs.push_back(scaled(s.position.y, n.position));
  obs.push_back(scaled(s.position.z, n.position));
  for (const Vec3* v : {&s.velocity_world, &s.velocity_body}) {
    obs.push_back(scaled(v->x, n.velocity));
    obs.push_back(scaled(v->y, n.velocity));
    obs.push_back(scaled(v->z, n.velocity));
  }
  obs.push_back(scaled(s.angular_velocity.x, n.angular_velocity));
  obs.push_back(scaled(s.angular_velocity.y, n.angular_velocity));
  obs.push_back(scaled(s.angular_velocity.z, n.angular_velocity));
  obs.push_back(scaled(s.roll, n.roll_pitch));
  obs.push_back(scaled(s.pitch, n.roll_pitch));
  const double yaw = wrap_angle(s.yaw);
  if (encoding == YawEncoding::kSinCos) {
    obs.push_back(std::sin(yaw));
    obs.push_back(std::cos(yaw));
  } else {
    obs.push_back(scaled(yaw, n.yaw));
  }
  obs.push_back(std::clamp(2.0 * s.elapsed_time / limit - 1.0, -1.0, 1.0));
  obs.push_back(scaled(angle_to_waypoint(s, g.current), n.waypoint_angle));
  obs.push_back(scaled(g.current.x, n.goal));
  obs.push_back(scaled(g.current.y, n.goal));
  obs.push_back(scaled(g.next.x, n.goal));
  obs.push_back(scaled(g.next.y, n.goal));
  return obs;
}

}  // namespace

ObservationVector encode(const RoverState& state, const GoalPair& goals, double episode_limit,
                         const NormalizationLimits& limits) {
  return encode_impl(YawEncoding::kNormalized, state, goals, episode_limit, limits);
}

ObservationVector encode_yaw_sincos(const RoverState& state, const GoalPair& goals,
                                    double episode_limit, const NormalizationLimits& limits) {
  return encode_impl(YawEncoding::kSinCos, state, goals, episode_limit, limits);
}

ObservationVector encode(YawEncoding encoding, const RoverState& state, const GoalPair& goals,
                         double episode_limit, const NormalizationLimits& limits) {
  return encode_impl(encoding, state, goals, episode_limit, limits);
}

}  // namespace ppmc
