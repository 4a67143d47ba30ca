#include "ppmc/reward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ppmc {

RewardTerms compute_terms(const RoverState& prev, const RoverState& next, Point2 goal) {
  RewardTerms terms;
  const double dx = goal.x - prev.position.x;
  const double dy = goal.y - prev.position.y;
  const double distance = std::hypot(dx, dy);
  if (distance > 0.0) {
    terms.velocity_to_goal = (next.velocity_world.x * dx + next.velocity_world.y * dy) / distance;
  }
  terms.alive = next.failed() ? 0.0 : 1.0;
  terms.reverse = std::max(0.0, -next.velocity_body.x);
  for (double t : next.wheel_torques) terms.torque += std::abs(t);
  terms.turning = std::abs(next.angular_velocity.z);
  return terms;
}

double compute_reward(const RewardTerms& t, const RewardWeights& w) {
  return w.velocity_to_goal * t.velocity_to_goal + w.alive * t.alive - w.reverse * t.reverse -
         w.torque * t.torque - w.turning * t.turning;
}

void write_reward_header(std::ostream& out) { out << "t,V_G,A,Rv,T,Tr,total\n"; }

void write_reward_row(std::ostream& out, double t, const RewardTerms& terms, double total) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%.3f,%.9g,%.0f,%.9g,%.9g,%.9g,%.9g\n", t, terms.velocity_to_goal,
                terms.alive, terms.reverse, terms.torque, terms.turning, total);
  out << buf;
}

}  // namespace ppmc
