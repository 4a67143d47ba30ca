#pragma once

#include <iosfwd>

#include "ppmc/observation.hpp"
#include "ppmc/rover_sim.hpp"

namespace ppmc {

struct RewardTerms {
  double velocity_to_goal = 0.0;  // V_G, m/s
  double alive = 0.0;             // A, 1 while not failed
  double reverse = 0.0;           // Rv, max(0, -forward body velocity), m/s
  double torque = 0.0;            // T, sum of |torque| over the four wheels, N·m
  double turning = 0.0;           // Tr, |yaw rate|, rad/s

  friend bool operator==(const RewardTerms&, const RewardTerms&) = default;
};

// R = w_V V_G + w_A A - w_Rv Rv - w_T T - w_Tr Tr
struct RewardWeights {
  double velocity_to_goal = 12.5;
  double alive = 1.0 / 40.0;
  double reverse = 1.0 / 100.0;
  double torque = 1.0 / 500.0;
  double turning = 1.0 / 18.0;

  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

// V_G projects the planar velocity of `next` onto the unit vector from the
// `prev` position to the goal. A is zero on the step that fails.
RewardTerms compute_terms(const RoverState& prev, const RoverState& next, Point2 goal);

double compute_reward(const RewardTerms& terms, const RewardWeights& weights = {});

// Per-step reward decomposition: t,V_G,A,Rv,T,Tr,total
void write_reward_header(std::ostream& out);
void write_reward_row(std::ostream& out, double t, const RewardTerms& terms, double total);

}  // namespace ppmc
