#pragma once

#include <numbers>
#include <string>

#include "ppmc/controller.hpp"

namespace ppmc {

struct PursuitConfig {
  double heading_gain = 2.0;  // normalized turn command per radian of heading error
  double speed = 1.0;         // normalized forward command
  // Beyond this heading error the rover turns in place.
  double slow_turn_threshold = std::numbers::pi / 2.0;

  void validate() const;
};

// Pure pursuit toward the current goal: forward = speed * max(0, cos e),
// turn = clamp(gain * e), (left, right) = (forward - turn, forward + turn).
ActionCommand pursue(const RoverState& state, Point2 goal, const PursuitConfig& config = {});

class OracleController final : public Controller {
 public:
  explicit OracleController(PursuitConfig config = {}, double command_noise = 0.0);

  ActionCommand act(const RoverState& state, const GoalPair& goals, const ObservationVector& observation,
                    std::mt19937_64& rng) const override;
  std::string name() const override { return "oracle"; }
  const PursuitConfig& config() const { return config_; }

 private:
  PursuitConfig config_;
  double command_noise_;  // std of additive Gaussian noise on each command, 0 = deterministic
};

}  // namespace ppmc
