#include "ppmc/oracle_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppmc {

void PursuitConfig::validate() const {
  if (!(heading_gain > 0.0) || !(speed > 0.0) || speed > 1.0 || !(slow_turn_threshold > 0.0)) {
    throw std::invalid_argument("pursuit gains must be positive and speed within (0, 1]");
  }
}

ActionCommand pursue(const RoverState& state, Point2 goal, const PursuitConfig& config) {
  const double error = angle_to_waypoint(state, goal);
  double forward = config.speed * std::max(0.0, std::cos(error));
  if (std::abs(error) > config.slow_turn_threshold) forward = 0.0;
  const double turn = std::clamp(config.heading_gain * error, -1.0, 1.0);
  return ActionCommand{forward - turn, forward + turn}.clamped();
}

OracleController::OracleController(PursuitConfig config, double command_noise)
    : config_(config), command_noise_(command_noise) {
  config_.validate();
  if (command_noise < 0.0) throw std::invalid_argument("command noise must be >= 0");
}

ActionCommand OracleController::act(const RoverState& state, const GoalPair& goals,
                                    const ObservationVector&, std::mt19937_64& rng) const {
  ActionCommand cmd = pursue(state, goals.current, config_);
  if (command_noise_ > 0.0) {
    std::normal_distribution<double> noise(0.0, command_noise_);
    cmd.left += noise(rng);
    cmd.right += noise(rng);
  }
  return cmd.clamped();
}

}  // namespace ppmc
