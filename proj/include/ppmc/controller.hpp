#pragma once

#include <memory>
#include <random>
#include <string>

#include "ppmc/observation.hpp"
#include "ppmc/policy_net.hpp"
#include "ppmc/rover_sim.hpp"

namespace ppmc {

// Anything that maps the current situation to a motor command: a learned
// policy or the scripted oracle. act() must not mutate the controller, so a
// single instance can drive many rollouts concurrently.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual ActionCommand act(const RoverState& state, const GoalPair& goals,
                            const ObservationVector& observation, std::mt19937_64& rng) const = 0;
  virtual std::string name() const = 0;
  // Observation encoding the controller expects.
  virtual YawEncoding encoding() const { return YawEncoding::kNormalized; }
  virtual NormalizationLimits limits() const { return {}; }
};

class PolicyController final : public Controller {
 public:
  // Greedy takes the Gaussian mean; otherwise actions are sampled.
  PolicyController(std::shared_ptr<const PolicyParams> params, bool greedy = true)
      : params_(std::move(params)), greedy_(greedy) {}

  ActionCommand act(const RoverState&, const GoalPair&, const ObservationVector& observation,
                    std::mt19937_64& rng) const override {
    const PolicyOutput out = forward(*params_, observation);
    return greedy_ ? greedy_action(out) : sample_action(out, rng).executed;
  }
  std::string name() const override { return greedy_ ? "policy-greedy" : "policy-stochastic"; }
  YawEncoding encoding() const override { return params_->encoding; }
  NormalizationLimits limits() const override { return params_->limits; }
  const PolicyParams& params() const { return *params_; }

 private:
  std::shared_ptr<const PolicyParams> params_;
  bool greedy_;
};

}  // namespace ppmc
