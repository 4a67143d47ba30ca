#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "ppmc/observation.hpp"
#include "ppmc/policy_net.hpp"
#include "ppmc/rover_sim.hpp"

namespace ppmc {

struct StepResult {
  ObservationVector observation;
  double reward = 0.0;
  bool done = false;
  bool success = false;  // meaningful when done
};

// Episodic environment driven by the learner. Implementations are owned by
// exactly one rollout worker.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual ObservationVector reset() = 0;
  virtual StepResult step(const ActionCommand& action) = 0;
};

struct LearnerConfig {
  std::size_t rollout_length = 40;
  std::size_t workers = 8;
  double learning_rate = 3e-3;  // decays linearly to zero at total_steps
  double entropy_coefficient = 0.01;
  double value_coefficient = 0.5;
  double discount = 0.99;
  double gradient_clip_norm = 0.5;
  double momentum = 0.9;
  double reward_scale = 0.02;  // applied to rewards before returns; logged returns stay unscaled
  bool normalize_advantages = true;
  std::uint64_t total_steps = 0;  // environment steps summed over workers
  std::uint64_t seed = 0;
  std::size_t log_interval = 10;         // updates between metrics rows
  std::size_t checkpoint_interval = 0;   // updates between checkpoints, 0 = final only

  void validate() const;
  std::uint64_t steps_per_update() const { return rollout_length * workers; }
};

// Transitions are stored worker-major: index = worker * steps + t.
struct RolloutBatch {
  std::size_t workers = 0;
  std::size_t steps = 0;
  Eigen::MatrixXd observations;   // width x N
  Eigen::MatrixXd actions;        // 2 x N, pre-clamp samples
  std::vector<double> log_probabilities;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;        // episode ended after this transition (bytes: written from worker threads)
  std::vector<double> bootstrap_values;   // per worker, V of the observation after the last step

  std::size_t size() const { return workers * steps; }
  std::size_t index(std::size_t worker, std::size_t t) const { return worker * steps + t; }
};

struct EpisodeStat {
  std::uint64_t step = 0;  // global environment step at which the episode ended
  double episode_return = 0.0;
  std::size_t length = 0;
  bool success = false;
};

struct RolloutWorker {
  std::unique_ptr<Environment> env;
  ObservationVector observation;
  std::mt19937_64 rng;
  double episode_return = 0.0;
  std::size_t episode_length = 0;
  bool started = false;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Each worker advances rollout_length steps with actions sampled from the
// policy; finished episodes reset in place. Workers run on their own
// threads against a read-only policy. Completed episodes are appended to
// `episodes` in worker order with `step_base` as the step stamp.
RolloutBatch collect_rollouts(const PolicyParams& policy, std::span<RolloutWorker> workers,
                              std::size_t rollout_length, std::vector<EpisodeStat>* episodes = nullptr,
                              std::uint64_t step_base = 0, double reward_scale = 1.0);

struct Advantages {
  std::vector<double> returns;
  std::vector<double> advantages;
};

// n-step bootstrapped returns truncated at episode ends, advantages
// A = R - V, optionally normalized to zero mean and unit variance.
Advantages compute_advantages(const RolloutBatch& batch, double discount, bool normalize = true);

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;  // mean squared error, before the coefficient
  double entropy = 0.0;
  double total_loss = 0.0;
  double grad_norm = 0.0;      // after clipping
  double raw_grad_norm = 0.0;  // before clipping
  double learning_rate = 0.0;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OptimizerState {
  std::vector<double> velocity;
};

// Loss and its gradient for one batch without touching the parameters.
struct LossAndGradient {
  LossReport report;
  PolicyParams gradient;
};
LossAndGradient loss_and_gradient(const PolicyParams& policy, const RolloutBatch& batch,
                                  const Advantages& adv, const LearnerConfig& config);

// One clipped momentum-SGD step at the given learning rate. Throws
// NonFiniteLossError and leaves the policy untouched if the loss or
// gradient is not finite.
LossReport update(PolicyParams& policy, OptimizerState& optimizer, const RolloutBatch& batch,
                  const Advantages& adv, const LearnerConfig& config, double learning_rate);

double scheduled_learning_rate(const LearnerConfig& config, std::uint64_t step);

struct MetricsRow {
  std::uint64_t step = 0;
  double mean_reward = 0.0;  // mean return of episodes finished since the last row, NaN if none
  double success_probe = 0.0;  // NaN when no probe is configured
  LossReport loss;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

struct TrainHooks {
  std::function<std::unique_ptr<Environment>(std::size_t worker)> make_env;
  // Greedy success rate in [0, 1] on probe episodes.
  std::function<double(const PolicyParams&)> probe;
  std::function<void(const MetricsRow&)> on_metrics;
  std::function<void(const PolicyParams&, std::uint64_t step, bool final)> checkpoint;
  std::function<void(std::uint64_t step)> after_update;
};

struct TrainResult {
  PolicyParams policy;
  std::vector<MetricsRow> metrics;
  std::vector<EpisodeStat> episodes;
  std::uint64_t steps = 0;
};

TrainResult train_loop(const LearnerConfig& config, PolicyParams initial, const TrainHooks& hooks);

}  // namespace ppmc
