#include "ppmc/learner.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>

namespace ppmc {

void LearnerConfig::validate() const {
  if (rollout_length == 0 || workers == 0) {
    throw std::invalid_argument("rollout_length and workers must be positive");
  }
  if (!(discount > 0.0 && discount < 1.0)) throw std::invalid_argument("discount must lie in (0, 1)");
  if (learning_rate < 0.0 || entropy_coefficient < 0.0 || value_coefficient < 0.0 ||
      momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("learner coefficients must be non-negative (momentum < 1)");
  }
  if (!(reward_scale > 0.0)) throw std::invalid_argument("reward_scale must be positive");
  if (!(gradient_clip_norm > 0.0)) throw std::invalid_argument("gradient_clip_norm must be positive");
  if (log_interval == 0) throw std::invalid_argument("log_interval must be positive");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RolloutBatch collect_rollouts(const PolicyParams& policy, std::span<RolloutWorker> workers,
                              std::size_t rollout_length, std::vector<EpisodeStat>* episodes,
                              std::uint64_t step_base, double reward_scale) {
  const std::size_t width = policy.shape.input_width;
  RolloutBatch batch;
  batch.workers = workers.size();
  batch.steps = rollout_length;
  const std::size_t n = batch.size();
  batch.observations.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(n));
  batch.actions.resize(2, static_cast<Eigen::Index>(n));
  batch.log_probabilities.assign(n, 0.0);
  batch.rewards.assign(n, 0.0);
  batch.values.assign(n, 0.0);
  batch.dones.assign(n, 0);
  batch.bootstrap_values.assign(workers.size(), 0.0);

  std::vector<std::vector<EpisodeStat>> finished(workers.size());
  std::vector<std::exception_ptr> errors(workers.size());

  auto run_worker = [&](std::size_t w) {
    try {
      RolloutWorker& worker = workers[w];
      if (!worker.started) {
        worker.observation = worker.env->reset();
        worker.started = true;
      }
      for (std::size_t t = 0; t < rollout_length; ++t) {
        const std::size_t i = batch.index(w, t);
        if (worker.observation.size() != width) {
          throw std::invalid_argument("environment observation width does not match the policy");
        }
        const PolicyOutput out = forward(policy, worker.observation);
        const SampledAction action = sample_action(out, worker.rng);
        for (std::size_t k = 0; k < width; ++k) {
          batch.observations(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
              worker.observation[k];
        }
        batch.actions.col(static_cast<Eigen::Index>(i)) = action.raw;
        batch.log_probabilities[i] = action.log_probability;
        batch.values[i] = out.value;

        StepResult result = worker.env->step(action.executed);
        if (!std::isfinite(result.reward)) throw std::runtime_error("environment produced a non-finite reward");
        batch.rewards[i] = reward_scale * result.reward;
        batch.dones[i] = result.done ? 1 : 0;
        worker.episode_return += result.reward;
        ++worker.episode_length;
        if (result.done) {
          finished[w].push_back(EpisodeStat{.step = step_base + (t + 1) * workers.size(),
                                            .episode_return = worker.episode_return,
                                            .length = worker.episode_length,
                                            .success = result.success});
          worker.episode_return = 0.0;
          worker.episode_length = 0;
          worker.observation = worker.env->reset();
        } else {
          worker.observation = std::move(result.observation);
        }
      }
      batch.bootstrap_values[w] = forward(policy, worker.observation).value;
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };

  if (workers.size() == 1) {
    run_worker(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers.size());
    for (std::size_t w = 0; w < workers.size(); ++w) threads.emplace_back(run_worker, w);
    for (std::thread& t : threads) t.join();
  }

  for (std::size_t w = 0; w < workers.size(); ++w) {
    if (!errors[w]) continue;
    try {
      std::rethrow_exception(errors[w]);
    } catch (const std::exception& e) {
      throw std::runtime_error("rollout worker " + std::to_string(w) + ": " + e.what());
    }
  }
  if (episodes) {
    for (auto& list : finished) episodes->insert(episodes->end(), list.begin(), list.end());
  }
  return batch;
}

Advantages compute_advantages(const RolloutBatch& batch, double discount, bool normalize) {
  Advantages adv;
  const std::size_t n = batch.size();
  adv.returns.assign(n, 0.0);
  adv.advantages.assign(n, 0.0);
  for (std::size_t w = 0; w < batch.workers; ++w) {
    double running = batch.bootstrap_values[w];
    for (std::size_t t = batch.steps; t-- > 0;) {
      const std::size_t i = batch.index(w, t);
      if (batch.dones[i]) running = 0.0;
      running = batch.rewards[i] + discount * running;
      adv.returns[i] = running;
      adv.advantages[i] = running - batch.values[i];
    }
  }
  if (normalize && n > 1) {
    const double mean = std::accumulate(adv.advantages.begin(), adv.advantages.end(), 0.0) /
                        static_cast<double>(n);
    double var = 0.0;
    for (double a : adv.advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    for (double& a : adv.advantages) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
  }
  return adv;
}

LossAndGradient loss_and_gradient(const PolicyParams& policy, const RolloutBatch& batch,
                                  const Advantages& adv, const LearnerConfig& config) {
  const std::size_t n = batch.size();
  if (n == 0) throw std::invalid_argument("empty rollout batch");
  const double inv_n = 1.0 / static_cast<double>(n);

  ForwardCache cache;
  forward_batch(policy, batch.observations, cache);
  const Eigen::VectorXd std_dev = policy.log_std.array().exp().matrix();

  OutputGradients grads;
  grads.mean = Eigen::MatrixXd::Zero(cache.mean.rows(), cache.mean.cols());
  grads.value = Eigen::RowVectorXd::Zero(cache.value.cols());
  grads.log_std = Eigen::VectorXd::Zero(policy.log_std.size());

  LossReport report;
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const double a = adv.advantages[i];
    double log_prob = 0.0;
    for (Eigen::Index k = 0; k < cache.mean.rows(); ++k) {
      const double z = (batch.actions(k, col) - cache.mean(k, col)) / std_dev[k];
      log_prob += -0.5 * z * z - policy.log_std[k] - log_norm;
      grads.mean(k, col) = -a * z / std_dev[k] * inv_n;
      grads.log_std[k] += -a * (z * z - 1.0) * inv_n;
    }
    report.policy_loss += -log_prob * a * inv_n;
    const double err = cache.value(col) - adv.returns[i];
    report.value_loss += err * err * inv_n;
    grads.value(col) = config.value_coefficient * 2.0 * err * inv_n;
  }
  report.entropy = gaussian_entropy(policy.log_std);
  grads.log_std.array() -= config.entropy_coefficient;
  report.total_loss = report.policy_loss + config.value_coefficient * report.value_loss -
                      config.entropy_coefficient * report.entropy;
  if (!std::isfinite(report.total_loss)) {
    throw NonFiniteLossError("non-finite loss in update (total " + std::to_string(report.total_loss) + ")");
  }

  LossAndGradient out{report, backward(policy, cache, grads)};
  double sq = 0.0;
  out.gradient.for_each_block([&](const double* data, std::size_t size) {
    for (std::size_t k = 0; k < size; ++k) sq += data[k] * data[k];
  });
  out.report.raw_grad_norm = std::sqrt(sq);
  return out;
}

LossReport update(PolicyParams& policy, OptimizerState& optimizer, const RolloutBatch& batch,
                  const Advantages& adv, const LearnerConfig& config, double learning_rate) {
  LossAndGradient lg = loss_and_gradient(policy, batch, adv, config);
  LossReport& report = lg.report;
  if (!std::isfinite(report.raw_grad_norm)) throw NonFiniteLossError("non-finite gradient in update");

  std::vector<double> grad = lg.gradient.flatten();
  double scale = 1.0;
  if (report.raw_grad_norm > config.gradient_clip_norm) scale = config.gradient_clip_norm / report.raw_grad_norm;
  double sq = 0.0;
  for (double& g : grad) {
    g *= scale;
    sq += g * g;
  }
  report.grad_norm = std::sqrt(sq);
  report.learning_rate = learning_rate;

  if (optimizer.velocity.size() != grad.size()) optimizer.velocity.assign(grad.size(), 0.0);
  std::vector<double> params = policy.flatten();
  for (std::size_t i = 0; i < params.size(); ++i) {
    optimizer.velocity[i] = config.momentum * optimizer.velocity[i] + grad[i];
    params[i] -= learning_rate * optimizer.velocity[i];
  }
  if (learning_rate != 0.0) {
    policy.unflatten(params);
    policy.clamp_log_std();
  }
  return report;
}

double scheduled_learning_rate(const LearnerConfig& config, std::uint64_t step) {
  if (config.total_steps == 0 || step >= config.total_steps) return 0.0;
  return config.learning_rate *
         (1.0 - static_cast<double>(step) / static_cast<double>(config.total_steps));
}

void write_metrics_header(std::ostream& out) {
  out << "step,mean_reward,success_probe,policy_loss,value_loss,entropy,grad_norm,lr\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  char buf[384];
  std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.6g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                static_cast<unsigned long long>(row.step), row.mean_reward, row.success_probe,
                row.loss.policy_loss, row.loss.value_loss, row.loss.entropy, row.loss.grad_norm,
                row.loss.learning_rate);
  out << buf;
}

TrainResult train_loop(const LearnerConfig& config, PolicyParams initial, const TrainHooks& hooks) {
  config.validate();
  TrainResult result;
  result.policy = std::move(initial);
  if (config.total_steps == 0) {
    if (hooks.checkpoint) hooks.checkpoint(result.policy, 0, true);
    return result;
  }
  if (!hooks.make_env) throw std::invalid_argument("train_loop needs an environment factory");

  std::vector<RolloutWorker> workers(config.workers);
  for (std::size_t w = 0; w < config.workers; ++w) {
    workers[w].env = hooks.make_env(w);
    workers[w].rng.seed(mix_seed(config.seed, w));
  }

  OptimizerState optimizer;
  std::uint64_t step = 0;
  std::size_t updates = 0;
  std::size_t window_start = 0;  // first episode not yet reported
  const std::uint64_t per_update = config.steps_per_update();

  while (step < config.total_steps) {
    const double lr = scheduled_learning_rate(config, step);
    RolloutBatch batch = collect_rollouts(result.policy, workers, config.rollout_length,
                                          &result.episodes, step, config.reward_scale);
    step += per_update;
    const Advantages adv = compute_advantages(batch, config.discount, config.normalize_advantages);
    const LossReport report = update(result.policy, optimizer, batch, adv, config, lr);
    ++updates;
    if (hooks.after_update) hooks.after_update(step);

    const bool last = step >= config.total_steps;
    if (updates % config.log_interval == 0 || last) {
      MetricsRow row;
      row.step = step;
      row.loss = report;
      const std::size_t count = result.episodes.size() - window_start;
      if (count > 0) {
        double sum = 0.0;
        for (std::size_t i = window_start; i < result.episodes.size(); ++i) sum += result.episodes[i].episode_return;
        row.mean_reward = sum / static_cast<double>(count);
      } else {
        row.mean_reward = std::numeric_limits<double>::quiet_NaN();
      }
      window_start = result.episodes.size();
      row.success_probe = hooks.probe ? hooks.probe(result.policy) : std::numeric_limits<double>::quiet_NaN();
      result.metrics.push_back(row);
      if (hooks.on_metrics) hooks.on_metrics(row);
    }
    if (hooks.checkpoint && !last && config.checkpoint_interval > 0 &&
        updates % config.checkpoint_interval == 0) {
      hooks.checkpoint(result.policy, step, false);
    }
  }
  result.steps = step;
  if (hooks.checkpoint) hooks.checkpoint(result.policy, step, true);
  return result;
}

}  // namespace ppmc
