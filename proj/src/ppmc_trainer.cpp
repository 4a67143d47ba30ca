#include "ppmc/ppmc_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace ppmc {
namespace {

double unit_draw(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

constexpr double kTimeEpsilon = 1e-9;

}  // namespace

void TrainerConfig::validate() const {
  if (!(perimeter_half_width > 0.0)) throw std::invalid_argument("training perimeter half-width must be > 0");
  if (!(capture_x > 0.0) || !(capture_y > 0.0)) throw std::invalid_argument("capture thresholds must be > 0");
  if (!(initial_limit > 0.0) || !(limit_increment > 0.0)) {
    throw std::invalid_argument("episode limit and increment must be > 0");
  }
  if (fixed_waypoints.empty() && waypoint_count != 2) {
    throw std::invalid_argument("random episodes use exactly two waypoints (intermediate and final)");
  }
  for (const Point2& p : fixed_waypoints) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("fixed waypoints must be finite");
  }
}

EpisodeSpec make_episode(std::vector<Point2> waypoints, const TrainerConfig& config) {
  if (waypoints.empty()) throw std::invalid_argument("an episode needs at least one waypoint");
  EpisodeSpec spec;
  spec.waypoints = std::move(waypoints);
  spec.time_limit = config.initial_limit;
  return spec;
}

EpisodeSpec generate_waypoints(std::mt19937_64& rng, const TrainerConfig& config) {
  const double h = config.perimeter_half_width;
  const double spacing = 2.0 * std::max(config.capture_x, config.capture_y);
  std::vector<Point2> points;
  for (std::size_t k = 0; k < config.waypoint_count; ++k) {
    int rejects = 0;
    for (;;) {
      const Point2 p{-h + 2.0 * h * unit_draw(rng), -h + 2.0 * h * unit_draw(rng)};
      bool ok = std::hypot(p.x, p.y) >= spacing;
      for (const Point2& q : points) ok = ok && std::hypot(p.x - q.x, p.y - q.y) >= spacing;
      if (ok || rejects >= 1000) {
        points.push_back(p);
        break;
      }
      ++rejects;
    }
  }
  return make_episode(std::move(points), config);
}

GoalPair goals_for(const EpisodeSpec& spec) {
  GoalPair goals;
  const std::size_t n = spec.waypoints.size();
  if (n == 0) return goals;
  if (spec.complete()) {
    goals.current = goals.next = spec.waypoints.back();
    goals.reached_final = true;
    return goals;
  }
  const std::size_t idx = spec.captured();
  goals.current = spec.waypoints[idx];
  goals.next = spec.waypoints[std::min(idx + 1, n - 1)];
  return goals;
}

bool check_capture(const RoverState& state, Point2 goal, const TrainerConfig& config) {
  return std::abs(state.position.x - goal.x) <= config.capture_x &&
         std::abs(state.position.y - goal.y) <= config.capture_y;
}

CaptureEvent on_capture(EpisodeSpec& spec, GoalPair& goals, const TrainerConfig& config, double time) {
  if (spec.complete()) return CaptureEvent::kNone;
  spec.capture_times.push_back(time);
  spec.time_limit += config.limit_increment;
  goals = goals_for(spec);
  return spec.complete() ? CaptureEvent::kFinal : CaptureEvent::kIntermediate;
}

std::string_view to_string(EpisodeOutcome outcome) {
  switch (outcome) {
    case EpisodeOutcome::kRunning: return "running";
    case EpisodeOutcome::kSuccess: return "success";
    case EpisodeOutcome::kFailure: return "failure";
    case EpisodeOutcome::kTimeout: return "timeout";
  }
  return "unknown";
}

void write_episode_header(std::ostream& out) {
  out << "episode,waypoints,outcome,fail_reason,duration,captures,capture_times,return\n";
}

void write_episode_row(std::ostream& out, const EpisodeRecord& r) {
  char buf[128];
  std::string waypoints;
  for (const Point2& p : r.waypoints) {
    std::snprintf(buf, sizeof(buf), "%s(%.3f %.3f)", waypoints.empty() ? "" : " ", p.x, p.y);
    waypoints += buf;
  }
  std::string captures;
  for (double t : r.capture_times) {
    std::snprintf(buf, sizeof(buf), "%s%.1f", captures.empty() ? "" : " ", t);
    captures += buf;
  }
  std::snprintf(buf, sizeof(buf), "%.1f", r.duration);
  out << r.index << ',' << waypoints << ',' << to_string(r.outcome) << ',' << to_string(r.fail) << ','
      << buf << ',' << r.capture_times.size() << ',' << captures << ',';
  std::snprintf(buf, sizeof(buf), "%.6g", r.episode_return);
  out << buf << '\n';
}

WaypointEnv::WaypointEnv(std::shared_ptr<const HeightField> field, WaypointEnvConfig config,
                         std::uint64_t seed)
    : field_(std::move(field)), config_(std::move(config)), rng_(seed) {
  if (!field_) throw std::invalid_argument("WaypointEnv needs a height field");
  config_.trainer.validate();
  config_.rover.validate();
}

ObservationVector WaypointEnv::encode_current() const {
  return encode(config_.encoding, state_, goals_, spec_.time_limit, config_.limits);
}

ObservationVector WaypointEnv::start_episode(EpisodeSpec spec) {
  const std::uint64_t heading_seed = rng_();
  state_ = ppmc::reset(*field_, config_.rover, heading_seed, config_.trainer.randomize_heading);
  spec_ = std::move(spec);
  goals_ = goals_for(spec_);
  info_ = EnvStepInfo{};
  episode_return_ = 0.0;
  ++episode_index_;
  trajectory_.clear();
  if (config_.record_trajectory) trajectory_.push_back(state_);
  observation_ = encode_current();
  return observation_;
}

ObservationVector WaypointEnv::reset() {
  if (!config_.trainer.fixed_waypoints.empty()) {
    return start_episode(make_episode(config_.trainer.fixed_waypoints, config_.trainer));
  }
  return start_episode(generate_waypoints(rng_, config_.trainer));
}

ObservationVector WaypointEnv::reset_with(std::vector<Point2> waypoints) {
  return start_episode(make_episode(std::move(waypoints), config_.trainer));
}

void WaypointEnv::set_waypoints(std::vector<Point2> waypoints) {
  if (waypoints.empty()) throw std::invalid_argument("waypoint list is empty");
  for (const Point2& p : waypoints) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("waypoints must be finite");
  }
  spec_.waypoints = std::move(waypoints);
  spec_.capture_times.clear();
  goals_ = goals_for(spec_);
  if (!state_.failed()) info_.outcome = EpisodeOutcome::kRunning;
  observation_ = encode_current();
}

StepResult WaypointEnv::step(const ActionCommand& action) {
  if (done()) throw std::logic_error("episode is over; reset the environment first");
  const RoverState prev = state_;
  state_ = ppmc::step(prev, action, *field_, config_.rover);
  if (config_.record_trajectory) trajectory_.push_back(state_);

  info_.terms = compute_terms(prev, state_, goals_.current);
  info_.capture = CaptureEvent::kNone;
  const double reward = compute_reward(info_.terms, config_.reward);
  episode_return_ += reward;

  if (!state_.failed() && check_capture(state_, goals_.current, config_.trainer)) {
    info_.capture = on_capture(spec_, goals_, config_.trainer, state_.elapsed_time);
  }

  if (goals_.reached_final) {
    info_.outcome = EpisodeOutcome::kSuccess;
  } else if (state_.failed()) {
    info_.outcome = EpisodeOutcome::kFailure;
  } else if (state_.elapsed_time >= spec_.time_limit - kTimeEpsilon) {
    info_.outcome = EpisodeOutcome::kTimeout;
  }

  observation_ = encode_current();
  StepResult result{observation_, reward, done(), info_.outcome == EpisodeOutcome::kSuccess};
  if (result.done) {
    records_.push_back(EpisodeRecord{.index = episode_index_,
                                     .waypoints = spec_.waypoints,
                                     .outcome = info_.outcome,
                                     .fail = state_.fail,
                                     .duration = state_.elapsed_time,
                                     .capture_times = spec_.capture_times,
                                     .episode_return = episode_return_});
  }
  return result;
}

std::vector<EpisodeRecord> WaypointEnv::drain_records() {
  std::vector<EpisodeRecord> out;
  out.swap(records_);
  return out;
}

EpisodeRecord run_episode(WaypointEnv& env, const Controller& controller, std::mt19937_64& rng) {
  while (!env.done()) {
    const ActionCommand cmd = controller.act(env.state(), env.goals(), env.observation(), rng);
    env.step(cmd);
  }
  std::vector<EpisodeRecord> records = env.drain_records();
  return records.back();
}

double probe_success_rate(const PolicyParams& policy, std::shared_ptr<const HeightField> field,
                          const WaypointEnvConfig& config, std::size_t episodes, std::uint64_t seed) {
  if (episodes == 0) return std::numeric_limits<double>::quiet_NaN();
  auto shared = std::make_shared<const PolicyParams>(policy);
  PolicyController controller(shared, true);
  WaypointEnvConfig probe_config = config;
  probe_config.record_trajectory = false;
  WaypointEnv env(std::move(field), probe_config, seed);
  std::mt19937_64 rng(seed);
  std::size_t successes = 0;
  for (std::size_t k = 0; k < episodes; ++k) {
    env.reset();
    if (run_episode(env, controller, rng).outcome == EpisodeOutcome::kSuccess) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(episodes);
}

TrainingOutcome run_training(const TrainingSetup& setup) {
  setup.trainer.validate();
  setup.learner.validate();
  auto field = std::make_shared<const HeightField>(setup.terrain);

  WaypointEnvConfig env_config{.trainer = setup.trainer,
                               .rover = setup.rover,
                               .reward = setup.reward,
                               .encoding = setup.encoding,
                               .limits = setup.limits,
                               .record_trajectory = false};

  NetworkShape shape;
  shape.input_width = observation_width(setup.encoding);
  shape.split_trunk = setup.split_trunk;
  PolicyParams initial = init_policy(shape, mix_seed(setup.learner.seed, 0xC0FFEE));
  initial.encoding = setup.encoding;
  initial.limits = setup.limits;

  std::ofstream metrics_file;
  std::ofstream episodes_file;
  std::filesystem::path checkpoint_dir;
  if (setup.output_dir) {
    std::filesystem::create_directories(*setup.output_dir);
    checkpoint_dir = *setup.output_dir / "checkpoints";
    std::filesystem::create_directories(checkpoint_dir);
    metrics_file.open(*setup.output_dir / "metrics.csv");
    episodes_file.open(*setup.output_dir / "episodes.csv");
    if (!metrics_file || !episodes_file) {
      throw std::runtime_error("cannot create training logs in " + setup.output_dir->string());
    }
    write_metrics_header(metrics_file);
    write_episode_header(episodes_file);
  }

  std::vector<WaypointEnv*> envs;
  std::vector<EpisodeRecord> episodes;
  auto drain = [&] {
    for (WaypointEnv* env : envs) {
      for (EpisodeRecord& r : env->drain_records()) {
        if (episodes_file.is_open()) write_episode_row(episodes_file, r);
        episodes.push_back(std::move(r));
      }
    }
    if (episodes_file.is_open()) episodes_file.flush();
  };

  TrainHooks hooks;
  hooks.make_env = [&](std::size_t worker) {
    auto env = std::make_unique<WaypointEnv>(field, env_config, mix_seed(setup.learner.seed, 100 + worker));
    envs.push_back(env.get());
    return env;
  };
  if (setup.probe_episodes > 0) {
    hooks.probe = [&](const PolicyParams& policy) {
      return probe_success_rate(policy, field, env_config, setup.probe_episodes,
                                mix_seed(setup.learner.seed, 0x9B0BE));
    };
  }
  hooks.after_update = [&](std::uint64_t) { drain(); };
  hooks.on_metrics = [&](const MetricsRow& row) {
    if (metrics_file.is_open()) {
      write_metrics_row(metrics_file, row);
      metrics_file.flush();
    }
  };
  if (setup.output_dir) {
    hooks.checkpoint = [&](const PolicyParams& policy, std::uint64_t step, bool final) {
      char name[64];
      std::snprintf(name, sizeof(name), "policy_%012llu.bin", static_cast<unsigned long long>(step));
      save_policy(policy, checkpoint_dir / name);
      if (final) save_policy(policy, *setup.output_dir / "policy.bin");
    };
  }

  TrainingOutcome outcome;
  outcome.result = train_loop(setup.learner, std::move(initial), hooks);
  // train_loop owns the environments; every update already drained them.
  envs.clear();
  outcome.policy = outcome.result.policy;
  outcome.episodes = std::move(episodes);
  return outcome;
}

}  // namespace ppmc
