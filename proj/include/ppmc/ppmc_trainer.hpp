#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "ppmc/controller.hpp"
#include "ppmc/learner.hpp"
#include "ppmc/observation.hpp"
#include "ppmc/reward.hpp"
#include "ppmc/rover_sim.hpp"
#include "ppmc/terrain.hpp"

namespace ppmc {

// Episodic waypoint curriculum: waypoints drawn inside a square training
// perimeter around the origin, captured in order inside an axis-aligned
// threshold box, with the episode limit extended on every capture.
struct TrainerConfig {
  double perimeter_half_width = 10.0;  // TP = [-h, h]^2
  std::size_t waypoint_count = 2;      // intermediate + final
  double capture_x = 0.5;              // B_X
  double capture_y = 0.5;              // B_Y
  double initial_limit = 100.0;        // seconds
  double limit_increment = 100.0;      // seconds added per capture
  bool randomize_heading = false;
  // When non-empty, every episode uses these waypoints instead of random draws.
  std::vector<Point2> fixed_waypoints;

  void validate() const;
};

struct EpisodeSpec {
  std::vector<Point2> waypoints;
  double time_limit = 0.0;
  std::vector<double> capture_times;  // one per captured waypoint, in order

  std::size_t captured() const { return capture_times.size(); }
  bool complete() const { return !waypoints.empty() && captured() >= waypoints.size(); }
};

// M points uniform over the perimeter, rejecting any closer than
// 2 * max(B) to the origin or to an earlier point. After 1000 rejections
// for one point the spacing guard is dropped.
EpisodeSpec generate_waypoints(std::mt19937_64& rng, const TrainerConfig& config);

EpisodeSpec make_episode(std::vector<Point2> waypoints, const TrainerConfig& config);
GoalPair goals_for(const EpisodeSpec& spec);

// |Px - Gx| <= B_X and |Py - Gy| <= B_Y (inclusive box).
bool check_capture(const RoverState& state, Point2 goal, const TrainerConfig& config);

enum class CaptureEvent { kNone, kIntermediate, kFinal };

// Advances the current goal, extends the limit by limit_increment and marks
// success on the final waypoint. A no-op once the episode is complete.
CaptureEvent on_capture(EpisodeSpec& spec, GoalPair& goals, const TrainerConfig& config, double time);

enum class EpisodeOutcome { kRunning, kSuccess, kFailure, kTimeout };
std::string_view to_string(EpisodeOutcome outcome);

struct EpisodeRecord {
  std::uint64_t index = 0;
  std::vector<Point2> waypoints;
  EpisodeOutcome outcome = EpisodeOutcome::kRunning;
  FailReason fail = FailReason::kNone;
  double duration = 0.0;
  std::vector<double> capture_times;
  double episode_return = 0.0;
};

void write_episode_header(std::ostream& out);
void write_episode_row(std::ostream& out, const EpisodeRecord& record);

struct WaypointEnvConfig {
  TrainerConfig trainer;
  RoverParams rover;
  RewardWeights reward;
  YawEncoding encoding = YawEncoding::kNormalized;
  NormalizationLimits limits;
  bool record_trajectory = false;
};

struct EnvStepInfo {
  RewardTerms terms;
  CaptureEvent capture = CaptureEvent::kNone;
  EpisodeOutcome outcome = EpisodeOutcome::kRunning;
};

// Rover-on-terrain environment running the waypoint curriculum. Every
// reset puts the rover back at the origin.
class WaypointEnv final : public Environment {
 public:
  WaypointEnv(std::shared_ptr<const HeightField> field, WaypointEnvConfig config, std::uint64_t seed);

  ObservationVector reset() override;
  StepResult step(const ActionCommand& action) override;

  // Reset with explicit waypoints, bypassing the random draw.
  ObservationVector reset_with(std::vector<Point2> waypoints);
  // Replaces the remaining goals mid-episode (teleoperation).
  void set_waypoints(std::vector<Point2> waypoints);

  const RoverState& state() const { return state_; }
  const GoalPair& goals() const { return goals_; }
  const EpisodeSpec& episode() const { return spec_; }
  const ObservationVector& observation() const { return observation_; }
  const EnvStepInfo& last_info() const { return info_; }
  const WaypointEnvConfig& config() const { return config_; }
  const HeightField& field() const { return *field_; }
  const std::vector<RoverState>& trajectory() const { return trajectory_; }
  bool done() const { return info_.outcome != EpisodeOutcome::kRunning; }

  // Episodes finished since the last drain.
  std::vector<EpisodeRecord> drain_records();

 private:
  ObservationVector start_episode(EpisodeSpec spec);
  ObservationVector encode_current() const;

  std::shared_ptr<const HeightField> field_;
  WaypointEnvConfig config_;
  std::mt19937_64 rng_;
  RoverState state_;
  EpisodeSpec spec_;
  GoalPair goals_;
  ObservationVector observation_;
  EnvStepInfo info_;
  double episode_return_ = 0.0;
  std::uint64_t episode_index_ = 0;
  std::vector<RoverState> trajectory_;
  std::vector<EpisodeRecord> records_;
};

// Runs the controller until the current episode ends. The env must have
// been reset.
EpisodeRecord run_episode(WaypointEnv& env, const Controller& controller, std::mt19937_64& rng);

struct TrainingSetup {
  TrainerConfig trainer;
  LearnerConfig learner;
  TerrainSpec terrain = terrain_preset(MapId::kTraining);
  RoverParams rover;
  RewardWeights reward;
  YawEncoding encoding = YawEncoding::kNormalized;
  NormalizationLimits limits;
  bool split_trunk = false;
  std::size_t probe_episodes = 8;
  // When set: metrics.csv, episodes.csv and checkpoints/ are written here.
  std::optional<std::filesystem::path> output_dir;
};

struct TrainingOutcome {
  PolicyParams policy;
  TrainResult result;
  std::vector<EpisodeRecord> episodes;
};

TrainingOutcome run_training(const TrainingSetup& setup);

// Greedy success rate over `episodes` fresh episodes drawn from `seed`.
double probe_success_rate(const PolicyParams& policy, std::shared_ptr<const HeightField> field,
                          const WaypointEnvConfig& config, std::size_t episodes, std::uint64_t seed);

}  // namespace ppmc
