#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ppmc/controller.hpp"
#include "ppmc/ppmc_trainer.hpp"

namespace ppmc {

struct TestCase {
  int id = 0;
  Point2 intermediate;
  Point2 final_point;
};

// The four two-point paths, all starting from the origin.
std::span<const TestCase> standard_cases();
const TestCase& standard_case(int id);

struct EvalConfig {
  // 200 s up front and +100 s on the intermediate capture: 300 s at most.
  double initial_limit = 200.0;
  double limit_increment = 100.0;
  double capture_x = 0.5;
  double capture_y = 0.5;
  RoverParams rover;
  RewardWeights reward;
  std::uint64_t base_seed = 0;
  std::size_t threads = 0;  // 0 = hardware concurrency

  // 100 s plus 100 s per capture, the budget used during training.
  static EvalConfig training_budget();
  void validate() const;
  TrainerConfig trainer_config() const;
};

struct TrialResult {
  int case_id = 0;
  int map_id = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  EpisodeOutcome outcome = EpisodeOutcome::kRunning;
  FailReason fail = FailReason::kNone;
  double duration = 0.0;
  std::vector<double> capture_times;
  double max_abs_roll = 0.0;
  double max_abs_pitch = 0.0;
  std::string trajectory;  // path relative to the output directory, empty if not written

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

struct TrialRun {
  TrialResult result;
  std::vector<RoverState> states;
};

std::uint64_t trial_seed(std::uint64_t base_seed, int case_id, int map_id, std::size_t trial);

// One trial from the origin. The controller is only read; stochastic
// controllers draw from an rng seeded with trial_seed().
TrialRun run_trial(const Controller& controller, const TestCase& test_case,
                   std::shared_ptr<const HeightField> field, int map_id, std::size_t trial,
                   const EvalConfig& config);
// Same, with an explicit rng seed (replay uses the seed stored with a trial).
TrialRun run_trial_with_seed(const Controller& controller, const TestCase& test_case,
                             std::shared_ptr<const HeightField> field, int map_id, std::size_t trial,
                             const EvalConfig& config, std::uint64_t seed);

struct EvalMap {
  int id = 0;
  std::shared_ptr<const HeightField> field;
};

EvalMap load_eval_map(int id);

struct TrialKey {
  int case_id;
  int map_id;
  std::size_t trial;
};

struct MatrixRun {
  std::vector<TrialResult> results;  // sorted by (case, map, trial)
  // Planar path per trial, same order as results.
  std::vector<std::vector<Point2>> paths;
};

// Replay metadata stored beside each trajectory CSV.
struct TrialMeta {
  int case_id = 0;
  int map_id = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string controller;  // "oracle", "policy-greedy" or "policy-stochastic"
  std::string policy_path;
  std::uint64_t policy_checksum = 0;
  double command_noise = 0.0;
  double initial_limit = 0.0;
  double limit_increment = 0.0;
  double capture_x = 0.0;
  double capture_y = 0.0;
};

struct TrajectoryOutput {
  std::filesystem::path dir;
  TrialMeta meta;  // controller fields; per-trial fields are filled in
};

// Every case on every map, `trials` times each, spread over worker threads.
// With output set, each trial's CSV and replay metadata land in
// dir/<case>_<map>_<trial>.csv and .meta.json. `order`, when given,
// overrides the execution order; results are still merged by key.
MatrixRun run_matrix(const Controller& controller, std::span<const TestCase> cases,
                     std::span<const EvalMap> maps, std::size_t trials, const EvalConfig& config,
                     const std::optional<TrajectoryOutput>& output = std::nullopt,
                     std::span<const TrialKey> order = {});

struct CellSummary {
  int case_id = 0;
  int map_id = 0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  double success_percent() const;
};

// One cell per (case, map) present in results. Throws on empty input.
std::vector<CellSummary> summarize(std::span<const TrialResult> results);

void write_success_matrix_csv(std::ostream& out, std::span<const CellSummary> cells);
void write_trials_csv(std::ostream& out, std::span<const TrialResult> results);
// Human-readable grid: one row per case, one column per map.
void write_success_table(std::ostream& out, std::span<const CellSummary> cells);

// success_matrix.csv, trials.csv, summary.txt and overlay/map_<id>.csv (all paths per
// map, tagged by case and trial).
void write_report(const std::filesystem::path& out_dir, const MatrixRun& run);

void write_trial_meta(const std::filesystem::path& path, const TrialMeta& meta);
TrialMeta read_trial_meta(const std::filesystem::path& path);

std::string trajectory_file_stem(int case_id, int map_id, std::size_t trial);

}  // namespace ppmc
