#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppmc/eval_harness.hpp"
#include "ppmc/ppmc_trainer.hpp"

namespace ppmc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EvalPlan {
  EvalConfig config;
  std::vector<int> maps{1, 2, 3};
  std::vector<int> cases{1, 2, 3, 4};
  std::size_t trials = 30;
  bool stochastic = false;     // sample policy actions instead of the mean
  double command_noise = 0.0;  // oracle only: std of additive command noise
};

// Everything needed to reproduce a run. Serialized as JSON; every section
// and key is optional and missing values take the defaults here.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "runs/default";
  int map = 1;  // terrain preset the overrides apply to, 0 = flat
  TerrainSpec terrain = terrain_preset(1);
  RoverParams rover;
  RewardWeights reward;
  YawEncoding encoding = YawEncoding::kNormalized;
  NormalizationLimits limits;
  bool split_trunk = false;
  TrainerConfig trainer;
  LearnerConfig learner;
  std::size_t probe_episodes = 8;
  EvalPlan eval;

  // Copies the root seed into the learner and evaluation seeds.
  void apply_seed(std::uint64_t value);
  void validate() const;
  TrainingSetup training_setup() const;
};

nlohmann::json to_json(const RunConfig& config);
// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

// PPMC_SEED, when set, replaces the seed. Throws ConfigError when it is not
// an unsigned integer.
void apply_seed_override(RunConfig& config);

}  // namespace ppmc
