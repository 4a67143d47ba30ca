#include "ppmc/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ppmc/config.hpp"
#include "ppmc/eval_harness.hpp"
#include "ppmc/oracle_controller.hpp"
#include "ppmc/teleop/server.hpp"

namespace ppmc {
namespace {

// Failure with a chosen exit code; caught at the top of run_cli.
struct CliError : std::runtime_error {
  CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

std::vector<int> parse_id_list(const std::string& text, const std::string& what, int lo, int hi) {
  std::vector<int> ids;
  if (text == "all") {
    for (int i = lo; i <= hi; ++i) ids.push_back(i);
    return ids;
  }
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int id = std::stoi(item, &used);
      if (used != item.size() || id < lo || id > hi) throw std::invalid_argument(item);
      ids.push_back(id);
    } catch (const std::exception&) {
      throw CliError(kExitUsage, "bad " + what + " '" + item + "' (expected " + std::to_string(lo) + "-" +
                                     std::to_string(hi) + " or all)");
    }
  }
  if (ids.empty()) throw CliError(kExitUsage, "empty " + what + " list");
  return ids;
}

RunConfig base_config(const std::string& config_path) {
  RunConfig config;
  try {
    if (!config_path.empty()) {
      if (!std::filesystem::exists(config_path)) {
        throw CliError(kExitMissingFile, "config file not found: " + config_path);
      }
      config = load_run_config(config_path);
    }
    apply_seed_override(config);
  } catch (const ConfigError& e) {
    throw CliError(kExitBadInput, e.what());
  }
  return config;
}

std::shared_ptr<const PolicyParams> read_policy(const std::filesystem::path& path) {
  try {
    return std::make_shared<const PolicyParams>(load_policy(path));
  } catch (const PolicyFileError& e) {
    throw CliError(e.kind() == PolicyFileError::Kind::kNotFound ? kExitMissingFile : kExitBadInput, e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct TrainArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> total_steps;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<int> map;
};

int cmd_train(const TrainArgs& args, std::ostream& out) {
  RunConfig config = base_config(args.config);
  if (args.seed) config.apply_seed(*args.seed);
  if (args.total_steps) config.learner.total_steps = *args.total_steps;
  if (args.workers) config.learner.workers = *args.workers;
  if (args.map) {
    config.map = *args.map;
    config.terrain = *args.map == 0 ? flat_terrain() : terrain_preset(*args.map);
  }
  if (!args.out.empty()) config.output_dir = args.out;
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw CliError(kExitBadInput, std::string("invalid config: ") + e.what());
  }

  std::filesystem::create_directories(config.output_dir);
  save_run_config(config, config.output_dir / "config.json");
  out << "training " << config.learner.total_steps << " steps with " << config.learner.workers
      << " workers, seed " << config.seed << ", run directory " << config.output_dir.string() << '\n';
  const auto start = std::chrono::steady_clock::now();
  const TrainingOutcome outcome = run_training(config.training_setup());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::size_t successes = 0;
  for (const EpisodeRecord& r : outcome.episodes) successes += r.outcome == EpisodeOutcome::kSuccess;
  out << "done in " << seconds << " s: " << outcome.result.steps << " steps, " << outcome.episodes.size()
      << " episodes, " << successes << " successful\n";
  out << "policy " << (config.output_dir / "policy.bin").string() << '\n';
  return kExitOk;
}

struct EvalArgs {
  std::string config;
  std::string policy;
  bool oracle = false;
  std::string maps;
  std::string cases;
  std::optional<std::size_t> trials;
  std::string out = "eval_out";
  std::string budget;
  bool stochastic = false;
  std::optional<double> noise;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
};

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  if (args.policy.empty() == !args.oracle) throw CliError(kExitUsage, "give exactly one of --policy FILE or --oracle");
  RunConfig config = base_config(args.config);
  if (args.seed) config.apply_seed(*args.seed);
  EvalPlan& plan = config.eval;
  if (!args.maps.empty()) plan.maps = parse_id_list(args.maps, "map", 1, 3);
  if (!args.cases.empty()) plan.cases = parse_id_list(args.cases, "case", 1, 4);
  if (args.trials) plan.trials = *args.trials;
  if (plan.trials == 0) throw CliError(kExitUsage, "--trials must be positive");
  if (args.stochastic) plan.stochastic = true;
  if (args.noise) plan.command_noise = *args.noise;
  if (args.threads) plan.config.threads = *args.threads;
  if (args.budget == "training") {
    const EvalConfig budget = EvalConfig::training_budget();
    plan.config.initial_limit = budget.initial_limit;
    plan.config.limit_increment = budget.limit_increment;
  } else if (!args.budget.empty() && args.budget != "extended") {
    throw CliError(kExitUsage, "--budget must be extended or training");
  }

  std::unique_ptr<Controller> controller;
  TrajectoryOutput traj;
  traj.dir = std::filesystem::path(args.out) / "traj";
  std::uint64_t checksum_before = 0;
  if (args.oracle) {
    if (plan.command_noise < 0.0) throw CliError(kExitUsage, "--noise must be >= 0");
    controller = std::make_unique<OracleController>(PursuitConfig{}, plan.command_noise);
    traj.meta.controller = "oracle";
    traj.meta.command_noise = plan.command_noise;
  } else {
    auto params = read_policy(args.policy);
    checksum_before = file_checksum(args.policy);
    controller = std::make_unique<PolicyController>(params, !plan.stochastic);
    traj.meta.controller = controller->name();
    traj.meta.policy_path = std::filesystem::absolute(args.policy).string();
    traj.meta.policy_checksum = checksum_before;
  }

  std::vector<TestCase> cases;
  for (int c : plan.cases) cases.push_back(standard_case(c));
  std::vector<EvalMap> maps;
  for (int m : plan.maps) maps.push_back(load_eval_map(m));

  std::filesystem::create_directories(args.out);
  config.output_dir = args.out;
  save_run_config(config, std::filesystem::path(args.out) / "config.json");
  out << "evaluating " << controller->name() << ": " << cases.size() << " cases x " << maps.size() << " maps x "
      << plan.trials << " trials, budget " << plan.config.initial_limit << " s + " << plan.config.limit_increment
      << " s per capture\n";
  const MatrixRun run = run_matrix(*controller, cases, maps, plan.trials, plan.config, traj);
  write_report(args.out, run);
  write_success_table(out, summarize(run.results));
  if (!args.oracle) {
    const std::uint64_t checksum_after = file_checksum(args.policy);
    out << "policy checksum " << hex64(checksum_before)
        << (checksum_after == checksum_before ? " (unchanged)" : " CHANGED to " + hex64(checksum_after)) << '\n';
    if (checksum_after != checksum_before) return kExitFailure;
  }
  out << "report written to " << args.out << '\n';
  return kExitOk;
}

struct ReplayArgs {
  std::string traj;
  std::string policy;
  std::string config;
};

int cmd_replay(const ReplayArgs& args, std::ostream& out) {
  const std::filesystem::path csv_path = args.traj;
  if (!std::filesystem::exists(csv_path)) throw CliError(kExitMissingFile, "trajectory not found: " + args.traj);
  std::filesystem::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  TrialMeta meta;
  try {
    meta = read_trial_meta(meta_path);
  } catch (const std::exception& e) {
    throw CliError(std::filesystem::exists(meta_path) ? kExitBadInput : kExitMissingFile, e.what());
  }

  RunConfig config = base_config(args.config);
  EvalConfig eval = config.eval.config;
  eval.initial_limit = meta.initial_limit;
  eval.limit_increment = meta.limit_increment;
  eval.capture_x = meta.capture_x;
  eval.capture_y = meta.capture_y;

  std::unique_ptr<Controller> controller;
  if (meta.controller == "oracle") {
    controller = std::make_unique<OracleController>(PursuitConfig{}, meta.command_noise);
  } else if (meta.controller == "policy-greedy" || meta.controller == "policy-stochastic") {
    const std::string path = args.policy.empty() ? meta.policy_path : args.policy;
    auto params = read_policy(path);
    if (meta.policy_checksum != 0 && file_checksum(path) != meta.policy_checksum) {
      throw CliError(kExitBadInput, "policy file " + path + " differs from the one that produced the trajectory");
    }
    controller = std::make_unique<PolicyController>(params, meta.controller == "policy-greedy");
  } else {
    throw CliError(kExitBadInput, "unknown controller in metadata: " + meta.controller);
  }

  const TrialRun run = run_trial_with_seed(*controller, standard_case(meta.case_id),
                                           load_eval_map(meta.map_id).field, meta.map_id, meta.trial, eval,
                                           meta.seed);

  std::ostringstream rendered;
  write_trajectory_csv(rendered, run.states);
  std::ifstream in(csv_path, std::ios::binary);
  const std::string stored((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string fresh = rendered.str();
  if (stored == fresh) {
    out << "MATCH " << run.states.size() << " states, outcome " << to_string(run.result.outcome) << '\n';
    return kExitOk;
  }
  std::size_t line = 1;
  const std::size_t n = std::min(stored.size(), fresh.size());
  for (std::size_t i = 0; i < n && stored[i] == fresh[i]; ++i) line += stored[i] == '\n';
  out << "MISMATCH first difference on line " << line << '\n';
  return kExitFailure;
}

struct ServeArgs {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  std::size_t threads = 1;
  double heartbeat = 1.0;
};

int cmd_serve(const ServeArgs& args, std::ostream& out) {
  teleop::ServerOptions options;
  options.address = args.address;
  options.port = args.port;
  options.threads = args.threads;
  options.heartbeat_seconds = args.heartbeat;
  teleop::TeleopServer server(options);
  server.start();
  out << "teleop service listening on " << args.address << ':' << server.port() << std::endl;
  server.wait_for_signal();
  out << "stopped\n";
  return kExitOk;
}

int cmd_heightmap(int map, double spacing, const std::string& path, std::ostream& out) {
  if (!(spacing > 0.0)) throw CliError(kExitUsage, "--spacing must be positive");
  const HeightField field(terrain_preset(map));
  if (path.empty() || path == "-") {
    dump_heightmap_csv(field, spacing, out);
    return kExitOk;
  }
  std::ofstream file(path);
  if (!file) throw CliError(kExitFailure, "cannot write " + path);
  dump_heightmap_csv(field, spacing, file);
  out << "wrote " << path << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rough-terrain rover navigation: train, evaluate, replay and teleoperate", "ppmc"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a policy with the waypoint curriculum");
  train_cmd->add_option("--config", train.config, "run config JSON");
  train_cmd->add_option("--out", train.out, "run directory (default: config output_dir)");
  train_cmd->add_option("--total-steps", train.total_steps, "environment step budget");
  train_cmd->add_option("--seed", train.seed, "seed (overrides config and PPMC_SEED)");
  train_cmd->add_option("--workers", train.workers, "rollout workers");
  train_cmd->add_option("--map", train.map, "training terrain: 0 flat, 1-3 presets")->check(CLI::Range(0, 3));

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "run the test-case matrix");
  eval_cmd->add_option("--config", eval.config, "run config JSON");
  eval_cmd->add_option("--policy", eval.policy, "policy file");
  eval_cmd->add_flag("--oracle", eval.oracle, "use the pure-pursuit controller");
  eval_cmd->add_option("--maps", eval.maps, "comma-separated map ids or all");
  eval_cmd->add_option("--cases", eval.cases, "comma-separated case ids or all");
  eval_cmd->add_option("--trials", eval.trials, "trials per cell");
  eval_cmd->add_option("--out", eval.out, "output directory");
  eval_cmd->add_option("--budget", eval.budget, "extended (300 s, default) or training (100 s + 100 s)");
  eval_cmd->add_flag("--stochastic", eval.stochastic, "sample policy actions instead of the mean");
  eval_cmd->add_option("--noise", eval.noise, "oracle command noise std");
  eval_cmd->add_option("--threads", eval.threads, "worker threads, 0 = all cores");
  eval_cmd->add_option("--seed", eval.seed, "seed (overrides config and PPMC_SEED)");

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay", "re-simulate a trajectory and compare it byte for byte");
  replay_cmd->add_option("--traj", replay.traj, "trajectory CSV written by eval")->required();
  replay_cmd->add_option("--policy", replay.policy, "policy file (default: path in the metadata)");
  replay_cmd->add_option("--config", replay.config, "config used for the evaluation");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "run the teleoperation service");
  serve_cmd->add_option("--address", serve.address, "listen address");
  serve_cmd->add_option("--port", serve.port, "listen port, 0 = any free port");
  serve_cmd->add_option("--threads", serve.threads, "I/O threads");
  serve_cmd->add_option("--heartbeat", serve.heartbeat, "seconds between heartbeats while idle");

  int map = 1;
  double spacing = 0.25;
  std::string heightmap_out;
  auto* heightmap_cmd = app.add_subcommand("heightmap", "export a terrain preset as x,y,h CSV");
  heightmap_cmd->add_option("--map", map, "map id")->check(CLI::Range(1, 3));
  heightmap_cmd->add_option("--spacing", spacing, "grid spacing, m");
  heightmap_cmd->add_option("--out", heightmap_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*replay_cmd) return cmd_replay(replay, out);
    if (*serve_cmd) return cmd_serve(serve, out);
    if (*heightmap_cmd) return cmd_heightmap(map, spacing, heightmap_out, out);
  } catch (const CliError& e) {
    err << "error: " << e.what() << '\n';
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ppmc
