#include "ppmc/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

namespace ppmc {
namespace {

constexpr std::array<TestCase, 4> kCases{{
    {1, {12.0, 7.0}, {-12.0, 7.0}},
    {2, {-10.0, -10.0}, {10.0, 10.0}},
    {3, {7.0, -1.0}, {-7.0, 9.0}},
    {4, {0.0, 8.0}, {3.0, 10.0}},
}};

auto key_of(const TrialResult& r) { return std::make_tuple(r.case_id, r.map_id, r.trial); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

std::span<const TestCase> standard_cases() { return kCases; }

const TestCase& standard_case(int id) {
  if (id < 1 || id > static_cast<int>(kCases.size())) {
    throw std::invalid_argument("unknown test case " + std::to_string(id) + " (expected 1-4)");
  }
  return kCases[static_cast<std::size_t>(id - 1)];
}

EvalConfig EvalConfig::training_budget() {
  EvalConfig c;
  c.initial_limit = 100.0;
  c.limit_increment = 100.0;
  return c;
}

void EvalConfig::validate() const {
  trainer_config().validate();
  rover.validate();
}

TrainerConfig EvalConfig::trainer_config() const {
  TrainerConfig t;
  t.capture_x = capture_x;
  t.capture_y = capture_y;
  t.initial_limit = initial_limit;
  t.limit_increment = limit_increment;
  return t;
}

std::uint64_t trial_seed(std::uint64_t base_seed, int case_id, int map_id, std::size_t trial) {
  const std::uint64_t stream = (static_cast<std::uint64_t>(case_id) << 48) ^
                               (static_cast<std::uint64_t>(map_id) << 32) ^ trial;
  return mix_seed(base_seed, stream);
}

TrialRun run_trial(const Controller& controller, const TestCase& test_case,
                   std::shared_ptr<const HeightField> field, int map_id, std::size_t trial,
                   const EvalConfig& config) {
  return run_trial_with_seed(controller, test_case, std::move(field), map_id, trial, config,
                             trial_seed(config.base_seed, test_case.id, map_id, trial));
}

TrialRun run_trial_with_seed(const Controller& controller, const TestCase& test_case,
                             std::shared_ptr<const HeightField> field, int map_id, std::size_t trial,
                             const EvalConfig& config, std::uint64_t seed) {
  config.validate();
  WaypointEnvConfig env_config{.trainer = config.trainer_config(),
                               .rover = config.rover,
                               .reward = config.reward,
                               .encoding = controller.encoding(),
                               .limits = controller.limits(),
                               .record_trajectory = true};
  WaypointEnv env(std::move(field), env_config, seed);
  env.reset_with({test_case.intermediate, test_case.final_point});
  std::mt19937_64 rng(seed);
  const EpisodeRecord record = run_episode(env, controller, rng);

  TrialRun run;
  TrialResult& r = run.result;
  r.case_id = test_case.id;
  r.map_id = map_id;
  r.trial = trial;
  r.seed = seed;
  r.outcome = record.outcome;
  r.success = record.outcome == EpisodeOutcome::kSuccess;
  r.fail = record.fail;
  r.duration = record.duration;
  r.capture_times = record.capture_times;
  run.states = env.trajectory();
  for (const RoverState& s : run.states) {
    r.max_abs_roll = std::max(r.max_abs_roll, std::abs(s.roll));
    r.max_abs_pitch = std::max(r.max_abs_pitch, std::abs(s.pitch));
  }
  return run;
}

EvalMap load_eval_map(int id) {
  return EvalMap{id, std::make_shared<const HeightField>(terrain_preset(id))};
}

std::string trajectory_file_stem(int case_id, int map_id, std::size_t trial) {
  return std::to_string(case_id) + "_" + std::to_string(map_id) + "_" + std::to_string(trial);
}

MatrixRun run_matrix(const Controller& controller, std::span<const TestCase> cases,
                     std::span<const EvalMap> maps, std::size_t trials, const EvalConfig& config,
                     const std::optional<TrajectoryOutput>& output, std::span<const TrialKey> order) {
  config.validate();
  if (trials == 0) throw std::invalid_argument("trials per cell must be positive");
  std::map<int, const TestCase*> case_by_id;
  for (const TestCase& c : cases) case_by_id[c.id] = &c;
  std::map<int, std::shared_ptr<const HeightField>> map_by_id;
  for (const EvalMap& m : maps) {
    if (!m.field) throw std::invalid_argument("evaluation map without a height field");
    map_by_id[m.id] = m.field;
  }

  std::vector<TrialKey> jobs(order.begin(), order.end());
  if (jobs.empty()) {
    for (const TestCase& c : cases) {
      for (const EvalMap& m : maps) {
        for (std::size_t k = 0; k < trials; ++k) jobs.push_back({c.id, m.id, k});
      }
    }
  }
  for (const TrialKey& key : jobs) {
    if (!case_by_id.count(key.case_id) || !map_by_id.count(key.map_id) || key.trial >= trials) {
      throw std::invalid_argument("trial order names a case, map or trial outside the matrix");
    }
  }
  if (output) std::filesystem::create_directories(output->dir);

  struct Slot {
    TrialResult result;
    std::vector<Point2> path;
  };
  std::vector<Slot> slots(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      try {
        const TrialKey& key = jobs[j];
        TrialRun run = run_trial(controller, *case_by_id.at(key.case_id), map_by_id.at(key.map_id),
                                 key.map_id, key.trial, config);
        if (output) {
          const std::string stem = trajectory_file_stem(key.case_id, key.map_id, key.trial);
          std::ofstream csv(output->dir / (stem + ".csv"), std::ios::binary);
          if (!csv) throw std::runtime_error("cannot write trajectory " + stem);
          write_trajectory_csv(csv, run.states);
          TrialMeta meta = output->meta;
          meta.case_id = key.case_id;
          meta.map_id = key.map_id;
          meta.trial = key.trial;
          meta.seed = run.result.seed;
          meta.initial_limit = config.initial_limit;
          meta.limit_increment = config.limit_increment;
          meta.capture_x = config.capture_x;
          meta.capture_y = config.capture_y;
          write_trial_meta(output->dir / (stem + ".meta.json"), meta);
          run.result.trajectory = (output->dir.filename() / (stem + ".csv")).generic_string();
        }
        slots[j].path.reserve(run.states.size());
        for (const RoverState& s : run.states) slots[j].path.push_back({s.position.x, s.position.y});
        slots[j].result = std::move(run.result);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = jobs.size();
        return;
      }
    }
  };

  std::size_t threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, jobs.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::sort(slots.begin(), slots.end(),
            [](const Slot& a, const Slot& b) { return key_of(a.result) < key_of(b.result); });
  MatrixRun run;
  for (Slot& s : slots) {
    run.results.push_back(std::move(s.result));
    run.paths.push_back(std::move(s.path));
  }
  return run;
}

double CellSummary::success_percent() const {
  return trials == 0 ? 0.0 : 100.0 * static_cast<double>(successes) / static_cast<double>(trials);
}

std::vector<CellSummary> summarize(std::span<const TrialResult> results) {
  if (results.empty()) throw std::invalid_argument("no trial results to summarize");
  std::map<std::pair<int, int>, CellSummary> cells;
  for (const TrialResult& r : results) {
    CellSummary& c = cells[{r.case_id, r.map_id}];
    c.case_id = r.case_id;
    c.map_id = r.map_id;
    ++c.trials;
    if (r.success) ++c.successes;
  }
  std::vector<CellSummary> out;
  for (const auto& [key, cell] : cells) out.push_back(cell);
  return out;
}

void write_success_matrix_csv(std::ostream& out, std::span<const CellSummary> cells) {
  out << "case,map,successes,trials,success_percent\n";
  char buf[96];
  for (const CellSummary& c : cells) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%zu,%zu,%.1f\n", c.case_id, c.map_id, c.successes, c.trials,
                  c.success_percent());
    out << buf;
  }
}

void write_trials_csv(std::ostream& out, std::span<const TrialResult> results) {
  out << "case,map,trial,seed,success,outcome,fail_reason,duration,captures,capture_times,"
         "max_abs_roll,max_abs_pitch,trajectory\n";
  char buf[128];
  for (const TrialResult& r : results) {
    std::string captures;
    for (double t : r.capture_times) {
      std::snprintf(buf, sizeof(buf), "%s%.1f", captures.empty() ? "" : " ", t);
      captures += buf;
    }
    std::snprintf(buf, sizeof(buf), "%.1f", r.duration);
    out << r.case_id << ',' << r.map_id << ',' << r.trial << ',' << r.seed << ',' << (r.success ? 1 : 0)
        << ',' << to_string(r.outcome) << ',' << to_string(r.fail) << ',' << buf << ','
        << r.capture_times.size() << ',' << captures << ',';
    std::snprintf(buf, sizeof(buf), "%.4f,%.4f", r.max_abs_roll, r.max_abs_pitch);
    out << buf << ',' << r.trajectory << '\n';
  }
}

void write_success_table(std::ostream& out, std::span<const CellSummary> cells) {
  std::map<int, std::map<int, const CellSummary*>> grid;
  std::map<int, bool> map_ids;
  for (const CellSummary& c : cells) {
    grid[c.case_id][c.map_id] = &c;
    map_ids[c.map_id] = true;
  }
  char buf[64];
  out << "case";
  for (const auto& [m, _] : map_ids) {
    std::snprintf(buf, sizeof(buf), "  map %-6d", m);
    out << buf;
  }
  out << '\n';
  for (const auto& [case_id, row] : grid) {
    std::snprintf(buf, sizeof(buf), "%-4d", case_id);
    out << buf;
    for (const auto& [m, _] : map_ids) {
      auto it = row.find(m);
      if (it == row.end()) {
        std::snprintf(buf, sizeof(buf), "  %-10s", "-");
      } else {
        std::snprintf(buf, sizeof(buf), "  %5.1f%%    ", it->second->success_percent());
      }
      out << buf;
    }
    out << '\n';
  }
}

void write_report(const std::filesystem::path& out_dir, const MatrixRun& run) {
  const std::vector<CellSummary> cells = summarize(run.results);
  std::filesystem::create_directories(out_dir / "overlay");
  {
    std::ofstream out(out_dir / "success_matrix.csv");
    write_success_matrix_csv(out, cells);
    if (!out) throw std::runtime_error("cannot write success_matrix.csv");
  }
  {
    std::ofstream out(out_dir / "trials.csv");
    write_trials_csv(out, run.results);
    if (!out) throw std::runtime_error("cannot write trials.csv");
  }
  {
    std::ofstream out(out_dir / "summary.txt");
    write_success_table(out, cells);
    if (!out) throw std::runtime_error("cannot write summary.txt");
  }
  std::map<int, std::string> overlays;
  char buf[96];
  for (std::size_t i = 0; i < run.results.size(); ++i) {
    const TrialResult& r = run.results[i];
    std::string& text = overlays[r.map_id];
    if (text.empty()) text = "case,trial,x,y\n";
    if (i >= run.paths.size()) continue;
    for (const Point2& p : run.paths[i]) {
      std::snprintf(buf, sizeof(buf), "%d,%zu,%.4f,%.4f\n", r.case_id, r.trial, p.x, p.y);
      text += buf;
    }
  }
  for (const auto& [map_id, text] : overlays) {
    write_file(out_dir / "overlay" / ("map_" + std::to_string(map_id) + ".csv"), text);
  }
}

void write_trial_meta(const std::filesystem::path& path, const TrialMeta& m) {
  nlohmann::json j{{"version", 1},
                   {"case", m.case_id},
                   {"map", m.map_id},
                   {"trial", m.trial},
                   {"seed", m.seed},
                   {"controller", m.controller},
                   {"policy_path", m.policy_path},
                   {"policy_checksum", m.policy_checksum},
                   {"command_noise", m.command_noise},
                   {"initial_limit", m.initial_limit},
                   {"limit_increment", m.limit_increment},
                   {"capture_x", m.capture_x},
                   {"capture_y", m.capture_y}};
  write_file(path, j.dump(2) + "\n");
}

TrialMeta read_trial_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("trajectory metadata not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported metadata version");
    TrialMeta m;
    m.case_id = j.at("case").get<int>();
    m.map_id = j.at("map").get<int>();
    m.trial = j.at("trial").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.controller = j.at("controller").get<std::string>();
    m.policy_path = j.value("policy_path", "");
    m.policy_checksum = j.value("policy_checksum", std::uint64_t{0});
    m.command_noise = j.value("command_noise", 0.0);
    m.initial_limit = j.at("initial_limit").get<double>();
    m.limit_increment = j.at("limit_increment").get<double>();
    m.capture_x = j.at("capture_x").get<double>();
    m.capture_y = j.at("capture_y").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed trajectory metadata " + path.string() + ": " + e.what());
  }
}

}  // namespace ppmc
