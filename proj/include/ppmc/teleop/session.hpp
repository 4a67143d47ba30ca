#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppmc/controller.hpp"
#include "ppmc/ppmc_trainer.hpp"

namespace ppmc::teleop {

inline constexpr int kProtocolVersion = 1;

enum class RunMode { kPaused, kRunning, kStep };
std::string_view to_string(RunMode mode);

class SessionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionOptions {
  int map_id = 1;
  // "oracle" or a policy file path.
  std::string controller = "oracle";
  std::uint64_t seed = 1;
  RoverParams rover;
  RewardWeights reward;
  double capture_x = 0.5;
  double capture_y = 0.5;

  // Reads {map, controller, seed}; throws SessionError on bad fields.
  static SessionOptions from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Commands as received, stamped with the session tick (control steps
// executed since creation, never reset) at which they took effect.
struct SessionLog {
  struct Entry {
    std::uint64_t tick = 0;
    nlohmann::json message;
  };
  SessionOptions options;
  std::vector<Entry> entries;
  std::uint64_t ticks = 0;

  nlohmann::json to_json() const;
  static SessionLog from_json(const nlohmann::json& j);
};

// Single-threaded session logic: applies client messages between control
// steps and produces the outgoing messages. No clocks or sockets, so the
// same command sequence always yields the same trajectory.
class SessionCore {
 public:
  // Throws SessionError for a bad map or an unloadable controller.
  SessionCore(std::string id, SessionOptions options);

  struct Output {
    std::vector<nlohmann::json> broadcast;  // for every subscriber
    std::vector<nlohmann::json> reply;      // for the sender only
  };

  Output handle(const nlohmann::json& message);
  bool wants_step() const;
  // One control step. Call only when wants_step().
  Output advance();

  nlohmann::json hello() const;
  nlohmann::json state_message() const;
  nlohmann::json heartbeat() const;

  const std::string& id() const { return id_; }
  const SessionOptions& options() const { return options_; }
  RunMode mode() const { return mode_; }
  double speed() const { return speed_; }
  bool has_goals() const { return has_goals_; }
  const RoverState& state() const { return env_->state(); }
  const GoalPair& goals() const { return env_->goals(); }
  const WaypointEnv& env() const { return *env_; }
  std::uint64_t ticks() const { return ticks_; }
  const SessionLog& log() const { return log_; }
  // Every state since creation, including the post-reset states.
  const std::vector<RoverState>& history() const { return history_; }

 private:
  nlohmann::json event(std::string kind) const;
  nlohmann::json error(std::string message) const;
  nlohmann::json ack(const std::string& type) const;
  void reset_env();

  std::string id_;
  SessionOptions options_;
  std::shared_ptr<const HeightField> field_;
  std::unique_ptr<Controller> controller_;
  std::unique_ptr<WaypointEnv> env_;
  std::mt19937_64 rng_;
  RunMode mode_ = RunMode::kPaused;
  std::uint64_t step_budget_ = 0;  // remaining steps in step mode
  double speed_ = 1.0;
  bool has_goals_ = false;
  std::uint64_t ticks_ = 0;
  SessionLog log_;
  std::vector<RoverState> history_;
};

// Re-simulates a session log and returns its state history.
std::vector<RoverState> replay_session(const SessionLog& log);

// Drives a SessionCore on its own thread, paced to wall clock times the
// speed multiplier (0 = as fast as possible). Commands are queued and
// applied between control steps; output fans out to subscribers.
class SessionRunner {
 public:
  using Sink = std::function<void(const std::string&)>;

  explicit SessionRunner(std::unique_ptr<SessionCore> core, double heartbeat_seconds = 1.0);
  ~SessionRunner();
  SessionRunner(const SessionRunner&) = delete;
  SessionRunner& operator=(const SessionRunner&) = delete;

  const std::string& id() const { return id_; }

  // `reply` receives errors and direct answers for this message only.
  void post(std::string raw_message, Sink reply);
  std::uint64_t subscribe(Sink sink);
  void unsubscribe(std::uint64_t token);
  std::size_t subscribers() const;

  nlohmann::json snapshot() const;
  nlohmann::json hello() const;
  SessionLog log() const;
  // Stops the worker and sends a final "closed" event.
  void close();

 private:
  void run();
  void publish(const std::vector<nlohmann::json>& messages);

  std::string id_;
  double heartbeat_seconds_;
  mutable std::mutex core_mutex_;
  std::unique_ptr<SessionCore> core_;

  std::mutex queue_mutex_;
  std::condition_variable wake_;
  std::deque<std::pair<std::string, Sink>> queue_;
  bool stopping_ = false;

  mutable std::mutex sink_mutex_;
  std::map<std::uint64_t, Sink> sinks_;
  std::uint64_t next_token_ = 1;

  std::thread worker_;
};

// Owns all live sessions of a service instance.
class SessionRegistry {
 public:
  explicit SessionRegistry(double heartbeat_seconds = 1.0) : heartbeat_seconds_(heartbeat_seconds) {}

  // Throws SessionError when the options are rejected.
  std::shared_ptr<SessionRunner> create(const SessionOptions& options);
  std::shared_ptr<SessionRunner> find(const std::string& id) const;
  bool remove(const std::string& id);
  std::vector<std::string> ids() const;
  void close_all();

 private:
  double heartbeat_seconds_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<SessionRunner>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace ppmc::teleop
