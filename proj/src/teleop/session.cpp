#include "ppmc/teleop/session.hpp"

#include <chrono>
#include <cmath>

#include "ppmc/oracle_controller.hpp"

namespace ppmc::teleop {
namespace {

using nlohmann::json;

// Sessions run until the user stops them, so the episode limit only has to
// outlast any realistic session.
constexpr double kSessionLimit = 1e9;

json point_json(Point2 p) { return json::array({p.x, p.y}); }

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

std::vector<Point2> parse_points(const json& message) {
  auto it = message.find("points");
  if (it == message.end() || !it->is_array()) throw SessionError("set_waypoints needs a points array");
  if (it->empty()) throw SessionError("set_waypoints needs at least one point");
  std::vector<Point2> points;
  for (const json& p : *it) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw SessionError("each waypoint must be an [x, y] pair of numbers");
    }
    const Point2 q{p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(q.x) || !std::isfinite(q.y)) throw SessionError("waypoints must be finite");
    points.push_back(q);
  }
  return points;
}

}  // namespace

std::string_view to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kPaused: return "paused";
    case RunMode::kRunning: return "running";
    case RunMode::kStep: return "step";
  }
  return "unknown";
}

SessionOptions SessionOptions::from_json(const json& j) {
  if (!j.is_object()) throw SessionError("session request must be a JSON object");
  SessionOptions o;
  try {
    o.map_id = j.value("map", o.map_id);
    o.controller = j.value("controller", o.controller);
    o.seed = j.value("seed", o.seed);
  } catch (const json::exception&) {
    throw SessionError("session request fields: map (int), controller (string), seed (unsigned int)");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "map" && it.key() != "controller" && it.key() != "seed") {
      throw SessionError("unknown session field " + it.key());
    }
  }
  return o;
}

json SessionOptions::to_json() const {
  return json{{"map", map_id}, {"controller", controller}, {"seed", seed}};
}

json SessionLog::to_json() const {
  json entries_json = json::array();
  for (const Entry& e : entries) entries_json.push_back({{"tick", e.tick}, {"message", e.message}});
  return json{{"v", kProtocolVersion}, {"options", options.to_json()}, {"entries", entries_json}, {"ticks", ticks}};
}

SessionLog SessionLog::from_json(const json& j) {
  try {
    SessionLog log;
    log.options = SessionOptions::from_json(j.at("options"));
    for (const json& e : j.at("entries")) log.entries.push_back({e.at("tick").get<std::uint64_t>(), e.at("message")});
    log.ticks = j.at("ticks").get<std::uint64_t>();
    return log;
  } catch (const json::exception& e) {
    throw SessionError(std::string("malformed session log: ") + e.what());
  }
}

SessionCore::SessionCore(std::string id, SessionOptions options)
    : id_(std::move(id)), options_(std::move(options)), rng_(options_.seed) {
  try {
    field_ = std::make_shared<const HeightField>(terrain_preset(options_.map_id));
  } catch (const std::exception& e) {
    throw SessionError(std::string("bad map: ") + e.what());
  }
  if (options_.controller == "oracle") {
    controller_ = std::make_unique<OracleController>();
  } else {
    try {
      auto params = std::make_shared<const PolicyParams>(load_policy(options_.controller));
      controller_ = std::make_unique<PolicyController>(params, true);
    } catch (const std::exception& e) {
      throw SessionError(std::string("bad controller: ") + e.what());
    }
  }
  WaypointEnvConfig config;
  config.trainer.capture_x = options_.capture_x;
  config.trainer.capture_y = options_.capture_y;
  config.trainer.initial_limit = kSessionLimit;
  config.rover = options_.rover;
  config.reward = options_.reward;
  config.encoding = controller_->encoding();
  config.limits = controller_->limits();
  try {
    env_ = std::make_unique<WaypointEnv>(field_, config, options_.seed);
  } catch (const std::exception& e) {
    throw SessionError(std::string("bad session parameters: ") + e.what());
  }
  log_.options = options_;
  reset_env();
}

void SessionCore::reset_env() {
  // Placeholder goal at the origin; no step runs until real waypoints arrive.
  env_->reset_with({Point2{0.0, 0.0}});
  has_goals_ = false;
  mode_ = RunMode::kPaused;
  step_budget_ = 0;
  history_.push_back(env_->state());
}

json SessionCore::event(std::string kind) const {
  return json{{"v", kProtocolVersion}, {"type", "event"},  {"session", id_},
              {"kind", std::move(kind)}, {"tick", ticks_}, {"t", env_->state().elapsed_time},
              {"mode", to_string(mode_)}};
}

json SessionCore::error(std::string message) const {
  return json{{"v", kProtocolVersion}, {"type", "error"}, {"session", id_}, {"message", std::move(message)}};
}

json SessionCore::ack(const std::string& type) const {
  json e = event("ack");
  e["command"] = type;
  e["speed"] = speed_;
  if (has_goals_) {
    e["goals"] = {{"current", point_json(env_->goals().current)}, {"next", point_json(env_->goals().next)}};
  }
  return e;
}

json SessionCore::hello() const {
  const RoverParams& r = options_.rover;
  return json{{"v", kProtocolVersion},
              {"type", "hello"},
              {"session", id_},
              {"map", options_.map_id},
              {"controller", controller_->name()},
              {"seed", options_.seed},
              {"mode", to_string(mode_)},
              {"speed", speed_},
              {"extent", field_->spec().extent},
              {"control_dt", r.control_dt},
              {"capture", json::array({options_.capture_x, options_.capture_y})}};
}

json SessionCore::state_message() const {
  const RoverState& s = env_->state();
  const RewardTerms& terms = env_->last_info().terms;
  json goals = nullptr;
  if (has_goals_) {
    goals = {{"current", point_json(env_->goals().current)},
             {"next", point_json(env_->goals().next)},
             {"reached_final", env_->goals().reached_final},
             {"captured", env_->episode().captured()},
             {"total", env_->episode().waypoints.size()}};
  }
  return json{{"v", kProtocolVersion},
              {"type", "state"},
              {"session", id_},
              {"tick", ticks_},
              {"step", s.control_steps},
              {"t", s.elapsed_time},
              {"mode", to_string(mode_)},
              {"pose",
               {{"x", s.position.x},
                {"y", s.position.y},
                {"z", s.position.z},
                {"roll", s.roll},
                {"pitch", s.pitch},
                {"yaw", s.yaw}}},
              {"velocity_world", vec_json(s.velocity_world)},
              {"velocity_body", vec_json(s.velocity_body)},
              {"angular_velocity", vec_json(s.angular_velocity)},
              {"wheel_speeds", s.wheel_speeds},
              {"wheel_torques", s.wheel_torques},
              {"goals", goals},
              {"reward",
               {{"V_G", terms.velocity_to_goal},
                {"A", terms.alive},
                {"Rv", terms.reverse},
                {"T", terms.torque},
                {"Tr", terms.turning},
                {"total", compute_reward(terms, options_.reward)}}},
              {"fail", to_string(s.fail)}};
}

json SessionCore::heartbeat() const { return event("heartbeat"); }

SessionCore::Output SessionCore::handle(const json& message) {
  Output out;
  if (!message.is_object()) {
    out.reply.push_back(error("message must be a JSON object"));
    return out;
  }
  log_.entries.push_back({ticks_, message});
  if (message.contains("v") && message["v"] != kProtocolVersion) {
    out.reply.push_back(error("unsupported protocol version; this server speaks v" +
                              std::to_string(kProtocolVersion)));
    return out;
  }
  auto type_it = message.find("type");
  if (type_it == message.end() || !type_it->is_string()) {
    out.reply.push_back(error("message needs a string type"));
    return out;
  }
  const std::string type = type_it->get<std::string>();
  try {
    if (type == "hello") {
      out.reply.push_back(hello());
      out.reply.push_back(state_message());
    } else if (type == "start" || type == "resume") {
      if (state().failed()) {
        throw SessionError("rover failed (" + std::string(to_string(state().fail)) + "); send reset");
      }
      if (!has_goals_) throw SessionError("no waypoints; send set_waypoints first");
      if (env_->done()) throw SessionError("all waypoints captured; send set_waypoints");
      std::uint64_t steps = 0;
      if (message.contains("steps")) {
        const json& s = message["steps"];
        if (!s.is_number_unsigned() || s.get<std::uint64_t>() == 0) {
          throw SessionError("steps must be a positive integer");
        }
        steps = s.get<std::uint64_t>();
      }
      mode_ = steps > 0 ? RunMode::kStep : RunMode::kRunning;
      step_budget_ = steps;
      out.broadcast.push_back(ack(type));
    } else if (type == "pause") {
      mode_ = RunMode::kPaused;
      step_budget_ = 0;
      out.broadcast.push_back(ack(type));
    } else if (type == "set_speed") {
      auto it = message.find("multiplier");
      if (it == message.end() || !it->is_number()) throw SessionError("set_speed needs a numeric multiplier");
      const double m = it->get<double>();
      if (!std::isfinite(m) || m < 0.0) throw SessionError("multiplier must be finite and >= 0");
      speed_ = m;
      out.broadcast.push_back(ack(type));
    } else if (type == "set_waypoints") {
      env_->set_waypoints(parse_points(message));
      has_goals_ = true;
      out.broadcast.push_back(ack(type));
    } else if (type == "reset") {
      reset_env();
      out.broadcast.push_back(ack(type));
      out.broadcast.push_back(state_message());
    } else {
      throw SessionError("unknown message type " + type);
    }
  } catch (const SessionError& e) {
    out.reply.push_back(error(e.what()));
  } catch (const std::invalid_argument& e) {
    out.reply.push_back(error(e.what()));
  }
  return out;
}

bool SessionCore::wants_step() const {
  return mode_ != RunMode::kPaused && has_goals_ && !env_->done();
}

SessionCore::Output SessionCore::advance() {
  if (!wants_step()) throw std::logic_error("session is not running");
  Output out;
  const ActionCommand cmd = controller_->act(env_->state(), env_->goals(), env_->observation(), rng_);
  const std::size_t captured_before = env_->episode().captured();
  env_->step(cmd);
  ++ticks_;
  log_.ticks = ticks_;
  history_.push_back(env_->state());

  const EnvStepInfo& info = env_->last_info();
  std::vector<json> events;
  if (info.capture != CaptureEvent::kNone) {
    json e = event("capture");
    e["index"] = captured_before;
    e["waypoint"] = point_json(env_->episode().waypoints[captured_before]);
    e["final"] = info.capture == CaptureEvent::kFinal;
    events.push_back(std::move(e));
  }
  if (info.outcome == EpisodeOutcome::kSuccess) {
    mode_ = RunMode::kPaused;
    events.push_back(event("complete"));
  } else if (info.outcome == EpisodeOutcome::kFailure) {
    mode_ = RunMode::kPaused;
    json e = event("fail");
    e["reason"] = to_string(state().fail);
    events.push_back(std::move(e));
  } else if (mode_ == RunMode::kStep && --step_budget_ == 0) {
    mode_ = RunMode::kPaused;
    events.push_back(event("paused"));
  }
  out.broadcast.push_back(state_message());
  for (json& e : events) out.broadcast.push_back(std::move(e));
  return out;
}

std::vector<RoverState> replay_session(const SessionLog& log) {
  SessionCore core("replay", log.options);
  auto advance_to = [&](std::uint64_t tick) {
    while (core.ticks() < tick) {
      if (!core.wants_step()) throw SessionError("session log is inconsistent with the simulation");
      core.advance();
    }
  };
  for (const SessionLog::Entry& e : log.entries) {
    advance_to(e.tick);
    core.handle(e.message);
  }
  advance_to(log.ticks);
  return core.history();
}

SessionRunner::SessionRunner(std::unique_ptr<SessionCore> core, double heartbeat_seconds)
    : id_(core->id()), heartbeat_seconds_(heartbeat_seconds), core_(std::move(core)) {
  worker_ = std::thread([this] { run(); });
}

SessionRunner::~SessionRunner() { close(); }

void SessionRunner::post(std::string raw_message, Sink reply) {
  {
    std::lock_guard lock(queue_mutex_);
    if (stopping_) return;
    queue_.emplace_back(std::move(raw_message), std::move(reply));
  }
  wake_.notify_one();
}

std::uint64_t SessionRunner::subscribe(Sink sink) {
  std::lock_guard lock(sink_mutex_);
  const std::uint64_t token = next_token_++;
  sinks_[token] = std::move(sink);
  return token;
}

void SessionRunner::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(sink_mutex_);
  sinks_.erase(token);
}

std::size_t SessionRunner::subscribers() const {
  std::lock_guard lock(sink_mutex_);
  return sinks_.size();
}

json SessionRunner::snapshot() const {
  std::lock_guard lock(core_mutex_);
  json s = core_->state_message();
  s["clients"] = subscribers();
  return s;
}

json SessionRunner::hello() const {
  std::lock_guard lock(core_mutex_);
  return core_->hello();
}

SessionLog SessionRunner::log() const {
  std::lock_guard lock(core_mutex_);
  return core_->log();
}

void SessionRunner::close() {
  {
    std::lock_guard lock(queue_mutex_);
    if (stopping_) return;
    stopping_ = true;
  }
  wake_.notify_all();
  if (worker_.joinable()) worker_.join();
  json closed{{"v", kProtocolVersion}, {"type", "event"}, {"session", id_}, {"kind", "closed"}};
  publish({closed});
}

void SessionRunner::publish(const std::vector<json>& messages) {
  if (messages.empty()) return;
  std::vector<std::string> encoded;
  encoded.reserve(messages.size());
  for (const json& m : messages) encoded.push_back(m.dump());
  std::lock_guard lock(sink_mutex_);
  for (const auto& [token, sink] : sinks_) {
    for (const std::string& text : encoded) sink(text);
  }
}

void SessionRunner::run() {
  using Clock = std::chrono::steady_clock;
  const auto heartbeat = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(heartbeat_seconds_));
  Clock::time_point next_tick = Clock::now();
  Clock::time_point last_output = Clock::now();

  for (;;) {
    std::deque<std::pair<std::string, Sink>> pending;
    {
      std::unique_lock lock(queue_mutex_);
      if (stopping_) return;
      pending.swap(queue_);
    }
    for (auto& [raw, reply] : pending) {
      SessionCore::Output out;
      json message;
      try {
        message = json::parse(raw);
      } catch (const json::parse_error&) {
        if (reply) {
          reply(json{{"v", kProtocolVersion}, {"type", "error"}, {"session", id_},
                     {"message", "message is not valid JSON"}}
                    .dump());
        }
        continue;
      }
      {
        std::lock_guard lock(core_mutex_);
        out = core_->handle(message);
      }
      if (reply) {
        for (const json& m : out.reply) reply(m.dump());
      }
      publish(out.broadcast);
      last_output = Clock::now();
      next_tick = Clock::now();
    }

    bool stepping = false;
    double period = 0.0;
    {
      std::lock_guard lock(core_mutex_);
      stepping = core_->wants_step();
      if (stepping && core_->speed() > 0.0) period = core_->options().rover.control_dt / core_->speed();
    }

    if (stepping) {
      if (period > 0.0) {
        const auto now = Clock::now();
        if (now < next_tick) {
          std::unique_lock lock(queue_mutex_);
          wake_.wait_until(lock, next_tick, [&] { return stopping_ || !queue_.empty(); });
          if (stopping_) return;
          if (!queue_.empty()) continue;
        }
        next_tick += std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(period));
        // After a stall, resume pacing from now rather than bursting to catch up.
        if (next_tick < Clock::now()) next_tick = Clock::now();
      }
      SessionCore::Output out;
      {
        std::lock_guard lock(core_mutex_);
        out = core_->advance();
      }
      publish(out.broadcast);
      last_output = Clock::now();
    } else {
      std::unique_lock lock(queue_mutex_);
      const bool woke = wake_.wait_until(lock, last_output + heartbeat,
                                         [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      if (!woke) {
        lock.unlock();
        json beat;
        {
          std::lock_guard core_lock(core_mutex_);
          beat = core_->heartbeat();
        }
        publish({beat});
        last_output = Clock::now();
      }
    }
  }
}

std::shared_ptr<SessionRunner> SessionRegistry::create(const SessionOptions& options) {
  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  auto core = std::make_unique<SessionCore>(id, options);
  auto runner = std::make_shared<SessionRunner>(std::move(core), heartbeat_seconds_);
  std::lock_guard lock(mutex_);
  sessions_[id] = runner;
  return runner;
}

std::shared_ptr<SessionRunner> SessionRegistry::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool SessionRegistry::remove(const std::string& id) {
  std::shared_ptr<SessionRunner> runner;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    runner = it->second;
    sessions_.erase(it);
  }
  runner->close();
  return true;
}

std::vector<std::string> SessionRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

void SessionRegistry::close_all() {
  std::map<std::string, std::shared_ptr<SessionRunner>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& [id, runner] : sessions) runner->close();
}

}  // namespace ppmc::teleop
