#include "ppmc/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>

namespace ppmc {
namespace {

using nlohmann::json;

// Reads optional keys from one JSON object and rejects any it was not
// asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& target) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      target = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(label() + "." + key + " has the wrong type");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = j_.find(key);
    return Section(it == j_.end() ? kEmpty : *it, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key " + label() + "." + it.key());
    }
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<double> point_list(const std::vector<Point2>& points) {
  std::vector<double> flat;
  for (const Point2& p : points) {
    flat.push_back(p.x);
    flat.push_back(p.y);
  }
  return flat;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t value) {
  seed = value;
  learner.seed = value;
  eval.config.base_seed = value;
}

void RunConfig::validate() const {
  trainer.validate();
  learner.validate();
  rover.validate();
  eval.config.validate();
  HeightField check(terrain);
  (void)check;
  if (eval.trials == 0) throw ConfigError("eval.trials must be positive");
  for (int m : eval.maps) terrain_preset(m);
  for (int c : eval.cases) standard_case(c);
  if (eval.command_noise < 0.0) throw ConfigError("eval.command_noise must be >= 0");
}

TrainingSetup RunConfig::training_setup() const {
  TrainingSetup s;
  s.trainer = trainer;
  s.learner = learner;
  s.terrain = terrain;
  s.rover = rover;
  s.reward = reward;
  s.encoding = encoding;
  s.limits = limits;
  s.split_trunk = split_trunk;
  s.probe_episodes = probe_episodes;
  s.output_dir = output_dir;
  return s;
}

json to_json(const RunConfig& c) {
  const RoverParams& r = c.rover;
  const NormalizationLimits& l = c.limits;
  const LearnerConfig& lc = c.learner;
  const EvalConfig& ec = c.eval.config;
  return json{
      {"seed", c.seed},
      {"output_dir", c.output_dir.generic_string()},
      {"terrain",
       {{"map", c.map},
        {"seed", c.terrain.seed},
        {"amplitude", c.terrain.amplitude},
        {"wavelength", c.terrain.wavelength},
        {"octaves", c.terrain.octaves},
        {"extent", c.terrain.extent}}},
      {"rover",
       {{"chassis_length", r.chassis_length},
        {"chassis_width", r.chassis_width},
        {"wheel_radius", r.wheel_radius},
        {"mass", r.mass},
        {"max_torque", r.max_torque},
        {"max_wheel_speed", r.max_wheel_speed},
        {"control_dt", r.control_dt},
        {"physics_dt", r.physics_dt},
        {"chassis_clearance", r.chassis_clearance},
        {"drive_inertia", r.drive_inertia},
        {"velocity_gain", r.velocity_gain},
        {"gravity", r.gravity},
        {"rollover_threshold", r.rollover_threshold},
        {"spin_threshold", r.spin_threshold},
        {"spin_window", r.spin_window}}},
      {"reward",
       {{"velocity_to_goal", c.reward.velocity_to_goal},
        {"alive", c.reward.alive},
        {"reverse", c.reward.reverse},
        {"torque", c.reward.torque},
        {"turning", c.reward.turning}}},
      {"observation",
       {{"yaw_encoding", c.encoding == YawEncoding::kSinCos ? "sincos" : "normalized"},
        {"limits",
         {{"wheel_speed", l.wheel_speed},
          {"torque", l.torque},
          {"position", l.position},
          {"velocity", l.velocity},
          {"angular_velocity", l.angular_velocity},
          {"roll_pitch", l.roll_pitch},
          {"yaw", l.yaw},
          {"waypoint_angle", l.waypoint_angle},
          {"goal", l.goal}}}}},
      {"network", {{"split_trunk", c.split_trunk}}},
      {"trainer",
       {{"perimeter_half_width", c.trainer.perimeter_half_width},
        {"capture_x", c.trainer.capture_x},
        {"capture_y", c.trainer.capture_y},
        {"initial_limit", c.trainer.initial_limit},
        {"limit_increment", c.trainer.limit_increment},
        {"randomize_heading", c.trainer.randomize_heading},
        {"fixed_waypoints", point_list(c.trainer.fixed_waypoints)},
        {"probe_episodes", c.probe_episodes}}},
      {"learner",
       {{"rollout_length", lc.rollout_length},
        {"workers", lc.workers},
        {"learning_rate", lc.learning_rate},
        {"entropy_coefficient", lc.entropy_coefficient},
        {"value_coefficient", lc.value_coefficient},
        {"discount", lc.discount},
        {"gradient_clip_norm", lc.gradient_clip_norm},
        {"momentum", lc.momentum},
        {"reward_scale", lc.reward_scale},
        {"normalize_advantages", lc.normalize_advantages},
        {"total_steps", lc.total_steps},
        {"log_interval", lc.log_interval},
        {"checkpoint_interval", lc.checkpoint_interval}}},
      {"eval",
       {{"initial_limit", ec.initial_limit},
        {"limit_increment", ec.limit_increment},
        {"capture_x", ec.capture_x},
        {"capture_y", ec.capture_y},
        {"threads", ec.threads},
        {"maps", c.eval.maps},
        {"cases", c.eval.cases},
        {"trials", c.eval.trials},
        {"stochastic", c.eval.stochastic},
        {"command_noise", c.eval.command_noise}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  std::uint64_t seed = c.seed;
  root.read("seed", seed);
  std::string output_dir = c.output_dir.string();
  root.read("output_dir", output_dir);
  c.output_dir = output_dir;

  {
    Section t = root.child("terrain");
    t.read("map", c.map);
    if (c.map < 0 || c.map > 3) throw ConfigError("terrain.map must be 0 (flat) or 1-3");
    c.terrain = c.map == 0 ? flat_terrain() : terrain_preset(c.map);
    t.read("seed", c.terrain.seed);
    t.read("amplitude", c.terrain.amplitude);
    t.read("wavelength", c.terrain.wavelength);
    t.read("octaves", c.terrain.octaves);
    t.read("extent", c.terrain.extent);
    t.finish();
  }
  {
    Section r = root.child("rover");
    RoverParams& p = c.rover;
    r.read("chassis_length", p.chassis_length);
    r.read("chassis_width", p.chassis_width);
    r.read("wheel_radius", p.wheel_radius);
    r.read("mass", p.mass);
    r.read("max_torque", p.max_torque);
    r.read("max_wheel_speed", p.max_wheel_speed);
    r.read("control_dt", p.control_dt);
    r.read("physics_dt", p.physics_dt);
    r.read("chassis_clearance", p.chassis_clearance);
    r.read("drive_inertia", p.drive_inertia);
    r.read("velocity_gain", p.velocity_gain);
    r.read("gravity", p.gravity);
    r.read("rollover_threshold", p.rollover_threshold);
    r.read("spin_threshold", p.spin_threshold);
    r.read("spin_window", p.spin_window);
    r.finish();
  }
  {
    Section r = root.child("reward");
    r.read("velocity_to_goal", c.reward.velocity_to_goal);
    r.read("alive", c.reward.alive);
    r.read("reverse", c.reward.reverse);
    r.read("torque", c.reward.torque);
    r.read("turning", c.reward.turning);
    r.finish();
  }
  {
    Section o = root.child("observation");
    std::string yaw = "normalized";
    o.read("yaw_encoding", yaw);
    if (yaw == "normalized") {
      c.encoding = YawEncoding::kNormalized;
    } else if (yaw == "sincos") {
      c.encoding = YawEncoding::kSinCos;
    } else {
      throw ConfigError("observation.yaw_encoding must be \"normalized\" or \"sincos\"");
    }
    Section l = o.child("limits");
    NormalizationLimits& n = c.limits;
    l.read("wheel_speed", n.wheel_speed);
    l.read("torque", n.torque);
    l.read("position", n.position);
    l.read("velocity", n.velocity);
    l.read("angular_velocity", n.angular_velocity);
    l.read("roll_pitch", n.roll_pitch);
    l.read("yaw", n.yaw);
    l.read("waypoint_angle", n.waypoint_angle);
    l.read("goal", n.goal);
    l.finish();
    for (double v : n.to_array()) {
      if (!(v > 0.0)) throw ConfigError("observation.limits values must be positive");
    }
    o.finish();
  }
  {
    Section n = root.child("network");
    n.read("split_trunk", c.split_trunk);
    n.finish();
  }
  {
    Section t = root.child("trainer");
    TrainerConfig& tc = c.trainer;
    t.read("perimeter_half_width", tc.perimeter_half_width);
    t.read("capture_x", tc.capture_x);
    t.read("capture_y", tc.capture_y);
    t.read("initial_limit", tc.initial_limit);
    t.read("limit_increment", tc.limit_increment);
    t.read("randomize_heading", tc.randomize_heading);
    t.read("probe_episodes", c.probe_episodes);
    std::vector<double> flat;
    t.read("fixed_waypoints", flat);
    if (flat.size() % 2 != 0) throw ConfigError("trainer.fixed_waypoints must hold x,y pairs");
    for (std::size_t k = 0; k < flat.size(); k += 2) tc.fixed_waypoints.push_back({flat[k], flat[k + 1]});
    t.finish();
  }
  {
    Section l = root.child("learner");
    LearnerConfig& lc = c.learner;
    l.read("rollout_length", lc.rollout_length);
    l.read("workers", lc.workers);
    l.read("learning_rate", lc.learning_rate);
    l.read("entropy_coefficient", lc.entropy_coefficient);
    l.read("value_coefficient", lc.value_coefficient);
    l.read("discount", lc.discount);
    l.read("gradient_clip_norm", lc.gradient_clip_norm);
    l.read("momentum", lc.momentum);
    l.read("reward_scale", lc.reward_scale);
    l.read("normalize_advantages", lc.normalize_advantages);
    l.read("total_steps", lc.total_steps);
    l.read("log_interval", lc.log_interval);
    l.read("checkpoint_interval", lc.checkpoint_interval);
    l.finish();
  }
  {
    Section e = root.child("eval");
    EvalConfig& ec = c.eval.config;
    e.read("initial_limit", ec.initial_limit);
    e.read("limit_increment", ec.limit_increment);
    e.read("capture_x", ec.capture_x);
    e.read("capture_y", ec.capture_y);
    e.read("threads", ec.threads);
    e.read("maps", c.eval.maps);
    e.read("cases", c.eval.cases);
    e.read("trials", c.eval.trials);
    e.read("stochastic", c.eval.stochastic);
    e.read("command_noise", c.eval.command_noise);
    e.finish();
  }
  root.finish();
  c.apply_seed(seed);
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config snapshot " + path.string());
  out << to_json(config).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void apply_seed_override(RunConfig& config) {
  const char* value = std::getenv("PPMC_SEED");
  if (value == nullptr || *value == '\0') return;
  std::uint64_t seed = 0;
  const char* end = value + std::char_traits<char>::length(value);
  auto [ptr, ec] = std::from_chars(value, end, seed);
  if (ec != std::errc{} || ptr != end) throw ConfigError(std::string("PPMC_SEED is not an unsigned integer: ") + value);
  config.apply_seed(seed);
}

}  // namespace ppmc
