#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppmc/observation.hpp"

namespace ppmc {

struct NetworkShape {
  std::size_t input_width = kObservationSize;
  std::size_t hidden_layers = 5;
  std::size_t hidden_units = 80;
  std::size_t action_dim = 2;
  // When set the critic gets its own trunk of the same depth and width.
  bool split_trunk = false;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

// Actor-critic parameters: tanh trunk, linear Gaussian-mean head, linear
// value head, and state-independent log standard deviations. The same type
// carries gradients.
struct PolicyParams {
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  NetworkShape shape;
  YawEncoding encoding = YawEncoding::kNormalized;
  NormalizationLimits limits;

  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> critic_trunk;  // empty unless shape.split_trunk
  DenseLayer actor_head;
  DenseLayer critic_head;
  Eigen::VectorXd log_std;

  // All blocks zero-filled.
  static PolicyParams zeros(const NetworkShape& shape);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  // Visits every parameter block in serialization order.
  void for_each_block(const std::function<void(double*, std::size_t)>& fn);
  void for_each_block(const std::function<void(const double*, std::size_t)>& fn) const;

  void clamp_log_std();
  bool all_finite() const;

  friend bool operator==(const PolicyParams& a, const PolicyParams& b);
};

// Orthogonal initialization with gain sqrt(2) on hidden layers and 0.01 on
// both heads; zero biases; log_std = initial_log_std.
PolicyParams init_policy(const NetworkShape& shape, std::uint64_t seed, double initial_log_std = 0.0);

struct PolicyOutput {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d std = Eigen::Vector2d::Ones();
  double value = 0.0;
};

// Activations retained for the backward pass. Each matrix has one column
// per batch entry; index 0 holds the input.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> trunk_activations;
  std::vector<Eigen::MatrixXd> critic_activations;
  Eigen::MatrixXd mean;        // action_dim x batch
  Eigen::RowVectorXd value;    // 1 x batch
};

// Throws std::invalid_argument when the observation width does not match.
PolicyOutput forward(const PolicyParams& params, std::span<const double> obs);
void forward_batch(const PolicyParams& params, const Eigen::MatrixXd& obs, ForwardCache& cache);

// Upstream gradients of a scalar loss with respect to the network outputs.
struct OutputGradients {
  Eigen::MatrixXd mean;      // action_dim x batch
  Eigen::RowVectorXd value;  // 1 x batch
  Eigen::VectorXd log_std;   // action_dim
};

// Exact reverse-mode gradients. Throws std::invalid_argument on shape
// mismatch or non-finite upstream gradients.
PolicyParams backward(const PolicyParams& params, const ForwardCache& cache,
                      const OutputGradients& grads);
PolicyParams backward(const PolicyParams& params, const Eigen::MatrixXd& obs,
                      const OutputGradients& grads);

struct SampledAction {
  Eigen::Vector2d raw;       // pre-clamp sample
  ActionCommand executed;    // clamped to [-1, 1]
  double log_probability = 0.0;  // of the pre-clamp sample
};

double gaussian_log_probability(const PolicyOutput& out, const Eigen::Vector2d& action);
double gaussian_entropy(const Eigen::VectorXd& log_std);

SampledAction sample_action(const PolicyOutput& out, std::mt19937_64& rng);
ActionCommand greedy_action(const PolicyOutput& out);

class PolicyFileError : public std::runtime_error {
 public:
  enum class Kind { kNotFound, kIo, kBadMagic, kVersion, kDimension, kCorrupt };
  PolicyFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr char kPolicyMagic[] = "PPMC-POLICY";
inline constexpr std::uint32_t kPolicyFormatVersion = 1;

// Binary layout (little-endian): magic, u32 version, u8 yaw encoding,
// u8 split trunk, u32 input width, u32 hidden layers, u32 hidden units,
// u32 action dim, u64 parameter count, f64 parameters, u32 limit count,
// f64 limits, u64 FNV-1a checksum of all preceding bytes.
std::vector<std::uint8_t> serialize_policy(const PolicyParams& params);
PolicyParams deserialize_policy(std::span<const std::uint8_t> bytes);

void save_policy(const PolicyParams& params, const std::filesystem::path& path);
// When expected_width is non-zero a differing input width is a
// kDimension error.
PolicyParams load_policy(const std::filesystem::path& path, std::size_t expected_width = 0);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
// FNV-1a 64 of a whole file's bytes.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace ppmc
