#include "ppmc/policy_net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

namespace ppmc {
namespace {

DenseLayer zero_layer(std::size_t out, std::size_t in) {
  return DenseLayer{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
                    Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
}

std::vector<DenseLayer> zero_trunk(const NetworkShape& shape) {
  std::vector<DenseLayer> layers;
  std::size_t in = shape.input_width;
  for (std::size_t i = 0; i < shape.hidden_layers; ++i) {
    layers.push_back(zero_layer(shape.hidden_units, in));
    in = shape.hidden_units;
  }
  return layers;
}

void validate_shape(const NetworkShape& shape) {
  if (shape.input_width == 0 || shape.hidden_layers == 0 || shape.hidden_units == 0 ||
      shape.action_dim != 2) {
    throw std::invalid_argument("network shape needs non-zero widths and a 2-element action head");
  }
}

// Orthogonal matrix (rows or columns orthonormal, whichever is fewer) times gain.
Eigen::MatrixXd orthogonal(Eigen::Index rows, Eigen::Index cols, double gain, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index big = std::max(rows, cols);
  const Eigen::Index small = std::min(rows, cols);
  Eigen::MatrixXd draw(big, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    for (Eigen::Index i = 0; i < big; ++i) draw(i, j) = normal(gen);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(draw);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  Eigen::MatrixXd out = rows >= cols ? q : Eigen::MatrixXd(q.transpose());
  return gain * out;
}

void run_trunk(const std::vector<DenseLayer>& layers, const Eigen::MatrixXd& input,
               std::vector<Eigen::MatrixXd>& acts) {
  acts.resize(layers.size() + 1);
  acts[0] = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    acts[l + 1] = ((layers[l].weight * acts[l]).colwise() + layers[l].bias).array().tanh().matrix();
  }
}

void backprop_trunk(const std::vector<DenseLayer>& layers, const std::vector<Eigen::MatrixXd>& acts,
                    Eigen::MatrixXd upstream, std::vector<DenseLayer>& grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd dz =
        (upstream.array() * (1.0 - acts[l + 1].array().square())).matrix();
    grads[l].weight = dz * acts[l].transpose();
    grads[l].bias = dz.rowwise().sum();
    if (l > 0) upstream = layers[l].weight.transpose() * dz;
  }
}

// little-endian byte helpers
void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw PolicyFileError(PolicyFileError::Kind::kCorrupt, "policy file is truncated");
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

PolicyParams PolicyParams::zeros(const NetworkShape& shape) {
  validate_shape(shape);
  PolicyParams p;
  p.shape = shape;
  p.trunk = zero_trunk(shape);
  if (shape.split_trunk) p.critic_trunk = zero_trunk(shape);
  p.actor_head = zero_layer(shape.action_dim, shape.hidden_units);
  p.critic_head = zero_layer(1, shape.hidden_units);
  p.log_std = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.action_dim));
  return p;
}

void PolicyParams::for_each_block(const std::function<void(double*, std::size_t)>& fn) {
  auto layer = [&](DenseLayer& d) {
    fn(d.weight.data(), static_cast<std::size_t>(d.weight.size()));
    fn(d.bias.data(), static_cast<std::size_t>(d.bias.size()));
  };
  for (DenseLayer& d : trunk) layer(d);
  for (DenseLayer& d : critic_trunk) layer(d);
  layer(actor_head);
  layer(critic_head);
  fn(log_std.data(), static_cast<std::size_t>(log_std.size()));
}

void PolicyParams::for_each_block(const std::function<void(const double*, std::size_t)>& fn) const {
  const_cast<PolicyParams*>(this)->for_each_block(
      [&](double* data, std::size_t n) { fn(data, n); });
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for_each_block([&](const double*, std::size_t size) { n += size; });
  return n;
}

std::vector<double> PolicyParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_block([&](const double* data, std::size_t n) { out.insert(out.end(), data, data + n); });
  return out;
}

void PolicyParams::unflatten(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw std::invalid_argument("flat parameter vector has the wrong length");
  }
  std::size_t offset = 0;
  for_each_block([&](double* data, std::size_t n) {
    std::memcpy(data, values.data() + offset, n * sizeof(double));
    offset += n;
  });
}

void PolicyParams::clamp_log_std() { log_std = log_std.cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd); }

bool PolicyParams::all_finite() const {
  bool ok = true;
  for_each_block([&](const double* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) ok = ok && std::isfinite(data[i]);
  });
  return ok;
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
  return a.shape == b.shape && a.encoding == b.encoding && a.limits == b.limits &&
         a.flatten() == b.flatten();
}

PolicyParams init_policy(const NetworkShape& shape, std::uint64_t seed, double initial_log_std) {
  PolicyParams p = PolicyParams::zeros(shape);
  p.encoding = shape.input_width == observation_width(YawEncoding::kSinCos) ? YawEncoding::kSinCos
                                                                            : YawEncoding::kNormalized;
  std::mt19937_64 gen(seed);
  const double hidden_gain = std::numbers::sqrt2;
  for (DenseLayer& d : p.trunk) d.weight = orthogonal(d.weight.rows(), d.weight.cols(), hidden_gain, gen);
  for (DenseLayer& d : p.critic_trunk) {
    d.weight = orthogonal(d.weight.rows(), d.weight.cols(), hidden_gain, gen);
  }
  p.actor_head.weight = orthogonal(p.actor_head.weight.rows(), p.actor_head.weight.cols(), 0.01, gen);
  p.critic_head.weight = orthogonal(p.critic_head.weight.rows(), p.critic_head.weight.cols(), 0.01, gen);
  p.log_std.setConstant(initial_log_std);
  p.clamp_log_std();
  return p;
}

void forward_batch(const PolicyParams& params, const Eigen::MatrixXd& obs, ForwardCache& cache) {
  if (static_cast<std::size_t>(obs.rows()) != params.shape.input_width) {
    throw std::invalid_argument("observation width " + std::to_string(obs.rows()) +
                                " does not match network input width " +
                                std::to_string(params.shape.input_width));
  }
  run_trunk(params.trunk, obs, cache.trunk_activations);
  const Eigen::MatrixXd& actor_features = cache.trunk_activations.back();
  cache.mean = (params.actor_head.weight * actor_features).colwise() + params.actor_head.bias;
  if (params.shape.split_trunk) {
    run_trunk(params.critic_trunk, obs, cache.critic_activations);
    cache.value = ((params.critic_head.weight * cache.critic_activations.back()).colwise() +
                   params.critic_head.bias);
  } else {
    cache.critic_activations.clear();
    cache.value = (params.critic_head.weight * actor_features).colwise() + params.critic_head.bias;
  }
}

PolicyOutput forward(const PolicyParams& params, std::span<const double> obs) {
  const Eigen::Map<const Eigen::VectorXd> input(obs.data(), static_cast<Eigen::Index>(obs.size()));
  ForwardCache cache;
  forward_batch(params, Eigen::MatrixXd(input), cache);
  PolicyOutput out;
  out.mean = cache.mean.col(0);
  out.std = params.log_std.array().exp().matrix();
  out.value = cache.value(0);
  return out;
}

PolicyParams backward(const PolicyParams& params, const ForwardCache& cache,
                      const OutputGradients& grads) {
  const Eigen::Index batch = cache.mean.cols();
  if (grads.mean.rows() != cache.mean.rows() || grads.mean.cols() != batch ||
      grads.value.cols() != batch || grads.log_std.size() != params.log_std.size()) {
    throw std::invalid_argument("output gradient shapes do not match the forward cache");
  }
  if (!grads.mean.allFinite() || !grads.value.allFinite() || !grads.log_std.allFinite()) {
    throw std::invalid_argument("non-finite loss gradient");
  }

  PolicyParams g = PolicyParams::zeros(params.shape);
  g.encoding = params.encoding;
  g.limits = params.limits;
  const Eigen::MatrixXd& actor_features = cache.trunk_activations.back();
  g.actor_head.weight = grads.mean * actor_features.transpose();
  g.actor_head.bias = grads.mean.rowwise().sum();
  Eigen::MatrixXd d_actor = params.actor_head.weight.transpose() * grads.mean;

  const Eigen::MatrixXd& critic_features =
      params.shape.split_trunk ? cache.critic_activations.back() : actor_features;
  g.critic_head.weight = grads.value * critic_features.transpose();
  g.critic_head.bias = Eigen::VectorXd::Constant(1, grads.value.sum());
  const Eigen::MatrixXd d_critic = params.critic_head.weight.transpose() * grads.value;

  if (params.shape.split_trunk) {
    backprop_trunk(params.critic_trunk, cache.critic_activations, d_critic, g.critic_trunk);
  } else {
    d_actor += d_critic;
  }
  backprop_trunk(params.trunk, cache.trunk_activations, d_actor, g.trunk);
  g.log_std = grads.log_std;
  return g;
}

PolicyParams backward(const PolicyParams& params, const Eigen::MatrixXd& obs,
                      const OutputGradients& grads) {
  ForwardCache cache;
  forward_batch(params, obs, cache);
  return backward(params, cache, grads);
}

double gaussian_log_probability(const PolicyOutput& out, const Eigen::Vector2d& action) {
  double lp = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double z = (action[i] - out.mean[i]) / out.std[i];
    lp += -0.5 * z * z - std::log(out.std[i]) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

double gaussian_entropy(const Eigen::VectorXd& log_std) {
  return log_std.sum() + 0.5 * static_cast<double>(log_std.size()) *
                             std::log(2.0 * std::numbers::pi * std::numbers::e);
}

SampledAction sample_action(const PolicyOutput& out, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledAction s;
  for (int i = 0; i < 2; ++i) s.raw[i] = out.mean[i] + out.std[i] * normal(rng);
  s.log_probability = gaussian_log_probability(out, s.raw);
  s.executed = ActionCommand{s.raw[0], s.raw[1]}.clamped();
  return s;
}

ActionCommand greedy_action(const PolicyOutput& out) {
  return ActionCommand{out.mean[0], out.mean[1]}.clamped();
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::vector<std::uint8_t> serialize_policy(const PolicyParams& params) {
  std::vector<std::uint8_t> out;
  const std::size_t magic_len = sizeof(kPolicyMagic) - 1;
  out.insert(out.end(), kPolicyMagic, kPolicyMagic + magic_len);
  put_u32(out, kPolicyFormatVersion);
  put_u8(out, params.encoding == YawEncoding::kSinCos ? 1 : 0);
  put_u8(out, params.shape.split_trunk ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(params.shape.input_width));
  put_u32(out, static_cast<std::uint32_t>(params.shape.hidden_layers));
  put_u32(out, static_cast<std::uint32_t>(params.shape.hidden_units));
  put_u32(out, static_cast<std::uint32_t>(params.shape.action_dim));
  const std::vector<double> flat = params.flatten();
  put_u64(out, flat.size());
  for (double v : flat) put_f64(out, v);
  const auto limits = params.limits.to_array();
  put_u32(out, static_cast<std::uint32_t>(limits.size()));
  for (double v : limits) put_f64(out, v);
  put_u64(out, fnv1a64(out));
  return out;
}

PolicyParams deserialize_policy(std::span<const std::uint8_t> bytes) {
  using Kind = PolicyFileError::Kind;
  const std::size_t magic_len = sizeof(kPolicyMagic) - 1;
  if (bytes.size() < magic_len || std::memcmp(bytes.data(), kPolicyMagic, magic_len) != 0) {
    throw PolicyFileError(Kind::kBadMagic, "not a policy file (bad magic)");
  }
  Reader in(bytes.subspan(magic_len));
  const std::uint32_t version = in.u32();
  if (version != kPolicyFormatVersion) {
    throw PolicyFileError(Kind::kVersion, "unsupported policy format version " + std::to_string(version));
  }
  NetworkShape shape;
  const std::uint8_t encoding = in.u8();
  const std::uint8_t split = in.u8();
  if (encoding > 1 || split > 1) throw PolicyFileError(Kind::kCorrupt, "policy header flags are corrupt");
  shape.split_trunk = split == 1;
  shape.input_width = in.u32();
  shape.hidden_layers = in.u32();
  shape.hidden_units = in.u32();
  shape.action_dim = in.u32();
  const YawEncoding yaw = encoding == 1 ? YawEncoding::kSinCos : YawEncoding::kNormalized;
  if (shape.input_width != observation_width(yaw) || shape.action_dim != 2 ||
      shape.hidden_layers == 0 || shape.hidden_layers > 64 || shape.hidden_units == 0 ||
      shape.hidden_units > 4096) {
    throw PolicyFileError(Kind::kCorrupt, "policy header dimensions are inconsistent");
  }
  PolicyParams params = PolicyParams::zeros(shape);
  params.encoding = yaw;
  const std::uint64_t count = in.u64();
  if (count != params.parameter_count()) {
    throw PolicyFileError(Kind::kCorrupt, "policy parameter count does not match the header");
  }
  in.need(count * 8);
  std::vector<double> flat(count);
  for (double& v : flat) v = in.f64();
  params.unflatten(flat);
  const std::uint32_t limit_count = in.u32();
  if (limit_count != NormalizationLimits::kCount) {
    throw PolicyFileError(Kind::kCorrupt, "policy normalization table has the wrong length");
  }
  std::array<double, NormalizationLimits::kCount> limits{};
  for (double& v : limits) v = in.f64();
  params.limits = NormalizationLimits::from_array(limits);
  const std::size_t body = magic_len + in.position();
  const std::uint64_t stored = in.u64();
  if (magic_len + in.position() != bytes.size()) {
    throw PolicyFileError(Kind::kCorrupt, "policy file has trailing bytes");
  }
  if (stored != fnv1a64(bytes.first(body))) {
    throw PolicyFileError(Kind::kCorrupt, "policy file checksum mismatch");
  }
  return params;
}

void save_policy(const PolicyParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_policy(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PolicyFileError(PolicyFileError::Kind::kIo, "cannot write policy file " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PolicyFileError(PolicyFileError::Kind::kIo, "failed writing policy file " + path.string());
}

PolicyParams load_policy(const std::filesystem::path& path, std::size_t expected_width) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw PolicyFileError(PolicyFileError::Kind::kNotFound, "policy file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolicyFileError(PolicyFileError::Kind::kIo, "cannot open policy file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  PolicyParams params = deserialize_policy(bytes);
  if (expected_width != 0 && params.shape.input_width != expected_width) {
    throw PolicyFileError(PolicyFileError::Kind::kDimension,
                          "policy input width " + std::to_string(params.shape.input_width) +
                              " does not match the configured observation width " +
                              std::to_string(expected_width));
  }
  return params;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PolicyFileError(PolicyFileError::Kind::kNotFound, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes);
}

}  // namespace ppmc
