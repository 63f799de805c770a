#include "laggre/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "laggre/binary_io.hpp"
#include "laggre/error.hpp"
#include "laggre/rng.hpp"

namespace laggre {

namespace {

constexpr std::uint32_t kEncoderVersion = 1;

void check_same_shape(const EncoderParams& a, const EncoderParams& b) {
  if (a.layer_count() != b.layer_count()) throw ShapeMismatch("encoder layer counts differ");
  for (std::size_t l = 0; l < a.layer_count(); ++l)
    if (a.layer(l).in != b.layer(l).in || a.layer(l).out != b.layer(l).out)
      throw ShapeMismatch("encoder layer " + std::to_string(l) + " shapes differ");
}

}  // namespace

EncoderParams::EncoderParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeMismatch("encoder needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.in == 0 || L.out == 0) throw ShapeMismatch("encoder layer has a zero dimension");
    if (L.weight.size() != L.in * L.out || L.bias.size() != L.out)
      throw ShapeMismatch("encoder layer " + std::to_string(l) + " buffers do not match its shape");
    if (l > 0 && layers_[l - 1].out != L.in)
      throw ShapeMismatch("encoder layer " + std::to_string(l) + " input does not chain");
    for (double w : L.weight)
      if (!std::isfinite(w)) throw ShapeMismatch("encoder weight is not finite");
    for (double b : L.bias)
      if (!std::isfinite(b)) throw ShapeMismatch("encoder bias is not finite");
  }
}

EncoderParams EncoderParams::init(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                                  std::uint64_t seed) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layer L;
    L.in = dims[l];
    L.out = dims[l + 1];
    if (L.in == 0 || L.out == 0) throw ShapeMismatch("encoder dimensions must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(L.in));
    std::uniform_real_distribution<double> u(-limit, limit);
    L.weight.resize(L.in * L.out);
    for (double& w : L.weight) w = u(rng);
    L.bias.assign(L.out, 0.0);
    layers.push_back(std::move(L));
  }
  return EncoderParams(std::move(layers));
}

std::size_t EncoderParams::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& L : layers_) total += L.weight.size() + L.bias.size();
  return total;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams out = *this;
  for (auto& L : out.layers_) {
    std::fill(L.weight.begin(), L.weight.end(), 0.0);
    std::fill(L.bias.begin(), L.bias.end(), 0.0);
  }
  return out;
}

void EncoderParams::add_scaled(const EncoderParams& other, double scale) {
  check_same_shape(*this, other);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& L = layers_[l];
    const auto& O = other.layers_[l];
    for (std::size_t k = 0; k < L.weight.size(); ++k) L.weight[k] += scale * O.weight[k];
    for (std::size_t k = 0; k < L.bias.size(); ++k) L.bias[k] += scale * O.bias[k];
  }
}

EncoderParams EncoderParams::quantized() const {
  EncoderParams out = *this;
  for (auto& L : out.layers_) {
    for (double& w : L.weight) w = static_cast<float>(w);
    for (double& b : L.bias) b = static_cast<float>(b);
  }
  return out;
}

std::vector<double> EncoderParams::to_flat() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& L : layers_) {
    flat.insert(flat.end(), L.weight.begin(), L.weight.end());
    flat.insert(flat.end(), L.bias.begin(), L.bias.end());
  }
  return flat;
}

void EncoderParams::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) throw ShapeMismatch("flat parameter vector has the wrong length");
  std::size_t at = 0;
  for (auto& L : layers_) {
    for (double& w : L.weight) w = values[at++];
    for (double& b : L.bias) b = values[at++];
  }
}

ForwardResult forward(const EncoderParams& params, std::span<const double> x) {
  if (x.size() != params.input_dim())
    throw DimensionMismatch("encoder input has dimension " + std::to_string(x.size()) + ", expected " +
                            std::to_string(params.input_dim()));
  ForwardResult result;
  const std::size_t count = params.layer_count();
  result.cache.inputs.reserve(count);
  result.cache.pre.reserve(count);
  std::vector<double> current(x.begin(), x.end());
  for (std::size_t l = 0; l < count; ++l) {
    const auto& L = params.layer(l);
    std::vector<double> pre(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* w = L.weight.data() + o * L.in;
      double acc = L.bias[o];
      for (std::size_t k = 0; k < L.in; ++k) acc += w[k] * current[k];
      pre[o] = acc;
    }
    result.cache.inputs.push_back(std::move(current));
    current = pre;
    if (l + 1 < count)
      for (double& a : current) a = a > 0.0 ? a : 0.0;
    result.cache.pre.push_back(std::move(pre));
  }
  result.z = std::move(current);
  return result;
}

std::vector<double> encode(const EncoderParams& params, std::span<const double> x) {
  return forward(params, x).z;
}

EncoderParams backward(const EncoderParams& params, const ForwardCache& cache, std::span<const double> g_z) {
  const std::size_t count = params.layer_count();
  if (cache.inputs.size() != count || cache.pre.size() != count)
    throw ShapeMismatch("forward cache does not match the encoder");
  if (g_z.size() != params.output_dim()) throw ShapeMismatch("output gradient has the wrong dimension");
  EncoderParams grads = params.zeros_like();
  std::vector<double> delta(g_z.begin(), g_z.end());
  for (std::size_t l = count; l-- > 0;) {
    const auto& L = params.layer(l);
    auto& G = grads.layer(l);
    const auto& input = cache.inputs[l];
    if (l + 1 < count) {
      const auto& pre = cache.pre[l];
      for (std::size_t o = 0; o < L.out; ++o)
        if (pre[o] <= 0.0) delta[o] = 0.0;
    }
    for (std::size_t o = 0; o < L.out; ++o) {
      G.bias[o] = delta[o];
      if (delta[o] == 0.0) continue;
      double* gw = G.weight.data() + o * L.in;
      for (std::size_t k = 0; k < L.in; ++k) gw[k] = delta[o] * input[k];
    }
    if (l == 0) break;
    std::vector<double> next(L.in, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      if (delta[o] == 0.0) continue;
      const double* w = L.weight.data() + o * L.in;
      for (std::size_t k = 0; k < L.in; ++k) next[k] += w[k] * delta[o];
    }
    delta = std::move(next);
  }
  return grads;
}

OptimizerState OptimizerState::for_params(const EncoderParams& params, double lr, double momentum,
                                          double weight_decay) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  OptimizerState s;
  s.velocity = params.zeros_like();
  s.lr = lr;
  s.momentum = momentum;
  s.weight_decay = weight_decay;
  return s;
}

void sgd_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state) {
  check_same_shape(params, grads);
  check_same_shape(params, state.velocity);
  const double decay = 2.0 * state.weight_decay;
  for (std::size_t l = 0; l < params.layer_count(); ++l) {
    auto& P = params.layer(l);
    const auto& G = grads.layer(l);
    auto& V = state.velocity.layer(l);
    for (std::size_t k = 0; k < P.weight.size(); ++k) {
      double g = G.weight[k];
      if (decay != 0.0) g += decay * P.weight[k];
      V.weight[k] = state.momentum * V.weight[k] + g;
      P.weight[k] -= state.lr * V.weight[k];
    }
    for (std::size_t k = 0; k < P.bias.size(); ++k) {
      V.bias[k] = state.momentum * V.bias[k] + G.bias[k];
      P.bias[k] -= state.lr * V.bias[k];
    }
  }
}

void save_encoder(const EncoderParams& params, const std::filesystem::path& path) {
  io::BinaryWriter w(path);
  w.magic("LAEN");
  w.scalar<std::uint32_t>(kEncoderVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(params.layer_count()));
  std::vector<float> buffer;
  for (const auto& L : params.layers()) {
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(L.out));
    w.scalar<std::uint32_t>(static_cast<std::uint32_t>(L.in));
    buffer.assign(L.weight.begin(), L.weight.end());
    w.array(std::span<const float>(buffer));
    buffer.assign(L.bias.begin(), L.bias.end());
    w.array(std::span<const float>(buffer));
  }
  w.finish();
}

EncoderParams load_encoder(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("LAEN");
  r.require(8, "header");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kEncoderVersion)
    throw FormatError("encoder file version " + std::to_string(version) + " is not supported");
  const auto count = r.scalar<std::uint32_t>();
  if (count == 0) throw FormatError("encoder file declares no layers");
  std::vector<Layer> layers;
  std::vector<float> buffer;
  for (std::uint32_t l = 0; l < count; ++l) {
    r.require(8, "layer header");
    Layer L;
    L.out = r.scalar<std::uint32_t>();
    L.in = r.scalar<std::uint32_t>();
    r.require((std::uint64_t{L.out} * L.in + L.out) * 4, "layer payload");
    buffer.resize(L.out * L.in);
    r.array(std::span<float>(buffer));
    L.weight.assign(buffer.begin(), buffer.end());
    buffer.resize(L.out);
    r.array(std::span<float>(buffer));
    L.bias.assign(buffer.begin(), buffer.end());
    layers.push_back(std::move(L));
  }
  r.expect_end();
  try {
    return EncoderParams(std::move(layers));
  } catch (const ShapeMismatch& e) {
    throw FormatError(std::string("invalid encoder file: ") + e.what());
  }
}

}  // namespace laggre
