#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace laggre {

/// Affine layer: weight is out x in, row-major.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  friend bool operator==(const Layer&, const Layer&) = default;
};

/// Feedforward encoder: affine -> ReLU on every hidden layer, affine output.
class EncoderParams {
 public:
  EncoderParams() = default;
  explicit EncoderParams(std::vector<Layer> layers);

  /// Fan-in scaled uniform weights U(-sqrt(6/in), sqrt(6/in)), zero biases.
  static EncoderParams init(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                            std::uint64_t seed);

  std::size_t input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  std::size_t parameter_count() const noexcept;

  const Layer& layer(std::size_t l) const { return layers_[l]; }
  Layer& layer(std::size_t l) { return layers_[l]; }
  std::span<const Layer> layers() const noexcept { return layers_; }

  EncoderParams zeros_like() const;
  /// this += scale * other; shapes must match.
  void add_scaled(const EncoderParams& other, double scale);
  /// Copy with every value rounded through float32 (checkpoint precision).
  EncoderParams quantized() const;

  /// All weights then biases, layer by layer.
  std::vector<double> to_flat() const;
  void assign_flat(std::span<const double> values);

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;

 private:
  std::vector<Layer> layers_;
};

struct ForwardCache {
  std::vector<std::vector<double>> inputs;  // input seen by each layer
  std::vector<std::vector<double>> pre;     // pre-activation of each layer
};

struct ForwardResult {
  std::vector<double> z;  // raw (un-normalized) output
  ForwardCache cache;
};

ForwardResult forward(const EncoderParams& params, std::span<const double> x);
/// Output only, no cache.
std::vector<double> encode(const EncoderParams& params, std::span<const double> x);

/// Parameter gradients of a scalar loss given its gradient at the output z.
EncoderParams backward(const EncoderParams& params, const ForwardCache& cache, std::span<const double> g_z);

struct OptimizerState {
  EncoderParams velocity;
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  static OptimizerState for_params(const EncoderParams& params, double lr, double momentum, double weight_decay);
};

/// velocity <- momentum * velocity + grad + 2 * weight_decay * param (weights only);
/// param <- param - lr * velocity.
void sgd_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state);

// On-disk layout (little-endian): "LAEN", u32 version=1, u32 layer_count, then
// per layer u32 out, u32 in, float32 weights row-major, float32 biases.
void save_encoder(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_encoder(const std::filesystem::path& path);

}  // namespace laggre
