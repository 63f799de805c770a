#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace laggre {

/// How a synthetic dataset was produced. Kept in memory only; the dataset
/// file stores inputs and labels.
struct GeneratorInfo {
  std::uint64_t seed = 0;
  std::size_t classes = 0;
  std::size_t latent_dim = 0;
  double noise_sigma = 0.0;
  double min_angle = 0.0;               // radians, enforced between class centres
  std::vector<double> centers;          // classes x latent_dim
  std::vector<double> latent;           // N x latent_dim, before lifting
};

struct Dataset {
  std::size_t n = 0;
  std::size_t input_dim = 0;
  std::vector<float> inputs;  // n x input_dim, row-major
  std::optional<std::vector<std::uint32_t>> labels;
  std::optional<GeneratorInfo> generator;

  std::span<const float> row(std::size_t i) const { return {inputs.data() + i * input_dim, input_dim}; }
  std::vector<double> row_values(std::size_t i) const;

  /// Inputs and labels equal bit-for-bit.
  bool same_contents(const Dataset& other) const;
};

struct GenerateOptions {
  std::size_t classes = 10;
  std::size_t per_class = 200;
  std::size_t latent_dim = 2;
  std::size_t input_dim = 64;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  /// Minimum angle between class centres in radians; 0 picks pi/classes on the
  /// circle and pi/4 in higher latent dimensions.
  double min_angle = 0.0;
};

inline constexpr std::size_t kMaxCenterRejections = 10000;

/// Class centres uniform on the latent unit sphere (rejection-sampled to keep
/// min_angle apart), isotropic Gaussian noise, then a fixed seeded lift
/// x = relu(A z + b) into input_dim. Samples are stored class by class.
Dataset generate_dataset(const GenerateOptions& options);

// On-disk layout (little-endian): "LADS", u32 version=1, u32 N, u32 input_dim,
// u8 has_labels, N*input_dim float32 inputs, then N u32 labels if present.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct DataSplit {
  std::vector<std::uint32_t> train;       // ascending
  std::vector<std::uint32_t> validation;  // ascending
};

/// Seeded permutation; the first round(n * val_fraction) entries go to validation.
DataSplit split_train_validation(std::size_t n, double val_fraction, std::uint64_t seed);

}  // namespace laggre
