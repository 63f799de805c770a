#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "laggre/embedding.hpp"
#include "laggre/encoder.hpp"
#include "laggre/memory_bank.hpp"

namespace laggre {

struct KnnPrediction {
  std::uint32_t label = 0;
  double confidence = 0.0;  // winning label's share of the total weight
};

/// Weighted kNN vote: the top-K bank rows each add exp(row.v / tau) to their
/// label. Ties go to the smaller label.
KnnPrediction knn_classify(const Embedding& v, const MemoryBank& bank, std::size_t K, Temperature tau);

/// Fraction of `inputs` (row-major, input_dim wide) whose kNN label matches.
double knn_accuracy(const EncoderParams& encoder, const MemoryBank& bank, std::span<const double> inputs,
                    std::span<const std::uint32_t> labels, std::size_t K, Temperature tau, unsigned workers = 1);

/// Rows of `inputs` pushed through the encoder and normalized.
std::vector<Embedding> embed_all(const EncoderParams& encoder, std::span<const double> inputs, unsigned workers = 1);

struct ProbeOptions {
  std::size_t epochs = 100;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
};

/// Multinomial logistic regression on frozen embeddings; returns top-1 test accuracy.
double linear_probe(std::span<const Embedding> train, std::span<const std::uint32_t> train_labels,
                    std::span<const Embedding> test, std::span<const std::uint32_t> test_labels,
                    const ProbeOptions& options);

inline constexpr std::size_t kDensityHistogramBins = 64;

struct DensityProfile {
  std::size_t local_rank = 0;
  std::size_t band_low = 0;   // 1-based neighbor rank, self excluded
  std::size_t band_high = 0;  // inclusive
  std::vector<double> local;       // per row: mean dot with ranks 1..local_rank
  std::vector<double> background;  // per row: mean dot with ranks band_low..band_high
  double mean_local = 0.0;
  double mean_background = 0.0;
  std::vector<std::size_t> local_histogram;       // kDensityHistogramBins over [-1, 1]
  std::vector<std::size_t> background_histogram;
};

/// Throws BandOutOfRange unless 1 <= local_rank, 1 <= band_low < band_high <= N-1.
DensityProfile density_profile(const MemoryBank& bank, std::size_t local_rank, std::size_t band_low,
                               std::size_t band_high, unsigned workers = 1);

/// Header: index,local_density,background_density
void write_density_csv(const DensityProfile& profile, const std::filesystem::path& path);
/// Header: bin_left,bin_right,local_count,background_count
void write_histogram_csv(const DensityProfile& profile, const std::filesystem::path& path);

/// Adjusted Rand index between two labelings of the same points.
double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

}  // namespace laggre
