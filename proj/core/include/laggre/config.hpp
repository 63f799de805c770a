#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "laggre/neighbors.hpp"

namespace laggre {

enum class ClusterSource { Bank, FreshForward };
enum class ReclusterUnit { Epoch, Step };

std::string_view to_string(ClusterSource source);
std::string_view to_string(ReclusterUnit unit);

/// Training hyperparameters. Counts set to 0 are resolved from the training
/// set size by resolve().
struct TrainConfig {
  double tau = 0.07;
  std::size_t D = 128;
  std::vector<std::size_t> hidden{128, 64};
  double lambda = 1e-4;  // weight decay on encoder weights
  double t = 0.5;        // memory-bank mixing weight
  std::size_t k = 0;     // background neighbors; 0 -> max(32, N/300)
  std::size_t H = 3;     // clusterings in the close-neighbor ensemble
  std::size_t m = 0;     // clusters per clustering; 0 -> max(4, N/128)
  std::size_t batch_size = 128;
  std::size_t epochs = 50;
  std::size_t warm_start_epochs = 5;
  double lr = 0.03;
  std::vector<std::size_t> lr_milestones;
  double lr_decay = 0.1;
  double momentum = 0.9;
  std::size_t recluster_every = 1;
  ReclusterUnit recluster_unit = ReclusterUnit::Epoch;
  BackgroundMode background_mode = BackgroundMode::Knn;
  CloseMode close_mode = CloseMode::Ensemble;
  std::size_t k_prime = 4;
  std::size_t background_H = 3;  // CLUSTER background ensemble
  std::size_t background_m = 0;  // 0 -> round(background_H * N / k)
  std::uint64_t seed = 0;
  ClusterSource cluster_source = ClusterSource::Bank;
  std::size_t kmeans_max_iters = 100;
  std::size_t knn_k = 0;  // 0 -> min(200, N/10)
  double val_fraction = 0.1;
  std::size_t density_local = 0;  // 0 -> min(30, N/50)
  std::size_t density_low = 0;    // 0 -> N/10
  std::size_t density_high = 0;   // 0 -> min(4096, N/3)
  bool record_wallclock = true;
  unsigned workers = 0;  // 0 -> LAGGRE_WORKERS or hardware concurrency

  /// Copy with every automatic count filled in for a bank of n rows.
  TrainConfig resolve(std::size_t n) const;
  /// Throws ConfigError on violated invariants (call after resolve()).
  void validate(std::size_t n) const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, duplicate
/// keys and malformed values are ConfigErrors.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const TrainConfig& config);

}  // namespace laggre
