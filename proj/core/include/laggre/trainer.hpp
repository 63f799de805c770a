#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "laggre/config.hpp"
#include "laggre/dataset.hpp"
#include "laggre/encoder.hpp"
#include "laggre/kmeans.hpp"
#include "laggre/memory_bank.hpp"

namespace laggre {

enum class Phase { Init, InstanceRecognition, LocalAggregation };
std::string_view to_string(Phase phase);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the pre-training baseline, completed epochs count from 1
  Phase phase = Phase::Init;
  double mean_loss = 0.0;
  std::size_t skipped = 0;
  double knn_acc = 0.0;
  double local_density = 0.0;
  double background_density = 0.0;
  double seconds = 0.0;
};

struct TrainTelemetry {
  std::optional<EpochRecord> baseline;  // state before the first step
  std::vector<EpochRecord> epochs;      // one per completed epoch
  std::size_t reclusterings = 0;
  std::size_t degenerate_bank_updates = 0;
};

/// Header: epoch,phase,mean_loss,skipped,knn_acc,local_density,background_density,seconds
void write_telemetry_csv(const TrainTelemetry& telemetry, std::ostream& out);
void write_telemetry_csv(const TrainTelemetry& telemetry, const std::filesystem::path& path);

struct TrainResult {
  EncoderParams encoder;
  MemoryBank bank;  // one row per training sample, carries training labels for evaluation
  TrainTelemetry telemetry;
  DataSplit split;
  TrainConfig resolved;  // configuration with automatic counts filled in
  std::optional<ClusteringEnsemble> ensemble;  // most recent close-neighbor ensemble
};

/// Learning rate in effect during (0-based) epoch e.
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

/// Rows of `inputs` (row-major) encoded and normalized into a bank.
MemoryBank fresh_forward_snapshot(const EncoderParams& encoder, std::span<const double> inputs, unsigned workers);

/// H k-means fits of `snapshot`, member j seeded from (seed, boundary, j).
ClusteringEnsemble recluster(const MemoryBank& snapshot, std::size_t H, std::size_t m, std::uint64_t seed,
                             std::size_t boundary, std::size_t max_iters, unsigned workers);

/// Full training run; throws ConfigError on an invalid configuration.
TrainResult train(const Dataset& data, const TrainConfig& config);

/// Validation inputs and labels of the split, as evaluated by the trainer.
struct ValidationSet {
  std::vector<double> inputs;
  std::vector<std::uint32_t> labels;
};
ValidationSet validation_set(const Dataset& data, const DataSplit& split);

struct AblationCell {
  BackgroundMode background = BackgroundMode::Knn;
  CloseMode close = CloseMode::Ensemble;
  std::size_t H = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
};

struct AblationGrid {
  std::vector<BackgroundMode> backgrounds;
  std::vector<CloseMode> closes;
  std::vector<std::pair<std::size_t, std::size_t>> hm;  // empty -> base config's (H, m)
  std::vector<std::uint64_t> seeds;                     // empty -> base config's seed

  std::vector<AblationCell> cells(const TrainConfig& base) const;
};

struct AblationRow {
  AblationCell cell;
  std::string variant;
  double knn_acc = 0.0;
  std::string status;  // "ok" or the error message
};

std::vector<AblationRow> run_ablation_grid(const Dataset& data, const TrainConfig& base, const AblationGrid& grid);

/// Header: variant,background_mode,close_mode,H,m,seed,knn_acc,status
void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);

}  // namespace laggre
