#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "laggre/embedding.hpp"

namespace laggre {

/// Running-average feature store: N unit rows of dimension D, stored as
/// float32 (the on-disk precision) and read back as double for arithmetic.
///
/// Evaluation labels ride along for the kNN classifier but are only reachable
/// through eval_labels(); nothing on the training path calls it.
class MemoryBank {
 public:
  static constexpr double kDefaultMix = 0.5;

  /// N independent sphere-uniform rows (Gaussian sample, then normalize).
  static MemoryBank init_random(std::size_t n, std::size_t d, std::uint64_t seed);

  /// Builds a bank from N*D row-major values; every row is normalized.
  static MemoryBank from_rows(std::span<const double> rows, std::size_t n, std::size_t d);
  static MemoryBank from_rows(const std::vector<std::vector<double>>& rows);
  static MemoryBank from_embeddings(std::span<const Embedding> rows);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return d_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return {rows_.data() + i * d_, d_};
  }
  std::vector<double> row_values(std::size_t i) const;
  std::span<const float> data() const noexcept { return rows_; }

  double mix() const noexcept { return mix_; }
  void set_mix(double t);

  /// Mixes each paired feature into its row: row <- normalize((1-t) row + t v).
  /// Rows whose mixture has norm < 1e-12 are left untouched and counted.
  /// Returns the number of rows skipped this call.
  std::size_t update_rows(const IndexSet& indices, std::span<const Embedding> features, double t);
  std::size_t update_rows(const IndexSet& indices, std::span<const Embedding> features) {
    return update_rows(indices, features, mix_);
  }
  std::size_t degenerate_updates() const noexcept { return degenerate_updates_; }

  bool has_eval_labels() const noexcept { return labels_.has_value(); }
  /// Throws MissingLabels when the bank carries none.
  std::span<const std::uint32_t> eval_labels() const;
  void set_eval_labels(std::vector<std::uint32_t> labels);
  void clear_eval_labels() { labels_.reset(); }

  /// Row and label payload equality (bit-exact on the stored floats).
  bool same_contents(const MemoryBank& other) const;

 private:
  friend MemoryBank load_bank(const std::filesystem::path& path);
  MemoryBank(std::size_t n, std::size_t d);

  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<float> rows_;
  std::optional<std::vector<std::uint32_t>> labels_;
  double mix_ = kDefaultMix;
  std::size_t degenerate_updates_ = 0;
};

// On-disk layout (little-endian): "LABK", u32 version=1, u32 N, u32 D,
// u8 has_labels, N*D float32 rows, then N u32 labels if present.
void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_bank(const std::filesystem::path& path);

}  // namespace laggre
