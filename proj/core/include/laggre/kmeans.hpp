#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "laggre/embedding.hpp"
#include "laggre/memory_bank.hpp"

namespace laggre {

/// One partition of the bank rows into m clusters.
struct Clustering {
  std::size_t clusters = 0;
  std::size_t dim = 0;
  std::vector<std::uint32_t> assignment;  // N labels in [0, clusters)
  std::vector<double> centroids;          // clusters x dim, empty when loaded from disk
  double inertia = 0.0;                   // sum of squared distances to assigned centroid
  std::vector<double> inertia_history;    // one entry per assignment pass
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t size() const noexcept { return assignment.size(); }
  std::span<const double> centroid(std::size_t c) const { return {centroids.data() + c * dim, dim}; }

  /// Label-only clustering (no centroids), e.g. read from a file.
  static Clustering from_assignment(std::vector<std::uint32_t> assignment, std::size_t clusters);
};

struct KMeansOptions {
  std::size_t clusters = 2;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  unsigned workers = 1;
};

/// Lloyd's algorithm from greedy k-means++ seeding, squared Euclidean distance.
/// Empty clusters are re-seeded at the point farthest from its own centroid.
Clustering kmeans_fit(const MemoryBank& snapshot, const KMeansOptions& options);

/// H clusterings over the same N points plus per-cluster member lists.
class ClusteringEnsemble {
 public:
  ClusteringEnsemble() = default;
  ClusteringEnsemble(std::vector<Clustering> clusterings, std::vector<std::uint64_t> seeds);

  std::size_t size() const noexcept { return clusterings_.size(); }
  std::size_t points() const noexcept { return points_; }
  const Clustering& operator[](std::size_t j) const { return clusterings_[j]; }
  std::span<const std::uint64_t> seeds() const noexcept { return seeds_; }

  /// Members of the cluster that point i belongs to in clustering j.
  const IndexSet& cluster_of(std::size_t j, std::size_t i) const;

  /// Equality of partitions (labels and cluster counts).
  bool same_partitions(const ClusteringEnsemble& other) const;

 private:
  std::vector<Clustering> clusterings_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::vector<IndexSet>> members_;
  std::size_t points_ = 0;
};

// On-disk layout (little-endian): "LACL", u32 version=1, u32 N, u32 H, then
// per clustering u32 m followed by N u32 labels. Centroids are not stored.
void save_ensemble(const ClusteringEnsemble& ensemble, const std::filesystem::path& path);
ClusteringEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace laggre
