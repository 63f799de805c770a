#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include "laggre/embedding.hpp"
#include "laggre/kmeans.hpp"
#include "laggre/memory_bank.hpp"

namespace laggre {

struct NeighborSets {
  IndexSet background;  // B_i
  IndexSet close;       // C_i
};

/// Indices of the k largest similarities, ties to the smaller index, returned
/// sorted ascending. Bounded heap, O(N log k).
IndexSet top_k(std::span<const double> similarities, std::size_t k);

/// The k bank rows closest to v by dot product.
IndexSet knn_background(const Embedding& v, const MemoryBank& bank, std::size_t k);

/// Union over the ensemble of the cluster that contains i (read by index).
IndexSet close_neighbors(std::size_t i, const ClusteringEnsemble& ensemble);

enum class BackgroundMode { All, Cluster, Knn };
enum class CloseMode { Self, KnnClose, Ensemble };

std::string_view to_string(BackgroundMode mode);
std::string_view to_string(CloseMode mode);
BackgroundMode parse_background_mode(std::string_view text);
CloseMode parse_close_mode(std::string_view text);

struct BackgroundParams {
  std::size_t k = 0;
  const ClusteringEnsemble* cluster_ensemble = nullptr;  // required by Cluster mode
};

/// B_i under the chosen procedure. Knn mode adds i itself to the k nearest rows.
IndexSet background_variant(BackgroundMode mode, std::size_t i, const Embedding& v,
                            const MemoryBank& bank, const BackgroundParams& params);
/// Same, reusing a precomputed similarity row of v against the bank.
IndexSet background_variant(BackgroundMode mode, std::size_t i, std::span<const double> similarities,
                            const BackgroundParams& params);

/// C_i under the chosen procedure. KnnClose returns the k' nearest rows plus i.
IndexSet close_variant(CloseMode mode, std::size_t i, const Embedding& v, const MemoryBank& bank,
                       const ClusteringEnsemble* ensemble, std::size_t k_prime);
IndexSet close_variant(CloseMode mode, std::size_t i, std::span<const double> similarities,
                       const ClusteringEnsemble* ensemble, std::size_t k_prime);

}  // namespace laggre
