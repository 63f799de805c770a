#include "laggre/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "laggre/error.hpp"
#include "laggre/probability.hpp"

namespace laggre {

namespace {

struct Candidate {
  double sim;
  IndexSet::value_type index;
};

// True when a ranks ahead of b: larger similarity, then smaller index.
bool ranks_ahead(const Candidate& a, const Candidate& b) {
  return a.sim > b.sim || (a.sim == b.sim && a.index < b.index);
}

}  // namespace

IndexSet top_k(std::span<const double> similarities, std::size_t k) {
  const std::size_t n = similarities.size();
  if (k < 1 || k > n) throw ConfigError("top-k needs 1 <= k <= N");
  if (k == n) return IndexSet::range(n);

  // Heap front is the weakest of the current k.
  std::vector<Candidate> heap;
  heap.reserve(k);
  for (std::size_t j = 0; j < n; ++j) {
    Candidate c{similarities[j], static_cast<IndexSet::value_type>(j)};
    if (heap.size() < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), ranks_ahead);
    } else if (ranks_ahead(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), ranks_ahead);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), ranks_ahead);
    }
  }
  std::vector<IndexSet::value_type> out;
  out.reserve(k);
  for (const auto& c : heap) out.push_back(c.index);
  std::sort(out.begin(), out.end());
  return IndexSet::from_sorted(std::move(out));
}

IndexSet knn_background(const Embedding& v, const MemoryBank& bank, std::size_t k) {
  if (k < 1 || k > bank.size()) throw ConfigError("knn_background needs 1 <= k <= N");
  return top_k(similarity_row(v, bank), k);
}

IndexSet close_neighbors(std::size_t i, const ClusteringEnsemble& ensemble) {
  if (ensemble.size() == 0) throw ConfigError("close_neighbors needs a non-empty ensemble");
  IndexSet out = ensemble.cluster_of(0, i);
  for (std::size_t j = 1; j < ensemble.size(); ++j) out = set_union(out, ensemble.cluster_of(j, i));
  return out;
}

std::string_view to_string(BackgroundMode mode) {
  switch (mode) {
    case BackgroundMode::All: return "ALL";
    case BackgroundMode::Cluster: return "CLUSTER";
    case BackgroundMode::Knn: return "KNN";
  }
  return "?";
}

std::string_view to_string(CloseMode mode) {
  switch (mode) {
    case CloseMode::Self: return "SELF";
    case CloseMode::KnnClose: return "KNN_CLOSE";
    case CloseMode::Ensemble: return "ENSEMBLE";
  }
  return "?";
}

BackgroundMode parse_background_mode(std::string_view text) {
  if (text == "ALL") return BackgroundMode::All;
  if (text == "CLUSTER") return BackgroundMode::Cluster;
  if (text == "KNN") return BackgroundMode::Knn;
  throw ConfigError("unknown background mode '" + std::string(text) + "' (ALL, CLUSTER, KNN)");
}

CloseMode parse_close_mode(std::string_view text) {
  if (text == "SELF") return CloseMode::Self;
  if (text == "KNN_CLOSE") return CloseMode::KnnClose;
  if (text == "ENSEMBLE") return CloseMode::Ensemble;
  throw ConfigError("unknown close mode '" + std::string(text) + "' (SELF, KNN_CLOSE, ENSEMBLE)");
}

IndexSet background_variant(BackgroundMode mode, std::size_t i, std::span<const double> similarities,
                            const BackgroundParams& params) {
  const std::size_t n = similarities.size();
  if (i >= n) throw IndexOutOfRange("sample index outside the bank");
  const auto self = static_cast<IndexSet::value_type>(i);
  switch (mode) {
    case BackgroundMode::All:
      return IndexSet::range(n);
    case BackgroundMode::Cluster:
      if (params.cluster_ensemble == nullptr)
        throw ConfigError("CLUSTER background mode needs a clustering ensemble");
      return close_neighbors(i, *params.cluster_ensemble);
    case BackgroundMode::Knn:
      return with_index(top_k(similarities, params.k), self);
  }
  throw ConfigError("invalid background mode");
}

IndexSet background_variant(BackgroundMode mode, std::size_t i, const Embedding& v, const MemoryBank& bank,
                            const BackgroundParams& params) {
  return background_variant(mode, i, similarity_row(v, bank), params);
}

IndexSet close_variant(CloseMode mode, std::size_t i, std::span<const double> similarities,
                       const ClusteringEnsemble* ensemble, std::size_t k_prime) {
  const std::size_t n = similarities.size();
  if (i >= n) throw IndexOutOfRange("sample index outside the bank");
  const auto self = static_cast<IndexSet::value_type>(i);
  switch (mode) {
    case CloseMode::Self:
      return IndexSet{self};
    case CloseMode::KnnClose:
      if (k_prime < 1) throw ConfigError("KNN_CLOSE needs k' >= 1");
      return with_index(top_k(similarities, std::min(k_prime, n)), self);
    case CloseMode::Ensemble:
      if (ensemble == nullptr) throw ConfigError("ENSEMBLE close mode needs a clustering ensemble");
      return close_neighbors(i, *ensemble);
  }
  throw ConfigError("invalid close mode");
}

IndexSet close_variant(CloseMode mode, std::size_t i, const Embedding& v, const MemoryBank& bank,
                       const ClusteringEnsemble* ensemble, std::size_t k_prime) {
  if (mode == CloseMode::Self) {
    if (i >= bank.size()) throw IndexOutOfRange("sample index outside the bank");
    return IndexSet{static_cast<IndexSet::value_type>(i)};
  }
  return close_variant(mode, i, similarity_row(v, bank), ensemble, k_prime);
}

}  // namespace laggre
