#include "laggre/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "laggre/error.hpp"
#include "laggre/memory_bank.hpp"
#include "laggre/probability.hpp"

namespace laggre {

namespace {
constexpr double kMinNorm = 1e-12;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

double dot(std::span<const float> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += static_cast<double>(a[k]) * b[k];
  return acc;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Embedding normalize(std::span<const double> z) {
  if (z.size() < 2) throw DimensionMismatch("embedding dimension must be at least 2");
  for (double x : z)
    if (!std::isfinite(x)) throw DimensionMismatch("embedding has a non-finite entry");
  const double norm = l2_norm(z);
  if (norm < kMinNorm) throw ZeroNorm("cannot normalize a vector with norm below 1e-12");
  std::vector<double> out(z.begin(), z.end());
  for (double& x : out) x /= norm;
  return Embedding(std::move(out));
}

Embedding normalize(std::initializer_list<double> z) {
  return normalize(std::span<const double>(z.begin(), z.size()));
}

Temperature::Temperature(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("temperature must lie in (0, 1]");
}

IndexSet::IndexSet(std::initializer_list<value_type> indices)
    : IndexSet(from_unsorted(std::vector<value_type>(indices))) {}

IndexSet IndexSet::from_unsorted(std::vector<value_type> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  IndexSet s;
  s.indices_ = std::move(indices);
  return s;
}

IndexSet IndexSet::from_sorted(std::vector<value_type> indices) {
  for (std::size_t k = 1; k < indices.size(); ++k)
    if (indices[k - 1] >= indices[k]) throw Error("IndexSet::from_sorted: input not strictly increasing");
  IndexSet s;
  s.indices_ = std::move(indices);
  return s;
}

IndexSet IndexSet::range(std::size_t n) {
  IndexSet s;
  s.indices_.resize(n);
  for (std::size_t k = 0; k < n; ++k) s.indices_[k] = static_cast<value_type>(k);
  return s;
}

bool IndexSet::contains(value_type i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

void IndexSet::check_bound(std::size_t n) const {
  if (!indices_.empty() && indices_.back() >= n)
    throw IndexOutOfRange("index " + std::to_string(indices_.back()) + " out of range for " +
                          std::to_string(n) + " rows");
}

IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
  std::vector<IndexSet::value_type> out;
  out.reserve(std::min(a.size(), b.size()));
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_sorted(std::move(out));
}

IndexSet set_union(const IndexSet& a, const IndexSet& b) {
  std::vector<IndexSet::value_type> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_sorted(std::move(out));
}

IndexSet set_difference(const IndexSet& a, const IndexSet& b) {
  std::vector<IndexSet::value_type> out;
  out.reserve(a.size());
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return IndexSet::from_sorted(std::move(out));
}

IndexSet with_index(const IndexSet& a, IndexSet::value_type i) {
  if (a.contains(i)) return a;
  return set_union(a, IndexSet{i});
}

// ---- non-parametric softmax -------------------------------------------------

void similarity_row(std::span<const double> v, const MemoryBank& bank, std::span<double> out) {
  const std::size_t n = bank.size();
  const std::size_t d = bank.dim();
  if (v.size() != d)
    throw DimensionMismatch("query has dimension " + std::to_string(v.size()) + ", bank has " +
                            std::to_string(d));
  if (out.size() != n) throw DimensionMismatch("similarity output has the wrong length");
  const float* rows = bank.data().data();
  for (std::size_t start = 0; start < n; start += kSimilarityBlockRows) {
    const std::size_t stop = std::min(n, start + kSimilarityBlockRows);
    for (std::size_t j = start; j < stop; ++j) {
      const float* r = rows + j * d;
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(r[k]) * v[k];
      out[j] = acc;
    }
  }
}

std::vector<double> similarity_row(const Embedding& v, const MemoryBank& bank) {
  std::vector<double> out(bank.size());
  similarity_row(v.values(), bank, out);
  return out;
}

double log_sum_exp(std::span<const double> sims, const IndexSet& selection, double tau) {
  if (selection.empty()) return -std::numeric_limits<double>::infinity();
  double peak = -std::numeric_limits<double>::infinity();
  for (auto j : selection) peak = std::max(peak, sims[j]);
  double acc = 0.0;
  for (auto j : selection) acc += std::exp((sims[j] - peak) / tau);
  return peak / tau + std::log(acc);
}

double log_sum_exp(std::span<const double> sims, double tau) {
  if (sims.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(sims.begin(), sims.end());
  double acc = 0.0;
  for (double s : sims) acc += std::exp((s - peak) / tau);
  return peak / tau + std::log(acc);
}

std::vector<double> instance_probs(const Embedding& v, const MemoryBank& bank, Temperature tau) {
  auto sims = similarity_row(v, bank);
  const double peak = *std::max_element(sims.begin(), sims.end());
  double total = 0.0;
  for (double& s : sims) {
    s = std::exp((s - peak) / tau.value());
    total += s;
  }
  for (double& s : sims) s /= total;
  return sims;
}

double instance_prob(std::size_t i, const Embedding& v, const MemoryBank& bank, Temperature tau) {
  if (i >= bank.size())
    throw IndexOutOfRange("row " + std::to_string(i) + " out of range for " +
                          std::to_string(bank.size()) + " rows");
  const auto sims = similarity_row(v, bank);
  return std::exp(sims[i] / tau.value() - log_sum_exp(sims, tau.value()));
}

double set_prob(const IndexSet& set, const Embedding& v, const MemoryBank& bank, Temperature tau) {
  set.check_bound(bank.size());
  if (set.empty()) return 0.0;
  const auto p = instance_probs(v, bank, tau);
  double acc = 0.0;
  for (auto j : set) acc += p[j];
  return acc;
}

}  // namespace laggre
