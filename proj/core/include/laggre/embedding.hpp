#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace laggre {

/// A point on the unit sphere in D dimensions. Only constructible through
/// normalize(), so every instance has unit L2 norm and finite entries.
class Embedding {
 public:
  Embedding() = default;

  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  friend Embedding normalize(std::span<const double> z);
  explicit Embedding(std::vector<double> v) : values_(std::move(v)) {}

  std::vector<double> values_;
};

/// Returns z / ||z||. Throws ZeroNorm when ||z|| < 1e-12 and DimensionMismatch
/// when z has fewer than two entries or any non-finite entry.
Embedding normalize(std::span<const double> z);
Embedding normalize(std::initializer_list<double> z);

double dot(std::span<const double> a, std::span<const double> b);
double dot(std::span<const float> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Softmax temperature, strictly in (0, 1].
class Temperature {
 public:
  static constexpr double kDefault = 0.07;

  constexpr Temperature() = default;
  explicit Temperature(double tau);

  constexpr double value() const noexcept { return tau_; }

 private:
  double tau_ = kDefault;
};

/// Sorted, deduplicated set of memory-bank row indices.
class IndexSet {
 public:
  using value_type = std::uint32_t;
  using const_iterator = std::vector<value_type>::const_iterator;

  IndexSet() = default;
  IndexSet(std::initializer_list<value_type> indices);

  static IndexSet from_unsorted(std::vector<value_type> indices);
  /// Adopts an already strictly increasing sequence; throws if it is not.
  static IndexSet from_sorted(std::vector<value_type> indices);
  /// {0, 1, ..., n-1}
  static IndexSet range(std::size_t n);

  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  bool contains(value_type i) const;
  const_iterator begin() const noexcept { return indices_.begin(); }
  const_iterator end() const noexcept { return indices_.end(); }
  value_type operator[](std::size_t k) const noexcept { return indices_[k]; }
  std::span<const value_type> indices() const noexcept { return indices_; }

  /// Throws IndexOutOfRange unless every index is < n.
  void check_bound(std::size_t n) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<value_type> indices_;
};

IndexSet set_intersection(const IndexSet& a, const IndexSet& b);
IndexSet set_union(const IndexSet& a, const IndexSet& b);
IndexSet set_difference(const IndexSet& a, const IndexSet& b);
IndexSet with_index(const IndexSet& a, IndexSet::value_type i);

}  // namespace laggre
