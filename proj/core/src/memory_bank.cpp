#include "laggre/memory_bank.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "laggre/binary_io.hpp"
#include "laggre/error.hpp"
#include "laggre/rng.hpp"

namespace laggre {

namespace {
constexpr std::uint32_t kBankVersion = 1;
constexpr double kMinNorm = 1e-12;

void store_unit(std::span<float> dst, std::span<const double> src) {
  const double norm = l2_norm(src);
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<float>(src[k] / norm);
}
}  // namespace

MemoryBank::MemoryBank(std::size_t n, std::size_t d) : n_(n), d_(d), rows_(n * d, 0.0f) {
  if (n < 1) throw ConfigError("memory bank needs at least one row");
  if (d < 2) throw ConfigError("memory bank dimension must be at least 2");
}

MemoryBank MemoryBank::init_random(std::size_t n, std::size_t d, std::uint64_t seed) {
  MemoryBank bank(n, d);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(d);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    do {
      for (double& x : z) x = gauss(rng);
      norm = l2_norm(z);
    } while (norm < kMinNorm);
    store_unit({bank.rows_.data() + i * d, d}, z);
  }
  return bank;
}

MemoryBank MemoryBank::from_rows(std::span<const double> rows, std::size_t n, std::size_t d) {
  if (rows.size() != n * d) throw ShapeMismatch("row buffer does not hold N*D values");
  MemoryBank bank(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto e = normalize(rows.subspan(i * d, d));
    store_unit({bank.rows_.data() + i * d, d}, e.values());
  }
  return bank;
}

MemoryBank MemoryBank::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ConfigError("memory bank needs at least one row");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw DimensionMismatch("bank rows differ in dimension");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return from_rows(flat, rows.size(), d);
}

MemoryBank MemoryBank::from_embeddings(std::span<const Embedding> rows) {
  if (rows.empty()) throw ConfigError("memory bank needs at least one row");
  const std::size_t d = rows.front().dim();
  MemoryBank bank(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim() != d) throw DimensionMismatch("bank rows differ in dimension");
    store_unit({bank.rows_.data() + i * d, d}, rows[i].values());
  }
  return bank;
}

std::vector<double> MemoryBank::row_values(std::size_t i) const {
  auto r = row(i);
  return {r.begin(), r.end()};
}

void MemoryBank::set_mix(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("mixing weight t must lie in [0, 1]");
  mix_ = t;
}

std::size_t MemoryBank::update_rows(const IndexSet& indices, std::span<const Embedding> features, double t) {
  if (indices.size() != features.size())
    throw ShapeMismatch("update_rows: index count differs from feature count");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("mixing weight t must lie in [0, 1]");
  indices.check_bound(n_);
  std::size_t skipped = 0;
  std::vector<double> mixed(d_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& v = features[k];
    if (v.dim() != d_) throw DimensionMismatch("update_rows: feature dimension differs from bank");
    float* r = rows_.data() + static_cast<std::size_t>(indices[k]) * d_;
    for (std::size_t c = 0; c < d_; ++c) mixed[c] = (1.0 - t) * static_cast<double>(r[c]) + t * v[c];
    if (l2_norm(mixed) < kMinNorm) {
      ++skipped;
      continue;
    }
    store_unit({r, d_}, mixed);
  }
  degenerate_updates_ += skipped;
  return skipped;
}

std::span<const std::uint32_t> MemoryBank::eval_labels() const {
  if (!labels_) throw MissingLabels("memory bank carries no evaluation labels");
  return *labels_;
}

void MemoryBank::set_eval_labels(std::vector<std::uint32_t> labels) {
  if (labels.size() != n_) throw LabelMismatch("label count differs from bank row count");
  labels_ = std::move(labels);
}

bool MemoryBank::same_contents(const MemoryBank& other) const {
  if (n_ != other.n_ || d_ != other.d_ || labels_ != other.labels_) return false;
  return std::memcmp(rows_.data(), other.rows_.data(), rows_.size() * sizeof(float)) == 0;
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  io::BinaryWriter w(path);
  w.magic("LABK");
  w.scalar<std::uint32_t>(kBankVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(bank.size()));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(bank.dim()));
  w.scalar<std::uint8_t>(bank.has_eval_labels() ? 1 : 0);
  w.array(bank.data());
  if (bank.has_eval_labels()) w.array(bank.eval_labels());
  w.finish();
}

MemoryBank load_bank(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("LABK");
  r.require(13, "header");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kBankVersion)
    throw FormatError("bank file version " + std::to_string(version) + " is not supported");
  const auto n = r.scalar<std::uint32_t>();
  const auto d = r.scalar<std::uint32_t>();
  const auto has_labels = r.scalar<std::uint8_t>();
  if (n < 1 || d < 2) throw FormatError("bank header has invalid shape");
  if (has_labels > 1) throw FormatError("bank header has invalid label flag");
  const std::uint64_t payload = std::uint64_t{n} * d * 4 + (has_labels ? std::uint64_t{n} * 4 : 0);
  r.require(payload, "rows");
  MemoryBank bank(n, d);
  r.array(std::span<float>(bank.rows_));
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = bank.row_values(i);
    const double norm = l2_norm(v);
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-5)
      throw FormatError("bank row " + std::to_string(i) + " is not a unit vector");
  }
  if (has_labels) {
    std::vector<std::uint32_t> labels(n);
    r.array(std::span<std::uint32_t>(labels));
    bank.labels_ = std::move(labels);
  }
  r.expect_end();
  return bank;
}

}  // namespace laggre
