#include "laggre/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "laggre/binary_io.hpp"
#include "laggre/error.hpp"
#include "laggre/rng.hpp"

namespace laggre {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;

double angle_between(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += a[k] * b[k];
  return std::acos(std::clamp(d, -1.0, 1.0));
}
}  // namespace

std::vector<double> Dataset::row_values(std::size_t i) const {
  auto r = row(i);
  return {r.begin(), r.end()};
}

bool Dataset::same_contents(const Dataset& other) const {
  return n == other.n && input_dim == other.input_dim && labels == other.labels &&
         std::memcmp(inputs.data(), other.inputs.data(), inputs.size() * sizeof(float)) == 0;
}

Dataset generate_dataset(const GenerateOptions& o) {
  if (o.classes < 2) throw ConfigError("gen-data needs at least 2 classes");
  if (o.per_class < 1) throw ConfigError("gen-data needs at least one sample per class");
  if (o.latent_dim < 2) throw ConfigError("latent dimension must be at least 2");
  if (o.input_dim < o.latent_dim) throw ConfigError("input_dim must be at least latent_dim");
  if (!(o.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");

  GeneratorInfo info;
  info.seed = o.seed;
  info.classes = o.classes;
  info.latent_dim = o.latent_dim;
  info.noise_sigma = o.noise_sigma;
  info.min_angle = o.min_angle > 0.0 ? o.min_angle
                   : o.latent_dim == 2 ? std::numbers::pi / static_cast<double>(o.classes)
                                       : std::numbers::pi / 4.0;

  const std::size_t ld = o.latent_dim;
  Rng center_rng(derive_seed(o.seed, {1}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::size_t rejections = 0;
  std::vector<double> cand(ld);
  while (info.centers.size() < o.classes * ld) {
    double norm = 0.0;
    do {
      for (double& x : cand) x = gauss(center_rng);
      norm = std::sqrt(std::inner_product(cand.begin(), cand.end(), cand.begin(), 0.0));
    } while (norm < 1e-12);
    for (double& x : cand) x /= norm;
    bool ok = true;
    for (std::size_t c = 0; ok && c * ld < info.centers.size(); ++c)
      ok = angle_between(cand, {info.centers.data() + c * ld, ld}) >= info.min_angle;
    if (ok) {
      info.centers.insert(info.centers.end(), cand.begin(), cand.end());
    } else if (++rejections >= kMaxCenterRejections) {
      throw ConfigError("could not place " + std::to_string(o.classes) +
                        " class centres at the requested separation after 10^4 rejections");
    }
  }

  Dataset data;
  data.n = o.classes * o.per_class;
  data.input_dim = o.input_dim;
  data.labels.emplace();
  data.labels->reserve(data.n);
  info.latent.reserve(data.n * ld);
  Rng noise_rng(derive_seed(o.seed, {2}));
  for (std::size_t c = 0; c < o.classes; ++c) {
    for (std::size_t s = 0; s < o.per_class; ++s) {
      for (std::size_t k = 0; k < ld; ++k)
        info.latent.push_back(info.centers[c * ld + k] + o.noise_sigma * gauss(noise_rng));
      data.labels->push_back(static_cast<std::uint32_t>(c));
    }
  }

  // Fixed random lift into input space.
  Rng lift_rng(derive_seed(o.seed, {3}));
  std::normal_distribution<double> weight(0.0, 1.0 / std::sqrt(static_cast<double>(ld)));
  std::normal_distribution<double> offset(0.0, 0.25);
  std::vector<double> lift(o.input_dim * ld);
  std::vector<double> bias(o.input_dim);
  for (double& w : lift) w = weight(lift_rng);
  for (double& b : bias) b = offset(lift_rng);

  data.inputs.resize(data.n * o.input_dim);
  for (std::size_t i = 0; i < data.n; ++i) {
    const double* z = info.latent.data() + i * ld;
    for (std::size_t r = 0; r < o.input_dim; ++r) {
      double acc = bias[r];
      for (std::size_t k = 0; k < ld; ++k) acc += lift[r * ld + k] * z[k];
      data.inputs[i * o.input_dim + r] = static_cast<float>(acc > 0.0 ? acc : 0.0);
    }
  }
  data.generator = std::move(info);
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  if (data.inputs.size() != data.n * data.input_dim) throw ShapeMismatch("dataset payload does not match N x D");
  if (data.labels && data.labels->size() != data.n) throw LabelMismatch("dataset label count differs from N");
  io::BinaryWriter w(path);
  w.magic("LADS");
  w.scalar<std::uint32_t>(kDatasetVersion);
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(data.n));
  w.scalar<std::uint32_t>(static_cast<std::uint32_t>(data.input_dim));
  w.scalar<std::uint8_t>(data.labels ? 1 : 0);
  w.array(std::span<const float>(data.inputs));
  if (data.labels) w.array(std::span<const std::uint32_t>(*data.labels));
  w.finish();
}

Dataset load_dataset(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic("LADS");
  r.require(13, "header");
  const auto version = r.scalar<std::uint32_t>();
  if (version != kDatasetVersion)
    throw FormatError("dataset file version " + std::to_string(version) + " is not supported");
  Dataset data;
  data.n = r.scalar<std::uint32_t>();
  data.input_dim = r.scalar<std::uint32_t>();
  const auto has_labels = r.scalar<std::uint8_t>();
  if (data.n == 0 || data.input_dim == 0) throw FormatError("dataset header has an empty shape");
  if (has_labels > 1) throw FormatError("dataset header has invalid label flag");
  const std::uint64_t payload =
      std::uint64_t{data.n} * data.input_dim * 4 + (has_labels ? std::uint64_t{data.n} * 4 : 0);
  r.require(payload, "payload");
  data.inputs.resize(data.n * data.input_dim);
  r.array(std::span<float>(data.inputs));
  if (has_labels) {
    data.labels.emplace(data.n);
    r.array(std::span<std::uint32_t>(*data.labels));
  }
  r.expect_end();
  return data;
}

DataSplit split_train_validation(std::size_t n, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(derive_seed(seed, {0x5b1d}));
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  if (n_val >= n) n_val = n - 1;
  DataSplit split;
  split.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

}  // namespace laggre
