#include "laggre/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include <fmt/format.h>
#include <fmt/os.h>

#include "laggre/error.hpp"
#include "laggre/neighbors.hpp"
#include "laggre/parallel.hpp"
#include "laggre/probability.hpp"
#include "laggre/rng.hpp"

namespace laggre {

KnnPrediction knn_classify(const Embedding& v, const MemoryBank& bank, std::size_t K, Temperature tau) {
  const auto labels = bank.eval_labels();
  if (K < 1 || K > bank.size()) throw ConfigError("kNN classifier needs 1 <= K <= N");
  const auto sims = similarity_row(v, bank);
  const auto neighbors = top_k(sims, K);
  double peak = -std::numeric_limits<double>::infinity();
  for (auto j : neighbors) peak = std::max(peak, sims[j]);
  std::map<std::uint32_t, double> votes;
  double total = 0.0;
  for (auto j : neighbors) {
    const double w = std::exp((sims[j] - peak) / tau.value());
    votes[labels[j]] += w;
    total += w;
  }
  KnnPrediction best;
  double best_weight = -1.0;
  for (const auto& [label, weight] : votes) {
    if (weight > best_weight) {
      best_weight = weight;
      best.label = label;
    }
  }
  best.confidence = best_weight / total;
  return best;
}

std::vector<Embedding> embed_all(const EncoderParams& encoder, std::span<const double> inputs, unsigned workers) {
  const std::size_t dim = encoder.input_dim();
  if (dim == 0 || inputs.size() % dim != 0) throw DimensionMismatch("input buffer is not a whole number of rows");
  const std::size_t n = inputs.size() / dim;
  std::vector<Embedding> out(n);
  parallel_for(n, workers, [&](std::size_t i) { out[i] = normalize(encode(encoder, inputs.subspan(i * dim, dim))); });
  return out;
}

double knn_accuracy(const EncoderParams& encoder, const MemoryBank& bank, std::span<const double> inputs,
                    std::span<const std::uint32_t> labels, std::size_t K, Temperature tau, unsigned workers) {
  const auto queries = embed_all(encoder, inputs, workers);
  if (queries.size() != labels.size()) throw LabelMismatch("query count differs from label count");
  if (queries.empty()) return 0.0;
  std::vector<char> hit(queries.size(), 0);
  parallel_for(queries.size(), workers,
               [&](std::size_t q) { hit[q] = knn_classify(queries[q], bank, K, tau).label == labels[q]; });
  const auto correct = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(correct) / static_cast<double>(queries.size());
}

double linear_probe(std::span<const Embedding> train, std::span<const std::uint32_t> train_labels,
                    std::span<const Embedding> test, std::span<const std::uint32_t> test_labels,
                    const ProbeOptions& options) {
  if (train.size() != train_labels.size() || test.size() != test_labels.size())
    throw LabelMismatch("embedding and label counts differ");
  if (train.empty() || test.empty()) throw LabelMismatch("linear probe needs non-empty train and test sets");
  const std::size_t d = train.front().dim();
  for (const auto& e : train)
    if (e.dim() != d) throw DimensionMismatch("probe embeddings differ in dimension");
  for (const auto& e : test)
    if (e.dim() != d) throw DimensionMismatch("probe embeddings differ in dimension");
  std::uint32_t max_label = 0;
  for (auto l : train_labels) max_label = std::max(max_label, l);
  for (auto l : test_labels) max_label = std::max(max_label, l);
  const std::size_t classes = std::size_t{max_label} + 1;

  // weights: classes x d, bias: classes
  std::vector<double> W(classes * d, 0.0), b(classes, 0.0);
  std::vector<double> vW(W.size(), 0.0), vb(classes, 0.0);
  std::vector<double> gW(W.size()), gb(classes), logits(classes);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(options.seed, {0x9b0e}));
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  auto scores = [&](const Embedding& x, std::vector<double>& out) {
    for (std::size_t c = 0; c < classes; ++c) {
      double acc = b[c];
      for (std::size_t k = 0; k < d; ++k) acc += W[c * d + k] * x[k];
      out[c] = acc;
    }
  };

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::fill(gW.begin(), gW.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t s = start; s < stop; ++s) {
        const auto& x = train[order[s]];
        scores(x, logits);
        const double peak = *std::max_element(logits.begin(), logits.end());
        double total = 0.0;
        for (double& z : logits) total += (z = std::exp(z - peak));
        for (std::size_t c = 0; c < classes; ++c) {
          const double p = logits[c] / total - (c == train_labels[order[s]] ? 1.0 : 0.0);
          gb[c] += p;
          for (std::size_t k = 0; k < d; ++k) gW[c * d + k] += p * x[k];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (std::size_t k = 0; k < W.size(); ++k) {
        const double g = gW[k] * inv + 2.0 * options.weight_decay * W[k];
        vW[k] = options.momentum * vW[k] + g;
        W[k] -= options.lr * vW[k];
      }
      for (std::size_t c = 0; c < classes; ++c) {
        vb[c] = options.momentum * vb[c] + gb[c] * inv;
        b[c] -= options.lr * vb[c];
      }
    }
  }

  std::size_t correct = 0;
  for (std::size_t q = 0; q < test.size(); ++q) {
    scores(test[q], logits);
    const auto best = static_cast<std::uint32_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    correct += best == test_labels[q];
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

namespace {

std::size_t histogram_bin(double x) {
  const double scaled = (std::clamp(x, -1.0, 1.0) + 1.0) / 2.0 * static_cast<double>(kDensityHistogramBins);
  return std::min(kDensityHistogramBins - 1, static_cast<std::size_t>(scaled));
}

double mean_of(std::vector<double>::iterator first, std::vector<double>::iterator last) {
  const double count = static_cast<double>(last - first);
  return std::accumulate(first, last, 0.0) / count;
}

}  // namespace

DensityProfile density_profile(const MemoryBank& bank, std::size_t local_rank, std::size_t band_low,
                               std::size_t band_high, unsigned workers) {
  const std::size_t n = bank.size();
  if (local_rank < 1 || local_rank > n - 1)
    throw BandOutOfRange(fmt::format("local rank {} outside [1, N-1={}]", local_rank, n - 1));
  if (band_low < 1 || band_low >= band_high || band_high > n - 1)
    throw BandOutOfRange(fmt::format("band [{}, {}] must satisfy 1 <= low < high <= N-1={}", band_low, band_high, n - 1));

  DensityProfile out;
  out.local_rank = local_rank;
  out.band_low = band_low;
  out.band_high = band_high;
  out.local.resize(n);
  out.background.resize(n);

  parallel_for(n, workers, [&](std::size_t i) {
    const auto self = bank.row_values(i);
    std::vector<double> sims;
    sims.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) sims.push_back(dot(bank.row(j), self));
    const auto desc = std::greater<double>();
    // Ranks are 1-based positions in descending order; equal values at a cut
    // contribute identically, so index tie-breaking does not change the means.
    std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(band_high - 1), sims.end(), desc);
    auto band_end = sims.begin() + static_cast<std::ptrdiff_t>(band_high);
    std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(band_low - 1), band_end, desc);
    out.background[i] = mean_of(sims.begin() + static_cast<std::ptrdiff_t>(band_low - 1), band_end);
    const std::size_t local_cut = std::min(local_rank, band_low - 1);
    if (local_cut == local_rank) {
      std::nth_element(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(local_rank - 1),
                       sims.begin() + static_cast<std::ptrdiff_t>(band_low - 1), desc);
      out.local[i] = mean_of(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(local_rank));
    } else {
      // Local band overlaps the background band: sort the needed prefix.
      std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(local_rank), sims.end(), desc);
      out.local[i] = mean_of(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(local_rank));
    }
  });

  out.local_histogram.assign(kDensityHistogramBins, 0);
  out.background_histogram.assign(kDensityHistogramBins, 0);
  for (std::size_t i = 0; i < n; ++i) {
    out.mean_local += out.local[i];
    out.mean_background += out.background[i];
    ++out.local_histogram[histogram_bin(out.local[i])];
    ++out.background_histogram[histogram_bin(out.background[i])];
  }
  out.mean_local /= static_cast<double>(n);
  out.mean_background /= static_cast<double>(n);
  return out;
}

void write_density_csv(const DensityProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "index,local_density,background_density\n";
  for (std::size_t i = 0; i < profile.local.size(); ++i)
    out << fmt::format("{},{:.17g},{:.17g}\n", i, profile.local[i], profile.background[i]);
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

void write_histogram_csv(const DensityProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "bin_left,bin_right,local_count,background_count\n";
  const double width = 2.0 / static_cast<double>(kDensityHistogramBins);
  for (std::size_t b = 0; b < kDensityHistogramBins; ++b) {
    const double left = -1.0 + width * static_cast<double>(b);
    out << fmt::format("{:.6f},{:.6f},{},{}\n", left, left + width, profile.local_histogram[b],
                       profile.background_histogram[b]);
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  if (a.size() != b.size()) throw LabelMismatch("labelings cover different point counts");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> table;
  std::map<std::uint32_t, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, c] : table) index += pairs(c);
  for (const auto& [_, c] : rows) sum_rows += pairs(c);
  for (const auto& [_, c] : cols) sum_cols += pairs(c);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace laggre
