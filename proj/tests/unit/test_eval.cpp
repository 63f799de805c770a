#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "laggre/error.hpp"
#include "laggre/eval.hpp"
#include "laggre/probability.hpp"
#include "support/oracles.hpp"

using namespace laggre;
using testing::Rng;

namespace {

/// Unit vector at similarity s with e0 in the (e0, e_axis) plane.
std::vector<double> at_similarity(double s, std::size_t axis, std::size_t d) {
  std::vector<double> r(d, 0.0);
  r[0] = s;
  r[axis] = std::sqrt(1 - s * s);
  return r;
}

/// Unstabilized weighted vote, ties to the smaller label.
std::uint32_t naive_vote(const std::vector<double>& sims, std::span<const std::uint32_t> labels, std::size_t K,
                         double tau, double scale) {
  const auto top = testing::full_sort_top_k(sims, K);
  std::map<std::uint32_t, double> w;
  for (auto j : top) w[labels[j]] += scale * std::exp(sims[j] / tau);
  std::uint32_t best = w.begin()->first;
  for (const auto& [label, weight] : w)
    if (weight > w[best]) best = label;
  return best;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("knn_classify examples") {
    auto bank = MemoryBank::from_rows({at_similarity(0.9, 1, 4), at_similarity(0.8, 2, 4), at_similarity(0.99, 3, 4),
                                       at_similarity(-0.5, 1, 4)});
    bank.set_eval_labels({0, 0, 1, 2});
    const auto v = normalize({1.0, 0.0, 0.0, 0.0});
    const Temperature tau(0.07);
    // K = 1: the single nearest row (label 1), full confidence
    const auto one = knn_classify(v, bank, 1, tau);
    CHECK(one.label == 1);
    CHECK(one.confidence == 1.0);
    // K = 3 with labels (a, a, b) at (0.9, 0.8, 0.99): b wins
    const auto three = knn_classify(v, bank, 3, tau);
    const double a = std::exp(0.9 / 0.07) + std::exp(0.8 / 0.07), b = std::exp(0.99 / 0.07);
    CHECK(b > a);
    CHECK(three.label == 1);
    // rows are stored as float32, so the similarities are 0.9 etc. to ~1e-7
    CHECK(three.confidence == doctest::Approx(b / (a + b)).epsilon(1e-5));
    CHECK_THROWS_AS(knn_classify(v, bank, 5, tau), ConfigError);
    CHECK_THROWS_AS(knn_classify(v, bank, 0, tau), ConfigError);
  }

  TEST_CASE("unanimous neighbors give full confidence") {
    Rng rng(50);
    auto bank = testing::random_bank(rng, 20, 5);
    bank.set_eval_labels(std::vector<std::uint32_t>(20, 6));
    const auto p = knn_classify(testing::random_embedding(rng, 5), bank, 7, Temperature(0.1));
    CHECK(p.label == 6);
    CHECK(p.confidence == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("classification needs labels") {
    const auto bank = MemoryBank::from_rows({{1.0, 0.0}});
    CHECK_THROWS_AS(knn_classify(normalize({1.0, 0.0}), bank, 1, Temperature(0.1)), MissingLabels);
  }

  TEST_CASE("property: vote is invariant to weight rescaling") {
    Rng rng(51);
    for (int trial = 0; trial < 200; ++trial) {
      const auto n = testing::uniform_int(rng, 1, 80);
      auto bank = testing::random_bank(rng, n, 6);
      std::vector<std::uint32_t> labels(n);
      for (auto& l : labels) l = static_cast<std::uint32_t>(testing::uniform_int(rng, 0, 4));
      bank.set_eval_labels(labels);
      const auto v = testing::random_embedding(rng, 6);
      const auto K = testing::uniform_int(rng, 1, n);
      const double tau = testing::uniform_real(rng, 0.05, 1.0);
      const auto sims = testing::naive_sims(bank, testing::values(v));
      const auto got = knn_classify(v, bank, K, Temperature(tau)).label;
      CHECK(got == naive_vote(sims, labels, K, tau, 1.0));
      CHECK(got == naive_vote(sims, labels, K, tau, 1e-3));
    }
  }

  TEST_CASE("linear probe on separable and shuffled data") {
    Rng rng(52);
    SUBCASE("separable two-class embeddings") {
      std::vector<Embedding> tr, te;
      std::vector<std::uint32_t> ytr, yte;
      for (int i = 0; i < 200; ++i) {
        const std::uint32_t y = i % 2;
        auto x = testing::gaussian_vector(rng, 4);
        x[0] = (y ? 1.0 : -1.0) * (1.0 + std::abs(x[0]));
        (i < 150 ? tr : te).push_back(normalize(x));
        (i < 150 ? ytr : yte).push_back(y);
      }
      ProbeOptions o;
      o.epochs = 50;
      CHECK(linear_probe(tr, ytr, te, yte, o) == 1.0);
    }
    SUBCASE("random labels stay near chance") {
      std::vector<Embedding> tr, te;
      std::vector<std::uint32_t> ytr, yte;
      for (int i = 0; i < 2000; ++i) tr.push_back(testing::random_embedding(rng, 8)), ytr.push_back(i % 10);
      for (int i = 0; i < 600; ++i) te.push_back(testing::random_embedding(rng, 8)), yte.push_back(i % 10);
      std::shuffle(ytr.begin(), ytr.end(), rng);
      ProbeOptions o;
      o.epochs = 20;
      const double acc = linear_probe(tr, ytr, te, yte, o);
      CHECK(acc >= 0.05);
      CHECK(acc <= 0.20);
    }
    SUBCASE("mismatched inputs") {
      std::vector<Embedding> tr{normalize({1.0, 0.0})};
      CHECK_THROWS_AS(linear_probe(tr, std::vector<std::uint32_t>{}, tr, std::vector<std::uint32_t>{0}, {}),
                      LabelMismatch);
    }
  }

  TEST_CASE("density of identical and orthonormal banks") {
    const std::vector<std::vector<double>> same(10, std::vector<double>{0.2, 0.4, 0.1});
    const auto p = density_profile(MemoryBank::from_rows(same), 2, 3, 9);
    CHECK(p.mean_local == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.mean_background == doctest::Approx(1.0).epsilon(1e-6));
    std::vector<std::vector<double>> eye(6, std::vector<double>(6, 0.0));
    for (std::size_t i = 0; i < 6; ++i) eye[i][i] = 1.0;
    const auto q = density_profile(MemoryBank::from_rows(eye), 1, 2, 5);
    for (double x : q.local) CHECK(x == 0.0);
    for (double x : q.background) CHECK(x == 0.0);
  }

  TEST_CASE("two antipodal blobs") {
    Rng rng(53);
    std::vector<std::uint32_t> labels;
    const std::vector<std::vector<double>> centers{{1, 0, 0, 0}, {-1, 0, 0, 0}};
    const auto bank = testing::blob_bank(rng, centers, 100, 0.02, labels);
    const auto p = density_profile(bank, 30, 120, 199);
    CHECK(p.mean_local > 0.99);
    CHECK(p.mean_background < -0.99);
    for (std::size_t i = 0; i < bank.size(); ++i) CHECK(p.local[i] >= p.background[i]);
  }

  TEST_CASE("property: top band dominates lower bands and self is excluded") {
    Rng rng(54);
    for (int trial = 0; trial < 30; ++trial) {
      const auto n = testing::uniform_int(rng, 6, 150);
      const auto bank = testing::random_bank(rng, n, 5);
      const auto local = testing::uniform_int(rng, 1, n / 3);
      const auto low = testing::uniform_int(rng, local + 1, n - 2);
      const auto high = testing::uniform_int(rng, low + 1, n - 1);
      const auto p = density_profile(bank, local, low, high);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(p.local[i] >= p.background[i] - 1e-12);
        // oracle: full sort of the other rows
        std::vector<double> others;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) others.push_back(testing::naive_dot(bank, j, bank.row_values(i)));
        std::sort(others.rbegin(), others.rend());
        const double want_local = std::accumulate(others.begin(), others.begin() + local, 0.0) / local;
        const double want_bg =
            std::accumulate(others.begin() + (low - 1), others.begin() + high, 0.0) / static_cast<double>(high - low + 1);
        CHECK(p.local[i] == doctest::Approx(want_local).epsilon(1e-9));
        CHECK(p.background[i] == doctest::Approx(want_bg).epsilon(1e-9));
      }
      std::size_t hist_total = 0;
      for (auto c : p.local_histogram) hist_total += c;
      CHECK(hist_total == n);
    }
  }

  TEST_CASE("density band validation") {
    Rng rng(55);
    const auto bank = testing::random_bank(rng, 10, 3);
    CHECK_THROWS_AS(density_profile(bank, 0, 2, 5), BandOutOfRange);
    CHECK_THROWS_AS(density_profile(bank, 10, 2, 5), BandOutOfRange);
    CHECK_THROWS_AS(density_profile(bank, 2, 5, 5), BandOutOfRange);
    CHECK_THROWS_AS(density_profile(bank, 2, 5, 10), BandOutOfRange);
  }

  TEST_CASE("density CSV files") {
    testing::TempDir dir;
    Rng rng(56);
    const auto p = density_profile(testing::random_bank(rng, 20, 3), 3, 5, 15);
    write_density_csv(p, dir / "d.csv");
    write_histogram_csv(p, dir / "h.csv");
    const auto d = testing::read_file(dir / "d.csv");
    const auto h = testing::read_file(dir / "h.csv");
    CHECK(d.rfind("index,local_density,background_density\n", 0) == 0);
    CHECK(h.rfind("bin_left,bin_right,local_count,background_count\n", 0) == 0);
    CHECK(std::count(d.begin(), d.end(), '\n') == 21);
    CHECK(std::count(h.begin(), h.end(), '\n') == 1 + static_cast<long>(kDensityHistogramBins));
  }

  TEST_CASE("adjusted rand index") {
    const std::vector<std::uint32_t> a{0, 0, 1, 1, 2, 2};
    CHECK(adjusted_rand_index(a, std::vector<std::uint32_t>{5, 5, 3, 3, 0, 0}) == doctest::Approx(1.0));
    Rng rng(57);
    for (int trial = 0; trial < 100; ++trial) {
      const auto n = testing::uniform_int(rng, 5, 200);
      std::vector<std::uint32_t> x(n), y(n);
      for (auto& v : x) v = static_cast<std::uint32_t>(testing::uniform_int(rng, 0, 4));
      for (auto& v : y) v = static_cast<std::uint32_t>(testing::uniform_int(rng, 0, 3));
      CHECK(adjusted_rand_index(x, y) == doctest::Approx(testing::naive_ari(x, y)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(adjusted_rand_index(a, std::vector<std::uint32_t>{0}), LabelMismatch);
  }
}
