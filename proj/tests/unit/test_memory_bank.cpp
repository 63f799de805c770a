#include <doctest.h>

#include <cmath>
#include <fstream>

#include "laggre/error.hpp"
#include "laggre/memory_bank.hpp"
#include "support/oracles.hpp"

using namespace laggre;
using testing::Rng;

namespace {

double row_norm(const MemoryBank& bank, std::size_t i) {
  double s = 0.0;
  for (float x : bank.row(i)) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("memory-bank") {
  TEST_CASE("init_random produces unit rows deterministically") {
    const auto one = MemoryBank::init_random(1, 2, 7);
    CHECK(one.size() == 1);
    CHECK(one.dim() == 2);
    // float32 rows: unit length up to single-precision rounding
    CHECK(std::abs(row_norm(one, 0) - 1.0) < 1e-7);
    const auto a = MemoryBank::init_random(50, 9, 3);
    const auto b = MemoryBank::init_random(50, 9, 3);
    CHECK(a.same_contents(b));
    CHECK_FALSE(a.same_contents(MemoryBank::init_random(50, 9, 4)));
  }

  TEST_CASE("init_random rows are sphere-uniform") {
    const std::size_t n = 10000, d = 16;
    const auto bank = MemoryBank::init_random(n, d, 21);
    // mean pairwise dot = (|sum|^2 - n) / (n (n - 1))
    std::vector<double> sum(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) sum[c] += bank.row(i)[c];
    double sq = 0.0;
    for (double s : sum) sq += s * s;
    double self = 0.0;
    for (std::size_t i = 0; i < n; ++i) self += row_norm(bank, i) * row_norm(bank, i);
    const double mean_dot = (sq - self) / (static_cast<double>(n) * (n - 1));
    CHECK(std::abs(mean_dot) < 0.02);
  }

  TEST_CASE("update_rows mixing rule") {
    auto bank = MemoryBank::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const auto v = normalize({0.0, 1.0});
    SUBCASE("t = 1 replaces the row") {
      bank.update_rows(IndexSet{0}, std::vector{v}, 1.0);
      CHECK(bank.row(0)[0] == 0.0f);
      CHECK(bank.row(0)[1] == 1.0f);
    }
    SUBCASE("t = 0 leaves the row") {
      const auto before = bank;
      bank.update_rows(IndexSet{0}, std::vector{v}, 0.0);
      CHECK(bank.same_contents(before));
    }
    SUBCASE("t = 0.5 renormalizes the midpoint") {
      bank.update_rows(IndexSet{0}, std::vector{v}, 0.5);
      CHECK(bank.row(0)[0] == doctest::Approx(0.70711).epsilon(1e-5));
      CHECK(bank.row(0)[1] == doctest::Approx(0.70711).epsilon(1e-5));
      CHECK(bank.row(1)[1] == 1.0f);
    }
    SUBCASE("default mix is 0.5") {
      CHECK(bank.mix() == 0.5);
      bank.update_rows(IndexSet{0}, std::vector{v});
      CHECK(bank.row(0)[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-6));
    }
  }

  TEST_CASE("antipodal mixture is skipped and counted") {
    auto bank = MemoryBank::from_rows({{1.0, 0.0}});
    const auto skipped = bank.update_rows(IndexSet{0}, std::vector{normalize({-1.0, 0.0})}, 0.5);
    CHECK(skipped == 1);
    CHECK(bank.degenerate_updates() == 1);
    CHECK(bank.row(0)[0] == 1.0f);
  }

  TEST_CASE("update_rows validates arguments") {
    auto bank = MemoryBank::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    const auto v = normalize({0.0, 1.0});
    CHECK_THROWS_AS(bank.update_rows(IndexSet{2}, std::vector{v}, 0.5), IndexOutOfRange);
    CHECK_THROWS_AS(bank.update_rows(IndexSet{0, 1}, std::vector{v}, 0.5), ShapeMismatch);
    CHECK_THROWS_AS(bank.update_rows(IndexSet{0}, std::vector{normalize({1.0, 0.0, 0.0})}, 0.5), DimensionMismatch);
    CHECK_THROWS_AS(bank.update_rows(IndexSet{0}, std::vector{v}, 1.5), ConfigError);
    CHECK_THROWS_AS(bank.set_mix(-0.1), ConfigError);
  }

  TEST_CASE("property: rows stay unit and untouched rows are bit-identical") {
    Rng rng(8);
    auto bank = testing::random_bank(rng, 40, 6);
    for (int step = 0; step < 200; ++step) {
      const auto before = bank;
      const auto idx = testing::random_subset(rng, 40, 0.2);
      std::vector<Embedding> feats;
      for (std::size_t k = 0; k < idx.size(); ++k) feats.push_back(testing::random_embedding(rng, 6));
      bank.update_rows(idx, feats, testing::uniform_real(rng, 0.0, 1.0));
      for (std::size_t i = 0; i < 40; ++i) {
        CHECK(std::abs(row_norm(bank, i) - 1.0) < 1e-6);
        if (!idx.contains(static_cast<std::uint32_t>(i))) {
          const auto a = bank.row(i), b = before.row(i);
          CHECK(std::equal(a.begin(), a.end(), b.begin()));
        }
      }
    }
  }

  TEST_CASE("property: repeated updates converge to the feature") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      auto bank = testing::random_bank(rng, 3, 8);
      const auto v = testing::random_embedding(rng, 8);
      for (int it = 0; it < 30; ++it) bank.update_rows(IndexSet{1}, std::vector{v}, 0.5);
      double dist = 0.0;
      for (std::size_t c = 0; c < 8; ++c) dist += std::pow(bank.row(1)[c] - v[c], 2);
      // float32 storage bounds how close the row can get
      CHECK(std::sqrt(dist) < 1e-6);
    }
  }

  TEST_CASE("labels live behind a separate accessor") {
    auto bank = MemoryBank::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    CHECK_FALSE(bank.has_eval_labels());
    CHECK_THROWS_AS(bank.eval_labels(), MissingLabels);
    CHECK_THROWS_AS(bank.set_eval_labels({1}), LabelMismatch);
    bank.set_eval_labels({4, 2});
    CHECK(bank.eval_labels()[1] == 2);
    bank.clear_eval_labels();
    CHECK_FALSE(bank.has_eval_labels());
  }

  TEST_CASE("save and load round trip") {
    testing::TempDir dir;
    Rng rng(10);
    auto bank = testing::random_bank(rng, 3, 4);
    save_bank(bank, dir / "b.bin");
    const auto loaded = load_bank(dir / "b.bin");
    CHECK(loaded.same_contents(bank));
    CHECK_FALSE(loaded.has_eval_labels());
    CHECK(std::filesystem::file_size(dir / "b.bin") == 4 + 4 + 4 + 4 + 1 + 3 * 4 * 4);

    bank.set_eval_labels({0, 7, 3});
    save_bank(bank, dir / "l.bin");
    const auto labelled = load_bank(dir / "l.bin");
    CHECK(labelled.same_contents(bank));
    CHECK(labelled.eval_labels()[1] == 7);
    save_bank(labelled, dir / "l2.bin");
    CHECK(testing::read_file(dir / "l.bin") == testing::read_file(dir / "l2.bin"));
  }

  TEST_CASE("corrupt bank files") {
    testing::TempDir dir;
    Rng rng(12);
    save_bank(testing::random_bank(rng, 3, 4), dir / "b.bin");
    const auto bytes = testing::read_file(dir / "b.bin");
    SUBCASE("truncated") {
      write_bytes(dir / "t.bin", bytes.substr(0, bytes.size() - 3));
      CHECK_THROWS_AS(load_bank(dir / "t.bin"), FormatError);
      write_bytes(dir / "h.bin", bytes.substr(0, 6));
      CHECK_THROWS_AS(load_bank(dir / "h.bin"), FormatError);
    }
    SUBCASE("wrong magic") {
      auto bad = bytes;
      bad[0] = 'X';
      write_bytes(dir / "m.bin", bad);
      CHECK_THROWS_AS(load_bank(dir / "m.bin"), FormatError);
    }
    SUBCASE("unsupported version") {
      auto bad = bytes;
      bad[4] = 9;
      write_bytes(dir / "v.bin", bad);
      CHECK_THROWS_AS(load_bank(dir / "v.bin"), FormatError);
    }
    SUBCASE("trailing bytes") {
      write_bytes(dir / "x.bin", bytes + "zz");
      CHECK_THROWS_AS(load_bank(dir / "x.bin"), FormatError);
    }
    SUBCASE("missing file") {
      CHECK_THROWS_AS(load_bank(dir / "none.bin"), IoError);
    }
  }
}
