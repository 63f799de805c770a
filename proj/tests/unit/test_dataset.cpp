#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "laggre/dataset.hpp"
#include "laggre/error.hpp"
#include "support/oracles.hpp"

using namespace laggre;

TEST_SUITE("dataset") {
  TEST_CASE("two noiseless points") {
    GenerateOptions o;
    o.classes = 2;
    o.per_class = 1;
    o.noise_sigma = 0.0;
    o.seed = 3;
    const auto d = generate_dataset(o);
    CHECK(d.n == 2);
    CHECK(d.input_dim == 64);
    REQUIRE(d.labels);
    CHECK((*d.labels)[0] != (*d.labels)[1]);
  }

  TEST_CASE("generation is deterministic and stored class by class") {
    GenerateOptions o;
    o.classes = 4;
    o.per_class = 25;
    o.seed = 17;
    const auto a = generate_dataset(o);
    const auto b = generate_dataset(o);
    CHECK(a.same_contents(b));
    for (std::size_t i = 0; i < a.n; ++i) CHECK((*a.labels)[i] == i / 25);
    o.seed = 18;
    CHECK_FALSE(a.same_contents(generate_dataset(o)));
    testing::TempDir dir;
    save_dataset(a, dir / "a.bin");
    save_dataset(b, dir / "b.bin");
    CHECK(testing::read_file(dir / "a.bin") == testing::read_file(dir / "b.bin"));
  }

  TEST_CASE("class centres respect the separation angle") {
    GenerateOptions o;
    o.classes = 10;
    o.seed = 5;
    const auto d = generate_dataset(o);
    REQUIRE(d.generator);
    const auto& g = *d.generator;
    CHECK(g.min_angle == doctest::Approx(std::numbers::pi / 10));
    for (std::size_t a = 0; a < 10; ++a)
      for (std::size_t b = a + 1; b < 10; ++b) {
        const double c = g.centers[a * 2] * g.centers[b * 2] + g.centers[a * 2 + 1] * g.centers[b * 2 + 1];
        CHECK(std::acos(std::clamp(c, -1.0, 1.0)) >= g.min_angle - 1e-12);
      }
  }

  TEST_CASE("latent 1-NN separates the default toy classes") {
    GenerateOptions o;
    o.seed = 1;
    const auto d = generate_dataset(o);
    const auto& z = d.generator->latent;
    const auto& y = *d.labels;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
      double best = 1e300;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < d.n; ++j) {
        if (j == i) continue;
        const double dist = std::pow(z[2 * i] - z[2 * j], 2) + std::pow(z[2 * i + 1] - z[2 * j + 1], 2);
        if (dist < best) best = dist, arg = j;
      }
      correct += y[arg] == y[i];
    }
    CHECK(static_cast<double>(correct) / d.n >= 0.99);
  }

  TEST_CASE("infeasible separation is a config error") {
    GenerateOptions o;
    o.classes = 5;
    o.per_class = 1;
    o.min_angle = 3.0;
    CHECK_THROWS_AS(generate_dataset(o), ConfigError);
  }

  TEST_CASE("invalid options") {
    GenerateOptions o;
    o.classes = 1;
    CHECK_THROWS_AS(generate_dataset(o), ConfigError);
    o = {};
    o.input_dim = 1;
    CHECK_THROWS_AS(generate_dataset(o), ConfigError);
    o = {};
    o.noise_sigma = -1;
    CHECK_THROWS_AS(generate_dataset(o), ConfigError);
  }

  TEST_CASE("file round trip") {
    testing::TempDir dir;
    GenerateOptions o;
    o.classes = 3;
    o.per_class = 7;
    o.input_dim = 5;
    const auto d = generate_dataset(o);
    save_dataset(d, dir / "d.bin");
    const auto back = load_dataset(dir / "d.bin");
    CHECK(back.same_contents(d));
    CHECK_FALSE(back.generator);
    save_dataset(back, dir / "d2.bin");
    CHECK(testing::read_file(dir / "d.bin") == testing::read_file(dir / "d2.bin"));

    Dataset unlabeled = back;
    unlabeled.labels.reset();
    save_dataset(unlabeled, dir / "u.bin");
    CHECK_FALSE(load_dataset(dir / "u.bin").labels);

    auto bytes = testing::read_file(dir / "d.bin");
    {
      std::ofstream out(dir / "t.bin", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 4));
    }
    CHECK_THROWS_AS(load_dataset(dir / "t.bin"), FormatError);
    bytes[3] = '?';
    {
      std::ofstream out(dir / "m.bin", std::ios::binary);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_AS(load_dataset(dir / "m.bin"), FormatError);
    CHECK_THROWS_AS(load_dataset(dir / "missing.bin"), IoError);
  }

  TEST_CASE("train/validation split") {
    const auto s = split_train_validation(100, 0.1, 4);
    CHECK(s.validation.size() == 10);
    CHECK(s.train.size() == 90);
    CHECK(std::is_sorted(s.train.begin(), s.train.end()));
    CHECK(std::is_sorted(s.validation.begin(), s.validation.end()));
    std::set<std::uint32_t> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    CHECK(all.size() == 100);
    const auto again = split_train_validation(100, 0.1, 4);
    CHECK(again.train == s.train);
    CHECK(split_train_validation(100, 0.1, 5).validation != s.validation);
    CHECK(split_train_validation(10, 0.0, 1).validation.empty());
    CHECK_THROWS_AS(split_train_validation(10, 1.0, 1), ConfigError);
  }
}
