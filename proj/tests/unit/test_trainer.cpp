#include <doctest.h>

#include <cmath>
#include <sstream>

#include "laggre/error.hpp"
#include "laggre/eval.hpp"
#include "laggre/rng.hpp"
#include "laggre/trainer.hpp"
#include "support/oracles.hpp"

using namespace laggre;
using testing::Rng;

namespace {

Dataset small_data(std::uint64_t seed = 1) {
  GenerateOptions o;
  o.classes = 3;
  o.per_class = 30;
  o.input_dim = 8;
  o.seed = seed;
  return generate_dataset(o);
}

TrainConfig small_config() {
  TrainConfig c;
  c.D = 4;
  c.hidden = {8};
  c.k = 8;
  c.H = 2;
  c.m = 3;
  c.batch_size = 16;
  c.epochs = 3;
  c.warm_start_epochs = 1;
  c.knn_k = 5;
  c.density_local = 3;
  c.density_low = 10;
  c.density_high = 40;
  c.record_wallclock = false;
  c.workers = 1;
  c.seed = 7;
  return c;
}

std::string telemetry_text(const TrainTelemetry& t) {
  std::ostringstream out;
  write_telemetry_csv(t, out);
  return out.str();
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("zero epochs returns the initial state") {
    const auto data = small_data();
    auto c = small_config();
    c.epochs = 0;
    c.warm_start_epochs = 0;
    const auto r = train(data, c);
    CHECK_FALSE(r.telemetry.baseline);
    CHECK(r.telemetry.epochs.empty());
    const std::vector<std::size_t> hidden{8};
    CHECK(r.encoder == EncoderParams::init(8, hidden, 4, derive_seed(7, {1})));
    auto init_bank = MemoryBank::init_random(r.split.train.size(), 4, derive_seed(7, {2}));
    init_bank.set_eval_labels(std::vector<std::uint32_t>(r.bank.eval_labels().begin(), r.bank.eval_labels().end()));
    CHECK(r.bank.same_contents(init_bank));
  }

  TEST_CASE("lr = 0 keeps parameters and folds fixed features into the bank") {
    const auto data = small_data();
    auto c = small_config();
    c.lr = 0.0;
    c.epochs = 2;
    const auto r = train(data, c);
    const std::vector<std::size_t> hidden{8};
    const auto init = EncoderParams::init(8, hidden, 4, derive_seed(7, {1}));
    CHECK(r.encoder == init);
    const auto bank0 = MemoryBank::init_random(r.split.train.size(), 4, derive_seed(7, {2}));
    for (std::size_t i = 0; i < r.split.train.size(); ++i) {
      const auto f = testing::values(normalize(encode(init, data.row_values(r.split.train[i]))));
      auto row = bank0.row_values(i);
      for (int epoch = 0; epoch < 2; ++epoch) {
        double n = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          row[k] = 0.5 * row[k] + 0.5 * f[k];
          n += row[k] * row[k];
        }
        for (auto& x : row) x /= std::sqrt(n);
      }
      for (std::size_t k = 0; k < 4; ++k) CHECK(r.bank.row(i)[k] == doctest::Approx(row[k]).epsilon(1e-6));
    }
  }

  TEST_CASE("telemetry tags phases at the warm-start boundary") {
    const auto data = small_data();
    auto c = small_config();
    c.epochs = 4;
    c.warm_start_epochs = 2;
    const auto r = train(data, c);
    REQUIRE(r.telemetry.baseline);
    CHECK(r.telemetry.baseline->epoch == 0);
    CHECK(r.telemetry.baseline->phase == Phase::Init);
    REQUIRE(r.telemetry.epochs.size() == 4);
    for (std::size_t e = 0; e < 4; ++e) {
      CHECK(r.telemetry.epochs[e].epoch == e + 1);
      CHECK(r.telemetry.epochs[e].phase == (e < 2 ? Phase::InstanceRecognition : Phase::LocalAggregation));
      CHECK(r.telemetry.epochs[e].skipped == 0);
      CHECK(std::isfinite(r.telemetry.epochs[e].mean_loss));
      CHECK(r.telemetry.epochs[e].seconds == 0.0);
    }
    CHECK(r.telemetry.reclusterings == 2);
    REQUIRE(r.ensemble);
    CHECK(r.ensemble->size() == 2);
    const auto text = telemetry_text(r.telemetry);
    CHECK(text.rfind("epoch,phase,mean_loss,skipped,knn_acc,local_density,background_density,seconds\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 6);
    CHECK(text.find("\n0,init,") != std::string::npos);
    CHECK(text.find("\n2,ir,") != std::string::npos);
    CHECK(text.find("\n3,la,") != std::string::npos);
  }

  TEST_CASE("runs are reproducible and independent of the worker count") {
    const auto data = small_data(3);
    auto c = small_config();
    const auto a = train(data, c);
    const auto b = train(data, c);
    c.workers = 3;
    const auto w = train(data, c);
    CHECK(telemetry_text(a.telemetry) == telemetry_text(b.telemetry));
    CHECK(telemetry_text(a.telemetry) == telemetry_text(w.telemetry));
    CHECK(a.encoder == b.encoder);
    CHECK(a.encoder == w.encoder);
    CHECK(a.bank.same_contents(w.bank));
  }

  TEST_CASE("step-based reclustering and fresh-forward source") {
    const auto data = small_data();
    auto c = small_config();
    c.recluster_unit = ReclusterUnit::Step;
    c.recluster_every = 2;
    c.cluster_source = ClusterSource::FreshForward;
    const auto r = train(data, c);
    // 81 training rows, batch 16 -> 6 steps per epoch, two LA epochs -> 12 steps
    CHECK(r.telemetry.reclusterings == 6);
  }

  TEST_CASE("every ablation mode trains") {
    const auto data = small_data();
    for (auto bg : {BackgroundMode::All, BackgroundMode::Cluster, BackgroundMode::Knn})
      for (auto cl : {CloseMode::Self, CloseMode::KnnClose, CloseMode::Ensemble}) {
        auto c = small_config();
        c.background_mode = bg;
        c.close_mode = cl;
        c.background_H = 2;
        const auto r = train(data, c);
        CHECK(r.telemetry.epochs.size() == 3);
        for (const auto& e : r.telemetry.epochs) CHECK(std::isfinite(e.knn_acc));
      }
  }

  TEST_CASE("invalid configurations are rejected") {
    const auto data = small_data();
    auto c = small_config();
    c.warm_start_epochs = 3;
    CHECK_THROWS_AS(train(data, c), ConfigError);
    c = small_config();
    c.m = 1000;
    CHECK_THROWS_AS(train(data, c), ConfigError);
  }

  TEST_CASE("learning rate milestones") {
    TrainConfig c;
    c.lr = 0.1;
    c.lr_milestones = {3, 5};
    c.lr_decay = 0.5;
    CHECK(learning_rate_at(c, 0) == 0.1);
    CHECK(learning_rate_at(c, 2) == 0.1);
    CHECK(learning_rate_at(c, 3) == doctest::Approx(0.05));
    CHECK(learning_rate_at(c, 5) == doctest::Approx(0.025));
  }

  TEST_CASE("recluster") {
    Rng rng(60);
    std::vector<std::uint32_t> truth;
    const auto bank = testing::blob_bank(rng, testing::axis_centers(3, 3), 50, 0.05, truth);
    const auto one = recluster(bank, 1, 3, 9, 0, 100, 1);
    CHECK(one.size() == 1);
    const auto a = recluster(bank, 3, 3, 9, 4, 100, 1);
    const auto b = recluster(bank, 3, 3, 9, 4, 100, 2);
    CHECK(a.same_partitions(b));
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(adjusted_rand_index(a[j].assignment, truth) == doctest::Approx(1.0));
    // members are seeded independently
    CHECK(a.seeds()[0] != a.seeds()[1]);
    CHECK(recluster(bank, 3, 3, 9, 5, 100, 1).seeds()[0] != a.seeds()[0]);
    CHECK_THROWS_AS(recluster(bank, 0, 3, 9, 0, 100, 1), ConfigError);
  }

  TEST_CASE("ablation grid") {
    const auto data = small_data();
    const auto base = small_config();
    SUBCASE("a single cell reproduces train") {
      AblationGrid grid;
      const auto rows = run_ablation_grid(data, base, grid);
      REQUIRE(rows.size() == 1);
      CHECK(rows[0].status == "ok");
      CHECK(rows[0].knn_acc == train(data, base).telemetry.epochs.back().knn_acc);
      CHECK(rows[0].variant == "KNN/ENSEMBLE/2x3/s7");
    }
    SUBCASE("close-mode grid") {
      AblationGrid grid;
      grid.closes = {CloseMode::Self, CloseMode::Ensemble};
      grid.seeds = {1, 2};
      const auto rows = run_ablation_grid(data, base, grid);
      REQUIRE(rows.size() == 4);
      std::size_t ensemble_rows = 0;
      for (const auto& r : rows) ensemble_rows += r.cell.close == CloseMode::Ensemble;
      CHECK(ensemble_rows == 2);
      std::ostringstream out;
      write_ablation_csv(rows, out);
      CHECK(out.str().rfind("variant,background_mode,close_mode,H,m,seed,knn_acc,status\n", 0) == 0);
    }
    SUBCASE("failing cells are reported, not thrown") {
      AblationGrid grid;
      grid.hm = {{2, 3}, {2, 5000}};
      const auto rows = run_ablation_grid(data, base, grid);
      REQUIRE(rows.size() == 2);
      CHECK(rows[0].status == "ok");
      CHECK(rows[1].status != "ok");
      CHECK(std::isnan(rows[1].knn_acc));
    }
  }

  TEST_CASE("training without labels skips kNN telemetry") {
    auto data = small_data();
    data.labels.reset();
    const auto r = train(data, small_config());
    CHECK(std::isnan(r.telemetry.epochs.back().knn_acc));
    CHECK_FALSE(r.bank.has_eval_labels());
    CHECK(telemetry_text(r.telemetry).find(",nan,") != std::string::npos);
  }
}
