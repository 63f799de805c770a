#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "laggre/dataset.hpp"
#include "laggre/encoder.hpp"
#include "laggre/memory_bank.hpp"
#include "support/oracles.hpp"

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = laggre::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kSmallConfig = R"(D = 4
hidden = 8
k = 8
H = 2
m = 3
batch_size = 16
epochs = 3
warm_start_epochs = 1
knn_k = 5
density_local = 3
density_low = 10
density_high = 40
record_wallclock = false
)";

std::string last_csv_field(const std::string& csv, std::size_t column) {
  std::istringstream in(csv);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  std::istringstream row(last);
  std::string field;
  for (std::size_t c = 0; c <= column; ++c) std::getline(row, field, ',');
  return field;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors") {
    const auto none = run({});
    CHECK(none.code == laggre::cli::kExitUsage);
    CHECK(none.err.find("usage: laggre") != std::string::npos);
    CHECK(run({"frobnicate"}).code == laggre::cli::kExitUsage);
    CHECK(run({"gen-data"}).code == laggre::cli::kExitUsage);  // --out is required
    CHECK(run({"train", "--data"}).code == laggre::cli::kExitUsage);
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("gen-data") != std::string::npos);
  }

  TEST_CASE("missing config file is a runtime error") {
    testing::TempDir dir;
    CHECK(run({"gen-data", "--classes", "3", "--per-class", "30", "--input-dim", "8", "--out", (dir / "d.bin").string()})
              .code == 0);
    const auto r = run({"train", "--data", (dir / "d.bin").string(), "--config", (dir / "c.txt").string()});
    CHECK(r.code == laggre::cli::kExitRuntime);
    CHECK(r.err.find("c.txt") != std::string::npos);
  }

  TEST_CASE("gen-data is deterministic") {
    testing::TempDir dir;
    for (const char* name : {"a.bin", "b.bin"})
      REQUIRE(run({"gen-data", "--classes", "2", "--per-class", "1", "--noise", "0", "--seed", "4", "--out",
                   (dir / name).string()})
                  .code == 0);
    CHECK(testing::read_file(dir / "a.bin") == testing::read_file(dir / "b.bin"));
    const auto d = laggre::load_dataset(dir / "a.bin");
    CHECK(d.n == 2);
    CHECK((*d.labels)[0] != (*d.labels)[1]);
    CHECK(run({"gen-data", "--classes", "5", "--min-angle", "170", "--out", (dir / "x.bin").string()}).code ==
          laggre::cli::kExitRuntime);
  }

  TEST_CASE("train then evaluate reproduces the telemetry accuracy") {
    testing::TempDir dir;
    const auto p = [&](const char* n) { return (dir / n).string(); };
    write_text(dir / "c.txt", kSmallConfig);
    REQUIRE(run({"gen-data", "--classes", "3", "--per-class", "30", "--input-dim", "8", "--seed", "2", "--out",
                 p("d.bin")})
                .code == 0);
    const auto tr = run({"train", "--data", p("d.bin"), "--config", p("c.txt"), "--seed", "5", "--bank", p("b.bin"),
                         "--encoder", p("e.bin"), "--out", p("t.csv"), "--clusters", p("cl.bin"), "--split",
                         p("split.csv"), "--workers", "2"});
    REQUIRE(tr.code == 0);
    const auto telemetry = testing::read_file(dir / "t.csv");
    CHECK(std::count(telemetry.begin(), telemetry.end(), '\n') == 5);
    CHECK(std::filesystem::exists(dir / "cl.bin"));
    const auto split = testing::read_file(dir / "split.csv");
    CHECK(split.rfind("index,role\n", 0) == 0);
    CHECK(std::count(split.begin(), split.end(), '\n') == 91);

    const auto ev = run({"eval-knn", "--data", p("d.bin"), "--bank", p("b.bin"), "--encoder", p("e.bin"), "--config",
                         p("c.txt"), "--seed", "5", "--out", p("knn.csv")});
    REQUIRE(ev.code == 0);
    const auto report = testing::read_file(dir / "knn.csv");
    CHECK(report.rfind("K,tau,queries,accuracy\n", 0) == 0);
    CHECK(last_csv_field(report, 3) == last_csv_field(telemetry, 4));

    // same flags, same files
    REQUIRE(run({"train", "--data", p("d.bin"), "--config", p("c.txt"), "--seed", "5", "--bank", p("b2.bin"), "--out",
                 p("t2.csv")})
                .code == 0);
    CHECK(testing::read_file(dir / "t2.csv") == telemetry);
    CHECK(testing::read_file(dir / "b2.bin") == testing::read_file(dir / "b.bin"));

    const auto pr = run({"probe", "--data", p("d.bin"), "--encoder", p("e.bin"), "--config", p("c.txt"), "--seed", "5",
                         "--epochs", "20", "--out", p("probe.csv")});
    CHECK(pr.code == 0);
    CHECK(testing::read_file(dir / "probe.csv").rfind("train_points,test_points,epochs,lr,accuracy\n", 0) == 0);

    const auto de = run({"density", "--bank", p("b.bin"), "--local", "3", "--low", "10", "--high", "40", "--out",
                         p("dens.csv"), "--hist", p("hist.csv")});
    CHECK(de.code == 0);
    CHECK(testing::read_file(dir / "dens.csv").rfind("index,local_density,background_density\n", 0) == 0);
    CHECK(testing::read_file(dir / "hist.csv").rfind("bin_left,bin_right,local_count,background_count\n", 0) == 0);
    CHECK(run({"density", "--bank", p("b.bin"), "--local", "3", "--low", "10", "--high", "500"}).code ==
          laggre::cli::kExitRuntime);
  }

  TEST_CASE("ablate writes one row per cell") {
    testing::TempDir dir;
    const auto p = [&](const char* n) { return (dir / n).string(); };
    write_text(dir / "c.txt", kSmallConfig);
    REQUIRE(run({"gen-data", "--classes", "3", "--per-class", "30", "--input-dim", "8", "--out", p("d.bin")}).code == 0);
    const auto r = run({"ablate", "--data", p("d.bin"), "--config", p("c.txt"), "--background", "ALL,KNN", "--close",
                        "SELF,ENSEMBLE", "--hm", "2x3", "--seeds", "1", "--out", p("a.csv")});
    REQUIRE(r.code == 0);
    const auto csv = testing::read_file(dir / "a.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("KNN/ENSEMBLE/2x3/s1,KNN,ENSEMBLE,2,3,1,") != std::string::npos);
    CHECK(run({"ablate", "--data", p("d.bin"), "--hm", "3by3"}).code == laggre::cli::kExitRuntime);
    CHECK(run({"ablate", "--data", p("d.bin"), "--close", "NEAREST"}).code == laggre::cli::kExitRuntime);
  }

  TEST_CASE("gradcheck passes") {
    const auto r = run({"gradcheck", "--trials", "100"});
    CHECK(r.code == 0);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("max_rel_err") != std::string::npos);
  }
}
