#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "laggre/config.hpp"
#include "laggre/dataset.hpp"
#include "laggre/encoder.hpp"
#include "laggre/error.hpp"
#include "laggre/eval.hpp"
#include "laggre/gradcheck.hpp"
#include "laggre/kmeans.hpp"
#include "laggre/memory_bank.hpp"
#include "laggre/parallel.hpp"
#include "laggre/trainer.hpp"

namespace laggre::cli {

namespace {

constexpr const char* kSynopsis =
    "usage: laggre <subcommand> [options]\n"
    "subcommands: gen-data, train, eval-knn, probe, density, ablate, gradcheck\n"
    "run 'laggre <subcommand> --help' for options\n";

struct GenDataArgs {
  GenerateOptions gen;
  double min_angle_deg = 0.0;
  std::string out;
};

struct TrainArgs {
  std::string data, config, bank, encoder, out, clusters, split;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

struct EvalArgs {
  std::string data, config, bank, encoder, out;
  std::optional<std::uint64_t> seed;
  std::size_t k = 0;
  std::optional<double> tau;
  std::optional<unsigned> workers;
};

struct ProbeArgs {
  std::string data, config, encoder, out;
  std::optional<std::uint64_t> seed;
  ProbeOptions probe;
  std::optional<unsigned> workers;
};

struct DensityArgs {
  std::string bank, out, hist;
  std::size_t local = 0, low = 0, high = 0;
  std::optional<unsigned> workers;
};

struct AblateArgs {
  std::string data, config, out;
  std::string backgrounds, closes, hm, seeds;
  std::optional<unsigned> workers;
};

struct GradcheckArgs {
  GradcheckOptions options;
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw ConfigError("expected an unsigned integer, got '" + s + "'");
  return v;
}

TrainConfig config_from(const std::string& path, const std::optional<std::uint64_t>& seed,
                        const std::optional<unsigned>& workers) {
  TrainConfig config = path.empty() ? TrainConfig{} : load_config(path);
  if (seed) config.seed = *seed;
  if (workers) config.workers = *workers;
  return config;
}

int run_gen_data(const GenDataArgs& a, std::ostream& out) {
  GenerateOptions gen = a.gen;
  gen.min_angle = a.min_angle_deg * std::numbers::pi / 180.0;
  const auto data = generate_dataset(gen);
  save_dataset(data, a.out);
  fmt::print(out, "wrote {} samples ({} classes, input_dim {}) to {}\n", data.n, gen.classes, data.input_dim, a.out);
  return kExitOk;
}

void write_split_csv(const DataSplit& split, std::size_t n, const std::string& path) {
  std::vector<const char*> role(n, "train");
  for (auto r : split.validation) role[r] = "validation";
  std::ofstream csv(path);
  if (!csv) throw IoError("cannot write '" + path + "'");
  csv << "index,role\n";
  for (std::size_t i = 0; i < n; ++i) csv << i << ',' << role[i] << '\n';
}

int run_train(const TrainArgs& a, std::ostream& out) {
  const auto config = config_from(a.config, a.seed, a.workers);
  const auto data = load_dataset(a.data);
  const auto result = train(data, config);
  if (!a.bank.empty()) save_bank(result.bank, a.bank);
  if (!a.encoder.empty()) save_encoder(result.encoder, a.encoder);
  if (!a.out.empty()) write_telemetry_csv(result.telemetry, std::filesystem::path(a.out));
  if (!a.clusters.empty() && result.ensemble) save_ensemble(*result.ensemble, a.clusters);
  if (!a.split.empty()) write_split_csv(result.split, data.n, a.split);
  if (result.telemetry.epochs.empty()) {
    fmt::print(out, "no epochs run\n");
  } else {
    const auto& last = result.telemetry.epochs.back();
    fmt::print(out, "epochs={} final_loss={:.6f} knn_acc={:.6f} local_density={:.6f} background_density={:.6f}\n",
               last.epoch, last.mean_loss, last.knn_acc, last.local_density, last.background_density);
  }
  return kExitOk;
}

int run_eval_knn(const EvalArgs& a, std::ostream& out) {
  const auto config = config_from(a.config, a.seed, a.workers);
  const auto data = load_dataset(a.data);
  const auto bank = load_bank(a.bank);
  const auto encoder = load_encoder(a.encoder);
  const auto split = split_train_validation(data.n, config.val_fraction, config.seed);
  if (split.train.size() != bank.size())
    throw ShapeMismatch("bank has " + std::to_string(bank.size()) + " rows but the split has " +
                        std::to_string(split.train.size()) + " training samples");
  const auto resolved = config.resolve(bank.size());
  const std::size_t K = a.k > 0 ? a.k : resolved.knn_k;
  const Temperature tau(a.tau.value_or(resolved.tau));
  const auto val = validation_set(data, split);
  const double acc = knn_accuracy(encoder, bank, val.inputs, val.labels, K, tau, resolve_workers(resolved.workers));
  fmt::print(out, "knn_acc={:.17g} K={} tau={} queries={}\n", acc, K, tau.value(), val.labels.size());
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw IoError("cannot write '" + a.out + "'");
    csv << "K,tau,queries,accuracy\n";
    csv << fmt::format("{},{:.17g},{},{:.17g}\n", K, tau.value(), val.labels.size(), acc);
  }
  return kExitOk;
}

int run_probe(const ProbeArgs& a, std::ostream& out) {
  const auto config = config_from(a.config, a.seed, a.workers);
  const auto data = load_dataset(a.data);
  if (!data.labels) throw MissingLabels("dataset carries no labels");
  const auto encoder = load_encoder(a.encoder);
  const auto split = split_train_validation(data.n, config.val_fraction, config.seed);
  const unsigned workers = resolve_workers(config.workers);
  auto gather = [&](const std::vector<std::uint32_t>& rows, std::vector<std::uint32_t>& labels) {
    std::vector<double> x;
    for (auto r : rows) {
      const auto v = data.row(r);
      x.insert(x.end(), v.begin(), v.end());
      labels.push_back((*data.labels)[r]);
    }
    return embed_all(encoder, x, workers);
  };
  std::vector<std::uint32_t> train_labels, test_labels;
  const auto train_emb = gather(split.train, train_labels);
  const auto test_emb = gather(split.validation, test_labels);
  ProbeOptions probe = a.probe;
  probe.seed = config.seed;
  const double acc = linear_probe(train_emb, train_labels, test_emb, test_labels, probe);
  fmt::print(out, "probe_acc={:.17g} train={} test={}\n", acc, train_emb.size(), test_emb.size());
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw IoError("cannot write '" + a.out + "'");
    csv << "train_points,test_points,epochs,lr,accuracy\n";
    csv << fmt::format("{},{},{},{:.17g},{:.17g}\n", train_emb.size(), test_emb.size(), probe.epochs, probe.lr, acc);
  }
  return kExitOk;
}

int run_density(const DensityArgs& a, std::ostream& out) {
  const auto bank = load_bank(a.bank);
  TrainConfig defaults;
  defaults.density_local = a.local;
  defaults.density_low = a.low;
  defaults.density_high = a.high;
  const auto r = defaults.resolve(bank.size());
  const auto profile = density_profile(bank, r.density_local, r.density_low, r.density_high,
                                       resolve_workers(a.workers.value_or(0)));
  if (!a.out.empty()) write_density_csv(profile, a.out);
  if (!a.hist.empty()) write_histogram_csv(profile, a.hist);
  fmt::print(out, "mean_local={:.17g} mean_background={:.17g} local_rank={} band={}-{}\n", profile.mean_local,
             profile.mean_background, profile.local_rank, profile.band_low, profile.band_high);
  return kExitOk;
}

int run_ablate(const AblateArgs& a, std::ostream& out) {
  const auto base = config_from(a.config, std::nullopt, a.workers);
  const auto data = load_dataset(a.data);
  AblationGrid grid;
  for (const auto& s : split_list(a.backgrounds)) grid.backgrounds.push_back(parse_background_mode(s));
  for (const auto& s : split_list(a.closes)) grid.closes.push_back(parse_close_mode(s));
  for (const auto& s : split_list(a.hm)) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ConfigError("--hm entries look like HxM, got '" + s + "'");
    grid.hm.emplace_back(parse_u64(s.substr(0, x)), parse_u64(s.substr(x + 1)));
  }
  for (const auto& s : split_list(a.seeds)) grid.seeds.push_back(parse_u64(s));
  const auto rows = run_ablation_grid(data, base, grid);
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw IoError("cannot write '" + a.out + "'");
    write_ablation_csv(rows, csv);
  }
  write_ablation_csv(rows, out);
  return kExitOk;
}

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto entries = run_gradient_checks(a.options);
  bool ok = true;
  for (const auto& e : entries) {
    fmt::print(out, "{:<16} trials={} coords={} skipped={} max_rel_err={:.3e} threshold={:.0e} {}\n", e.name,
               e.report.trials, e.report.coordinates, e.report.skipped, e.report.max_rel_error, e.threshold,
               e.passed() ? "PASS" : "FAIL");
    ok = ok && e.passed();
  }
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << kSynopsis;
    return kExitUsage;
  }

  CLI::App app{"Local aggregation embedding trainer", "laggre"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic clustered dataset");
  gen_cmd->add_option("--classes", gen.gen.classes, "Number of classes")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.gen.per_class, "Samples per class")->capture_default_str();
  gen_cmd->add_option("--latent-dim", gen.gen.latent_dim, "Latent sphere dimension")->capture_default_str();
  gen_cmd->add_option("--input-dim", gen.gen.input_dim, "Lifted input dimension")->capture_default_str();
  gen_cmd->add_option("--noise", gen.gen.noise_sigma, "Latent Gaussian noise sigma")->capture_default_str();
  gen_cmd->add_option("--min-angle", gen.min_angle_deg, "Minimum centre separation in degrees (0 = auto)");
  gen_cmd->add_option("--seed", gen.gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train an encoder and memory bank");
  train_cmd->add_option("--data", tr.data, "Dataset file")->required();
  train_cmd->add_option("--config", tr.config, "Config file (key = value lines)");
  train_cmd->add_option("--seed", tr.seed, "Override the config seed");
  train_cmd->add_option("--bank", tr.bank, "Output memory bank file");
  train_cmd->add_option("--encoder", tr.encoder, "Output encoder checkpoint");
  train_cmd->add_option("--out", tr.out, "Output telemetry CSV");
  train_cmd->add_option("--clusters", tr.clusters, "Output clustering ensemble file");
  train_cmd->add_option("--split", tr.split, "Output CSV of the train/validation split");
  train_cmd->add_option("--workers", tr.workers, "Worker threads (default LAGGRE_WORKERS or all cores)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval-knn", "Weighted kNN accuracy on the validation split");
  eval_cmd->add_option("--data", ev.data, "Dataset file")->required();
  eval_cmd->add_option("--bank", ev.bank, "Memory bank file with labels")->required();
  eval_cmd->add_option("--encoder", ev.encoder, "Encoder checkpoint")->required();
  eval_cmd->add_option("--config", ev.config, "Config used for training (split seed, tau, K)");
  eval_cmd->add_option("--seed", ev.seed, "Split seed override");
  eval_cmd->add_option("--k", ev.k, "Neighbors K (0 = config/auto)");
  eval_cmd->add_option("--tau", ev.tau, "Temperature override");
  eval_cmd->add_option("--out", ev.out, "Output accuracy CSV");
  eval_cmd->add_option("--workers", ev.workers, "Worker threads");

  ProbeArgs pr;
  auto* probe_cmd = app.add_subcommand("probe", "Linear readout accuracy on frozen embeddings");
  probe_cmd->add_option("--data", pr.data, "Dataset file")->required();
  probe_cmd->add_option("--encoder", pr.encoder, "Encoder checkpoint")->required();
  probe_cmd->add_option("--config", pr.config, "Config used for training (split seed)");
  probe_cmd->add_option("--seed", pr.seed, "Split seed override");
  probe_cmd->add_option("--epochs", pr.probe.epochs, "Probe epochs")->capture_default_str();
  probe_cmd->add_option("--lr", pr.probe.lr, "Probe learning rate")->capture_default_str();
  probe_cmd->add_option("--out", pr.out, "Output accuracy CSV");
  probe_cmd->add_option("--workers", pr.workers, "Worker threads");

  DensityArgs de;
  auto* density_cmd = app.add_subcommand("density", "Local and background density profile of a bank");
  density_cmd->add_option("--bank", de.bank, "Memory bank file")->required();
  density_cmd->add_option("--local", de.local, "Top-neighbor rank for local density (0 = auto)");
  density_cmd->add_option("--low", de.low, "First rank of the background band (0 = auto)");
  density_cmd->add_option("--high", de.high, "Last rank of the background band (0 = auto)");
  density_cmd->add_option("--out", de.out, "Per-row density CSV");
  density_cmd->add_option("--hist", de.hist, "Histogram CSV");
  density_cmd->add_option("--workers", de.workers, "Worker threads");

  AblateArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train a grid of neighbor-procedure variants");
  ablate_cmd->add_option("--data", ab.data, "Dataset file")->required();
  ablate_cmd->add_option("--config", ab.config, "Base config file");
  ablate_cmd->add_option("--background", ab.backgrounds, "Comma list of ALL, CLUSTER, KNN");
  ablate_cmd->add_option("--close", ab.closes, "Comma list of SELF, KNN_CLOSE, ENSEMBLE");
  ablate_cmd->add_option("--hm", ab.hm, "Comma list of HxM ensemble shapes, e.g. 1x20,3x20");
  ablate_cmd->add_option("--seeds", ab.seeds, "Comma list of seeds");
  ablate_cmd->add_option("--out", ab.out, "Output CSV");
  ablate_cmd->add_option("--workers", ab.workers, "Worker threads");

  GradcheckArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference verification of analytic gradients");
  grad_cmd->add_option("--trials", gc.options.trials, "Random configurations per family")->capture_default_str();
  grad_cmd->add_option("--seed", gc.options.seed, "Seed")->capture_default_str();
  grad_cmd->add_option("--step", gc.options.h_loss, "Step for loss-level checks")->capture_default_str();
  grad_cmd->add_option("--step-encoder", gc.options.h_encoder, "Step for encoder checks")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << kSynopsis;
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen, out);
    if (train_cmd->parsed()) return run_train(tr, out);
    if (eval_cmd->parsed()) return run_eval_knn(ev, out);
    if (probe_cmd->parsed()) return run_probe(pr, out);
    if (density_cmd->parsed()) return run_density(de, out);
    if (ablate_cmd->parsed()) return run_ablate(ab, out);
    if (grad_cmd->parsed()) return run_gradcheck(gc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << kSynopsis;
  return kExitUsage;
}

}  // namespace laggre::cli
