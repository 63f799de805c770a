#include "laggre/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "laggre/error.hpp"
#include "laggre/eval.hpp"
#include "laggre/neighbors.hpp"
#include "laggre/objective.hpp"
#include "laggre/parallel.hpp"
#include "laggre/probability.hpp"
#include "laggre/rng.hpp"

namespace laggre {

namespace {

// Seed-stream tags.
constexpr std::uint64_t kEncoderInitTag = 1;
constexpr std::uint64_t kBankInitTag = 2;
constexpr std::uint64_t kShuffleTag = 3;
constexpr std::uint64_t kCloseEnsembleTag = 4;
constexpr std::uint64_t kBackgroundEnsembleTag = 5;
constexpr std::uint64_t kStepBoundaryOffset = std::uint64_t{1} << 40;

std::vector<double> gather_rows(const Dataset& data, std::span<const std::uint32_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size() * data.input_dim);
  for (auto r : rows) {
    const auto x = data.row(r);
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

struct SampleResult {
  bool usable = false;  // contributed a gradient
  bool has_feature = false;
  double loss = 0.0;
  Embedding feature;
  EncoderParams grads;
};

struct Evaluation {
  double knn_acc = std::numeric_limits<double>::quiet_NaN();
  double local_density = 0.0;
  double background_density = 0.0;
};

class Run {
 public:
  Run(const Dataset& data, const TrainConfig& config) : data_(data) {
    if (data.n < 2) throw ConfigError("training needs at least two samples");
    split_ = split_train_validation(data.n, config.val_fraction, config.seed);
    n_ = split_.train.size();
    cfg_ = config.resolve(n_);
    cfg_.validate(n_);
    workers_ = resolve_workers(cfg_.workers);
    tau_ = Temperature(cfg_.tau);

    train_x_ = gather_rows(data, split_.train);
    if (data.labels && !split_.validation.empty()) {
      val_ = validation_set(data, split_);
    }

    encoder_ = EncoderParams::init(data.input_dim, cfg_.hidden, cfg_.D, derive_seed(cfg_.seed, {kEncoderInitTag}));
    bank_.emplace(MemoryBank::init_random(n_, cfg_.D, derive_seed(cfg_.seed, {kBankInitTag})));
    bank_->set_mix(cfg_.t);
    if (data.labels) {
      std::vector<std::uint32_t> labels;
      labels.reserve(n_);
      for (auto r : split_.train) labels.push_back((*data.labels)[r]);
      bank_->set_eval_labels(std::move(labels));
    }
  }

  TrainResult execute() {
    TrainTelemetry telemetry;
    if (cfg_.epochs > 0) telemetry.baseline = baseline_record();

    auto optimizer = OptimizerState::for_params(encoder_, cfg_.lr, cfg_.momentum, cfg_.lambda);
    std::size_t la_steps = 0;
    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const auto started = std::chrono::steady_clock::now();
      const bool aggregate = epoch >= cfg_.warm_start_epochs;
      optimizer.lr = learning_rate_at(cfg_, epoch);

      if (aggregate && cfg_.recluster_unit == ReclusterUnit::Epoch &&
          (epoch - cfg_.warm_start_epochs) % cfg_.recluster_every == 0) {
        refit_ensembles(epoch);
        ++telemetry.reclusterings;
      }

      std::vector<std::uint32_t> order(n_);
      std::iota(order.begin(), order.end(), 0u);
      Rng rng(derive_seed(cfg_.seed, {kShuffleTag, epoch}));
      std::shuffle(order.begin(), order.end(), rng);

      double loss_sum = 0.0;
      std::size_t loss_count = 0;
      std::size_t skipped = 0;
      for (std::size_t start = 0; start < n_; start += cfg_.batch_size) {
        if (aggregate && cfg_.recluster_unit == ReclusterUnit::Step && la_steps % cfg_.recluster_every == 0) {
          refit_ensembles(kStepBoundaryOffset + la_steps);
          ++telemetry.reclusterings;
        }
        const std::size_t stop = std::min(n_, start + cfg_.batch_size);
        const auto batch = std::span<const std::uint32_t>(order).subspan(start, stop - start);
        const auto step = run_batch(batch, aggregate, optimizer);
        loss_sum += step.loss_sum;
        loss_count += step.used;
        skipped += step.skipped;
        if (aggregate) ++la_steps;
      }

      EpochRecord record;
      record.epoch = epoch + 1;
      record.phase = aggregate ? Phase::LocalAggregation : Phase::InstanceRecognition;
      record.mean_loss = loss_count > 0 ? loss_sum / static_cast<double>(loss_count) : 0.0;
      record.skipped = skipped;
      const auto eval = evaluate();
      record.knn_acc = eval.knn_acc;
      record.local_density = eval.local_density;
      record.background_density = eval.background_density;
      if (cfg_.record_wallclock)
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      telemetry.epochs.push_back(record);
    }
    telemetry.degenerate_bank_updates = bank_->degenerate_updates();

    TrainResult result{std::move(encoder_), std::move(*bank_), std::move(telemetry), std::move(split_), cfg_,
                       std::move(close_ensemble_)};
    return result;
  }

 private:
  struct BatchStats {
    double loss_sum = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
  };

  std::span<const double> input(std::size_t r) const {
    return std::span<const double>(train_x_).subspan(r * data_.input_dim, data_.input_dim);
  }

  void refit_ensembles(std::uint64_t boundary) {
    const MemoryBank* source = &*bank_;
    std::optional<MemoryBank> fresh;
    if (cfg_.cluster_source == ClusterSource::FreshForward) {
      fresh.emplace(fresh_forward_snapshot(encoder_, train_x_, workers_));
      source = &*fresh;
    }
    if (cfg_.close_mode == CloseMode::Ensemble)
      close_ensemble_ = recluster(*source, cfg_.H, cfg_.m, derive_seed(cfg_.seed, {kCloseEnsembleTag}), boundary,
                                  cfg_.kmeans_max_iters, workers_);
    if (cfg_.background_mode == BackgroundMode::Cluster)
      background_ensemble_ = recluster(*source, cfg_.background_H, cfg_.background_m,
                                       derive_seed(cfg_.seed, {kBackgroundEnsembleTag}), boundary,
                                       cfg_.kmeans_max_iters, workers_);
  }

  // Loss and gradient of one sample against the current (pre-update) bank.
  SampleResult process_sample(std::uint32_t r, bool aggregate) const {
    SampleResult out;
    auto fwd = forward(encoder_, input(r));
    try {
      out.feature = normalize(fwd.z);
    } catch (const ZeroNorm&) {
      return out;
    }
    out.has_feature = true;
    std::vector<double> sims(n_);
    similarity_row(out.feature.values(), *bank_, sims);

    LossAndGradient lg;
    if (!aggregate) {
      lg = ir_loss_and_grad(r, sims, *bank_, tau_);
    } else {
      NeighborSets sets;
      BackgroundParams params{cfg_.k, background_ensemble_ ? &*background_ensemble_ : nullptr};
      sets.background = background_variant(cfg_.background_mode, r, sims, params);
      sets.close = close_variant(cfg_.close_mode, r, sims, close_ensemble_ ? &*close_ensemble_ : nullptr, cfg_.k_prime);
      try {
        lg = la_loss_and_grad(sims, sets, *bank_, tau_);
      } catch (const EmptyIntersection&) {
        return out;
      }
    }
    out.loss = lg.loss.value;
    out.grads = backward(encoder_, fwd.cache, chain_through_normalize(lg.grad, fwd.z));
    out.usable = true;
    return out;
  }

  BatchStats run_batch(std::span<const std::uint32_t> batch, bool aggregate, OptimizerState& optimizer) {
    std::vector<SampleResult> results(batch.size());
    parallel_for(batch.size(), workers_, [&](std::size_t s) { results[s] = process_sample(batch[s], aggregate); });

    BatchStats stats;
    for (const auto& res : results) {
      if (res.usable) {
        ++stats.used;
        stats.loss_sum += res.loss;
      } else {
        ++stats.skipped;
      }
    }
    if (stats.used > 0) {
      // Fixed summation order keeps the step independent of the worker count.
      EncoderParams total = encoder_.zeros_like();
      const double scale = 1.0 / static_cast<double>(stats.used);
      for (const auto& res : results)
        if (res.usable) total.add_scaled(res.grads, scale);
      sgd_step(encoder_, total, optimizer);
    }

    // Bank rows change only after the optimizer step.
    std::vector<std::pair<std::uint32_t, const Embedding*>> updates;
    for (std::size_t s = 0; s < batch.size(); ++s)
      if (results[s].has_feature) updates.emplace_back(batch[s], &results[s].feature);
    std::sort(updates.begin(), updates.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<IndexSet::value_type> rows;
    std::vector<Embedding> features;
    rows.reserve(updates.size());
    features.reserve(updates.size());
    for (const auto& [r, f] : updates) {
      rows.push_back(r);
      features.push_back(*f);
    }
    bank_->update_rows(IndexSet::from_sorted(std::move(rows)), features, cfg_.t);
    return stats;
  }

  Evaluation evaluate() const {
    Evaluation e;
    if (val_ && bank_->has_eval_labels()) {
      // Checkpoint precision, so a saved encoder reproduces this number.
      e.knn_acc = knn_accuracy(encoder_.quantized(), *bank_, val_->inputs, val_->labels, cfg_.knn_k, tau_, workers_);
    }
    if (n_ >= 3 && cfg_.density_high <= n_ - 1 && cfg_.density_low < cfg_.density_high) {
      const auto profile = density_profile(*bank_, std::min(cfg_.density_local, n_ - 1), cfg_.density_low,
                                           cfg_.density_high, workers_);
      e.local_density = profile.mean_local;
      e.background_density = profile.mean_background;
    }
    return e;
  }

  EpochRecord baseline_record() const {
    EpochRecord record;
    record.epoch = 0;
    record.phase = Phase::Init;
    std::vector<double> losses(n_);
    parallel_for(n_, workers_, [&](std::size_t r) {
      const auto z = encode(encoder_, input(r));
      try {
        losses[r] = ir_loss(r, normalize(z), *bank_, tau_).value;
      } catch (const ZeroNorm&) {
        losses[r] = std::numeric_limits<double>::quiet_NaN();
      }
    });
    double sum = 0.0;
    std::size_t count = 0;
    for (double l : losses)
      if (!std::isnan(l)) {
        sum += l;
        ++count;
      }
    record.mean_loss = count > 0 ? sum / static_cast<double>(count) : 0.0;
    record.skipped = n_ - count;
    const auto eval = evaluate();
    record.knn_acc = eval.knn_acc;
    record.local_density = eval.local_density;
    record.background_density = eval.background_density;
    return record;
  }

  const Dataset& data_;
  TrainConfig cfg_;
  DataSplit split_;
  std::size_t n_ = 0;
  unsigned workers_ = 1;
  Temperature tau_;
  std::vector<double> train_x_;
  std::optional<ValidationSet> val_;
  EncoderParams encoder_;
  std::optional<MemoryBank> bank_;
  std::optional<ClusteringEnsemble> close_ensemble_;
  std::optional<ClusteringEnsemble> background_ensemble_;
};

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  return fmt::format("{:.17g}", x);
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Init: return "init";
    case Phase::InstanceRecognition: return "ir";
    case Phase::LocalAggregation: return "la";
  }
  return "?";
}

void write_telemetry_csv(const TrainTelemetry& telemetry, std::ostream& out) {
  out << "epoch,phase,mean_loss,skipped,knn_acc,local_density,background_density,seconds\n";
  auto row = [&out](const EpochRecord& r) {
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.epoch, to_string(r.phase), format_real(r.mean_loss), r.skipped,
                       format_real(r.knn_acc), format_real(r.local_density), format_real(r.background_density),
                       format_real(r.seconds));
  };
  if (telemetry.baseline) row(*telemetry.baseline);
  for (const auto& r : telemetry.epochs) row(r);
}

void write_telemetry_csv(const TrainTelemetry& telemetry, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_telemetry_csv(telemetry, out);
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  double lr = config.lr;
  for (auto milestone : config.lr_milestones)
    if (epoch >= milestone) lr *= config.lr_decay;
  return lr;
}

MemoryBank fresh_forward_snapshot(const EncoderParams& encoder, std::span<const double> inputs, unsigned workers) {
  const auto embeddings = embed_all(encoder, inputs, workers);
  return MemoryBank::from_embeddings(embeddings);
}

ClusteringEnsemble recluster(const MemoryBank& snapshot, std::size_t H, std::size_t m, std::uint64_t seed,
                             std::size_t boundary, std::size_t max_iters, unsigned workers) {
  if (H < 1) throw ConfigError("ensemble needs H >= 1");
  std::vector<Clustering> members;
  std::vector<std::uint64_t> seeds;
  members.reserve(H);
  for (std::size_t j = 0; j < H; ++j) {
    KMeansOptions options;
    options.clusters = m;
    options.seed = derive_seed(seed, {boundary, j});
    options.max_iters = max_iters;
    options.workers = workers;
    members.push_back(kmeans_fit(snapshot, options));
    seeds.push_back(options.seed);
  }
  return ClusteringEnsemble(std::move(members), std::move(seeds));
}

ValidationSet validation_set(const Dataset& data, const DataSplit& split) {
  if (!data.labels) throw MissingLabels("dataset carries no labels");
  ValidationSet v;
  v.inputs = gather_rows(data, split.validation);
  v.labels.reserve(split.validation.size());
  for (auto r : split.validation) v.labels.push_back((*data.labels)[r]);
  return v;
}

TrainResult train(const Dataset& data, const TrainConfig& config) { return Run(data, config).execute(); }

std::vector<AblationCell> AblationGrid::cells(const TrainConfig& base) const {
  const auto bgs = backgrounds.empty() ? std::vector<BackgroundMode>{base.background_mode} : backgrounds;
  const auto cls = closes.empty() ? std::vector<CloseMode>{base.close_mode} : closes;
  const auto hms = hm.empty() ? std::vector<std::pair<std::size_t, std::size_t>>{{base.H, base.m}} : hm;
  const auto sds = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : seeds;
  std::vector<AblationCell> out;
  for (auto b : bgs)
    for (auto c : cls)
      for (const auto& [h, m] : hms)
        for (auto s : sds) out.push_back({b, c, h, m, s});
  return out;
}

std::vector<AblationRow> run_ablation_grid(const Dataset& data, const TrainConfig& base, const AblationGrid& grid) {
  std::vector<AblationRow> rows;
  for (const auto& cell : grid.cells(base)) {
    AblationRow row;
    row.cell = cell;
    row.variant = fmt::format("{}/{}/{}x{}/s{}", to_string(cell.background), to_string(cell.close), cell.H, cell.m,
                              cell.seed);
    TrainConfig config = base;
    config.background_mode = cell.background;
    config.close_mode = cell.close;
    config.H = cell.H;
    config.m = cell.m;
    config.seed = cell.seed;
    try {
      const auto result = train(data, config);
      row.knn_acc = result.telemetry.epochs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                    : result.telemetry.epochs.back().knn_acc;
      row.status = "ok";
    } catch (const std::exception& e) {
      row.knn_acc = std::numeric_limits<double>::quiet_NaN();
      row.status = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "variant,background_mode,close_mode,H,m,seed,knn_acc,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.variant, to_string(r.cell.background), to_string(r.cell.close),
                       r.cell.H, r.cell.m, r.cell.seed, format_real(r.knn_acc), status);
  }
}

}  // namespace laggre
