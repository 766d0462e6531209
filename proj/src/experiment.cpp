#include "sslmatch/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "sslmatch/fixmatch.hpp"
#include "sslmatch/mean_teacher.hpp"
#include "sslmatch/mixmatch.hpp"
#include "sslmatch/optimizer.hpp"
#include "sslmatch/results_store.hpp"
#include "sslmatch/transfer.hpp"

namespace sslmatch {
namespace {

constexpr std::uint64_t kSubsetSalt = 0x73756273;
constexpr std::uint64_t kBatchSalt = 0x62617463;
constexpr std::uint64_t kStepSalt = 0x73746570;

bool finite_loss(const LossBreakdown& loss) {
  return std::isfinite(loss.total) && std::isfinite(loss.supervised) && std::isfinite(loss.unsupervised);
}

TrainResult run_ssl(const TrainConfig& cfg, const DatasetSplits& splits, const RunOptions& options) {
  if (splits.validation.empty()) {
    throw Error("run_training: validation split is empty, best-epoch selection is undefined");
  }
  const int classes = splits.num_classes();
  const int channels = splits.train_labeled.front().image.channels;
  auto model = build_backbone(cfg.model, classes, channels, cfg.seed);

  OptimizerConfig opt;
  opt.kind = cfg.optimizer;
  opt.learning_rate = cfg.learning_rate;
  opt.weight_decay = cfg.weight_decay;
  auto state = OptimizerState::for_params(model->params(), opt.kind);
  std::optional<EmaState> ema;
  if (options.ema_teacher) ema = init_teacher(model->params(), cfg.ema_decay);

  const bool is_mixmatch = cfg.method == Method::mixmatch;
  BatchPlan plan;
  plan.labeled_batch_size = cfg.batch_size;
  plan.unlabeled_ratio = is_mixmatch ? 1 : cfg.fixmatch.mu;
  plan.shuffle_seed = derive_seed(cfg.seed, kBatchSalt);
  BatchIterator batches(splits.train_labeled.size(), splits.train_unlabeled.size(), plan);

  const std::int64_t epochs = planned_epochs(cfg);
  const auto per_epoch = static_cast<std::int64_t>(batches.batches_per_epoch());
  MixMatchConfig mm = cfg.mixmatch;
  if (mm.rampup_steps == 0) {
    mm.rampup_steps = std::max<std::int64_t>(1, std::llround(0.25 * static_cast<double>(epochs * per_epoch)));
  }

  TrainResult result;
  auto grad = model->params().zeros_like();
  std::int64_t step = 0;
  bool have_best = false;
  double best_loss = 0.0;
  std::vector<const LabeledExample*> lptr;
  std::vector<const UnlabeledExample*> uptr;
  for (std::int64_t epoch = 1; epoch <= epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    MetricsRecord rec;
    rec.epoch = epoch;
    for (const auto& idx : batches.epoch(static_cast<std::size_t>(epoch - 1))) {
      lptr.clear();
      uptr.clear();
      for (auto i : idx.labeled) lptr.push_back(&splits.train_labeled[i]);
      for (auto i : idx.unlabeled) uptr.push_back(&splits.train_unlabeled[i]);
      auto rng = make_rng(derive_seed(cfg.seed, kStepSalt, static_cast<std::uint64_t>(step)));
      grad.fill(0.0);
      LossBreakdown loss;
      if (is_mixmatch) {
        const double lambda_u = rampup_lambda(step, mm);
        const auto mixed = compose_batch(*model, lptr, uptr, mm, rng);
        loss = mixmatch_loss(*model, mixed, lambda_u, mm.k, cfg.batch_size, &grad);
      } else {
        loss = fixmatch_loss(*model, lptr, uptr, cfg.fixmatch, rng, &grad);
      }
      if (!finite_loss(loss) || !grad.all_finite()) {
        rec.step = step;
        rec.train_total = loss.total;
        rec.train_sup = loss.supervised;
        rec.train_unsup = loss.unsupervised;
        rec.lambda_u = loss.lambda_u;
        rec.val_loss = NAN;
        rec.val_acc = NAN;
        result.history.push_back(rec);
        result.aborted = true;
        result.diagnostic = "non-finite " + std::string(to_string(cfg.method)) + " loss at epoch " +
                            std::to_string(epoch) + ", step " + std::to_string(step) +
                            " (total=" + std::to_string(loss.total) + ")";
        return result;
      }
      optimizer_step(model->params(), grad, state, opt);
      if (ema) ema_update(*ema, model->params());
      ++step;
      const double w = 1.0 / static_cast<double>(per_epoch);
      rec.train_total += loss.total * w;
      rec.train_sup += loss.supervised * w;
      rec.train_unsup += loss.unsupervised * w;
      rec.mask_rate += loss.mask_rate * w;
      rec.lambda_u = loss.lambda_u;
    }
    rec.step = step;
    const auto val = evaluate(*model, eval_params(ema, model->params()), splits.validation);
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (!have_best || val.loss < best_loss) {
      have_best = true;
      best_loss = val.loss;
      result.best = snapshot_checkpoint(*model, state, ema, epoch);
      result.best_index = result.history.size() - 1;
    }
  }

  const bool use_teacher = result.best.ema_params.has_value() && result.best.ema_decay > 0.0;
  const auto best_model = restore_backbone(result.best, use_teacher);
  result.test_accuracy = evaluate(*best_model, best_model->params(), splits.test).accuracy;
  result.test_evaluations = 1;
  result.history.back().test_acc = result.test_accuracy;
  return result;
}

}  // namespace

std::int64_t epochs_for_budget(std::int64_t n_batches, std::int64_t n_labeled, std::int64_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (n_batches < 0) throw ConfigError("n_batches must be >= 0");
  const std::int64_t per_epoch = n_labeled / batch_size;
  if (per_epoch < 1) {
    throw ConfigError("n_labeled div B is 0 (n_labeled=" + std::to_string(n_labeled) + ", B=" +
                      std::to_string(batch_size) + "); use a smaller batch size or more labels");
  }
  // Integer half-away-from-zero rounding of n_batches / per_epoch.
  return (2 * n_batches + per_epoch) / (2 * per_epoch);
}

std::string_view to_string(SweepStage stage) { return stage == SweepStage::primary ? "primary" : "secondary"; }

SweepStage parse_sweep_stage(std::string_view name) {
  if (name == "primary") return SweepStage::primary;
  if (name == "secondary") return SweepStage::secondary;
  throw ConfigError("unknown sweep stage '" + std::string(name) + "' (expected primary or secondary)");
}

std::size_t SweepGrid::size() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.values.size();
  return n;
}

std::vector<FlatConfig> enumerate_grid(const SweepGrid& grid) {
  if (grid.axes.empty()) throw ConfigError("sweep grid has no axes");
  for (const auto& axis : grid.axes) {
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.key + "' is empty");
  }
  std::vector<FlatConfig> out;
  out.reserve(grid.size());
  std::vector<std::size_t> digit(grid.axes.size(), 0);
  while (true) {
    FlatConfig delta;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) delta[grid.axes[a].key] = grid.axes[a].values[digit[a]];
    out.push_back(std::move(delta));
    std::size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++digit[a] < grid.axes[a].values.size()) break;
      digit[a] = 0;
      if (a == 0) return out;
    }
  }
}

SweepGrid primary_grid(Method method) {
  SweepGrid grid;
  grid.stage = SweepStage::primary;
  if (method == Method::mixmatch) {
    grid.axes = {{"lr", {"0.01", "0.001"}},
                 {"optimizer", {"adam"}},
                 {"epochs", {"500", "1000"}},
                 {"mixmatch.temperature", {"0.25", "0.5", "0.75", "0.9"}},
                 {"mixmatch.alpha", {"0.25", "0.5", "0.75", "0.9"}},
                 {"mixmatch.lambda_u", {"12.5", "25", "50", "100", "150"}}};
  } else if (method == Method::fixmatch) {
    grid.axes = {{"lr", {"0.03"}},
                 {"optimizer", {"adam", "sgd_momentum"}},
                 {"epochs", {"1000", "2000"}},
                 {"fixmatch.lambda_u", {"5", "25"}}};
  } else {
    grid.axes = {{"transfer.lr", {"0.001", "0.0005"}},
                 {"transfer.weight_decay", {"0", "0.0001"}},
                 {"transfer.regime", {"fine_tuning", "feature_extraction"}}};
  }
  return grid;
}

SweepGrid secondary_grid(Method method) {
  SweepGrid grid;
  grid.stage = SweepStage::secondary;
  if (method == Method::mixmatch) {
    grid.axes = {{"ema_decay", {"0", "0.999"}}, {"n_batches", {"12000", "15000"}}};
  } else if (method == Method::fixmatch) {
    grid.axes = {{"ema_decay", {"0", "0.999"}}, {"n_batches", {"24000", "30000"}}};
  } else {
    throw ConfigError("the secondary sweep applies to mixmatch and fixmatch only");
  }
  return grid;
}

std::int64_t planned_epochs(const TrainConfig& cfg) {
  if (cfg.epochs > 0) return cfg.epochs;
  return epochs_for_budget(cfg.n_batches, cfg.n_labeled, cfg.batch_size);
}

TrainResult run_training(const TrainConfig& cfg, const DatasetSplits& splits, const RunOptions& options) {
  cfg.validate();
  if (splits.class_names.empty()) throw Error("run_training: dataset has no classes");
  if (splits.train_labeled.empty()) throw Error("run_training: no training images");

  DatasetSplits run_splits = splits;
  if (cfg.n_labeled > 0) apply_labeled_subset(run_splits, cfg.n_labeled, derive_seed(cfg.seed, kSubsetSalt));

  TrainResult result;
  if (cfg.method == Method::mixmatch || cfg.method == Method::fixmatch) {
    result = run_ssl(cfg, run_splits, options);
  } else {
    const int classes = run_splits.num_classes();
    const int channels = run_splits.train_labeled.front().image.channels;
    TransferConfig tc = cfg.transfer;
    std::unique_ptr<Backbone> model;
    if (cfg.method == Method::transfer) {
      model = pretrained_backbone(cfg.model, tc, classes, channels, cfg.image_side, cfg.seed);
      apply_regime(*model, tc.regime);
    } else {
      model = build_backbone(cfg.model, classes, channels, cfg.seed);
      tc.patience = 0;
    }
    result = train_supervised(*model, run_splits, tc, cfg.seed, cfg.fixmatch.weak.shift_fraction);
    if (options.on_epoch) {
      for (const auto& rec : result.history) options.on_epoch(rec);
    }
  }
  result.best.resolved_config = format_flat_config(to_flat(cfg));
  return result;
}

std::vector<SweepRow> sweep(const TrainConfig& base, const SweepGrid& grid, const DatasetSplits& splits,
                            const SweepOptions& options) {
  const auto deltas = enumerate_grid(grid);
  std::vector<int> n_values = options.n_labeled_values;
  if (n_values.empty()) n_values.push_back(base.n_labeled);

  std::vector<SweepRow> rows;
  for (int n_l : n_values) {
    for (const auto& delta : deltas) {
      SweepRow row;
      row.order = rows.size();
      row.delta = delta;
      row.config = base;
      apply_flat_config(row.config, delta);
      row.config.n_labeled = n_l;
      row.hash = config_hash(row.config);
      rows.push_back(std::move(row));
    }
  }

  std::mutex report_mutex;
  auto run_one = [&](SweepRow& row) {
    const auto dir = options.runs_root.empty() ? std::filesystem::path{}
                                               : run_directory(options.runs_root, options.sweep_name, row.hash);
    if (!dir.empty() && options.skip_completed && run_status(dir) == "done") {
      const auto stored = read_run(dir);
      row.ok = true;
      row.best_val_loss = stored.best_val_loss;
      row.test_accuracy = stored.test_accuracy.value_or(0.0);
      row.best_epoch = stored.best_epoch;
      row.wall_seconds = stored.total_wall_seconds;
    } else {
      try {
        if (!dir.empty()) begin_run(dir, row.config);
        const auto result = run_training(row.config, splits);
        if (!dir.empty()) finish_run(dir, row.config, result);
        row.ok = !result.aborted;
        row.error = result.diagnostic;
        if (!result.history.empty() && row.ok) {
          const auto& best = result.history[result.best_index];
          row.best_val_loss = best.val_loss;
          row.best_epoch = best.epoch;
          row.test_accuracy = result.test_accuracy;
        }
        for (const auto& rec : result.history) row.wall_seconds += rec.wall_seconds;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
        if (!dir.empty()) fail_run(dir, e.what());
      }
    }
    if (options.on_run) {
      std::lock_guard lock(report_mutex);
      options.on_run(row);
    }
  };

  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(rows.size())));
  if (workers == 1) {
    for (auto& row : rows) run_one(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) run_one(rows[i]);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.ok != b.ok) return a.ok;
    if (a.ok && a.best_val_loss != b.best_val_loss) return a.best_val_loss < b.best_val_loss;
    return a.order < b.order;
  });
  return rows;
}

}  // namespace sslmatch
