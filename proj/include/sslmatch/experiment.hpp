#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sslmatch/config.hpp"
#include "sslmatch/data.hpp"
#include "sslmatch/metrics.hpp"

namespace sslmatch {

/// round(n_B / (n_l div B)), rounding halves away from zero. Throws
/// ConfigError when n_l div B is 0.
std::int64_t epochs_for_budget(std::int64_t n_batches, std::int64_t n_labeled, std::int64_t batch_size);

enum class SweepStage { primary, secondary };
std::string_view to_string(SweepStage stage);
SweepStage parse_sweep_stage(std::string_view name);

struct SweepAxis {
  std::string key;  // flat config key
  std::vector<std::string> values;
};

struct SweepGrid {
  SweepStage stage = SweepStage::primary;
  std::vector<SweepAxis> axes;

  [[nodiscard]] std::size_t size() const;
};

/// Cartesian product of the axes. The first axis varies slowest.
std::vector<FlatConfig> enumerate_grid(const SweepGrid& grid);

/// Primary grids: 320 points for MixMatch, 8 for FixMatch.
SweepGrid primary_grid(Method method);
/// Secondary grid over ema_decay and n_batches.
SweepGrid secondary_grid(Method method);

struct RunOptions {
  // false drops the teacher entirely; with ema_decay = 0 the metrics must not change.
  bool ema_teacher = true;
  std::function<void(const MetricsRecord&)> on_epoch;
};

/// Trains `cfg` on `splits` (every train image in splits.train_labeled; the
/// labeled subset is drawn here from cfg.seed). SSL methods run
/// epochs_for_budget epochs unless cfg.epochs overrides it; baselines run
/// train_supervised. The run's resolved config is stored in the checkpoint.
TrainResult run_training(const TrainConfig& cfg, const DatasetSplits& splits, const RunOptions& options = {});

/// Planned SSL epoch count for `cfg`.
std::int64_t planned_epochs(const TrainConfig& cfg);

struct SweepRow {
  std::size_t order = 0;  // position in the enumerated grid
  FlatConfig delta;
  TrainConfig config;
  std::string hash;
  bool ok = false;
  std::string error;
  double best_val_loss = 0.0;
  double test_accuracy = 0.0;
  std::int64_t best_epoch = 0;
  double wall_seconds = 0.0;
};

struct SweepOptions {
  std::filesystem::path runs_root;  // empty: keep results in memory only
  std::string sweep_name = "sweep";
  int workers = 1;
  // Secondary stage: the grid is repeated for each n_labeled value.
  std::vector<int> n_labeled_values;
  bool skip_completed = true;
  std::function<void(const SweepRow&)> on_run;
};

/// Runs every grid point on top of `base` and ranks them by best validation
/// loss (grid order breaks ties; failed runs go last). Failures are recorded
/// and do not stop the sweep.
std::vector<SweepRow> sweep(const TrainConfig& base, const SweepGrid& grid, const DatasetSplits& splits,
                            const SweepOptions& options = {});

}  // namespace sslmatch
