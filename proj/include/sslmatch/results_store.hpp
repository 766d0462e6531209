#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sslmatch/config.hpp"
#include "sslmatch/metrics.hpp"

namespace sslmatch {

/// $SSLMATCH_RUNS_DIR when set, otherwise ./runs.
std::filesystem::path default_runs_root();

/// <root>/<sweep>/<config-hash>
std::filesystem::path run_directory(const std::filesystem::path& root, const std::string& sweep,
                                    const std::string& hash);

/// First word of the run's status file ("running", "done", "failed"), or ""
/// when the directory holds no run.
std::string run_status(const std::filesystem::path& dir);

/// Creates the directory, writes config.resolved and marks it running.
void begin_run(const std::filesystem::path& dir, const TrainConfig& cfg);
/// Writes metrics.csv and checkpoint.bin and marks the run done, or failed
/// with the diagnostic when training aborted.
void finish_run(const std::filesystem::path& dir, const TrainConfig& cfg, const TrainResult& result);
void fail_run(const std::filesystem::path& dir, const std::string& message);

/// Header row plus one row per epoch; when present, a final `test_acc,<value>` line.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> history,
                       std::optional<double> test_accuracy);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path,
                                            std::optional<double>* test_accuracy = nullptr);

struct StoredRun {
  std::filesystem::path dir;
  std::string hash;
  std::string status;
  TrainConfig config;
  std::vector<MetricsRecord> history;
  std::optional<double> test_accuracy;
  double best_val_loss = 0.0;
  std::int64_t best_epoch = 0;
  double total_wall_seconds = 0.0;
};

StoredRun read_run(const std::filesystem::path& dir);

/// Every run directory below `root` (any depth), sorted by path.
std::vector<StoredRun> scan_runs(const std::filesystem::path& root);

}  // namespace sslmatch
