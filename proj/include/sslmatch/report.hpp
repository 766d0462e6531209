#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "sslmatch/results_store.hpp"

namespace sslmatch {

/// Best completed run for one report cell.
struct ReportCell {
  double test_accuracy = 0.0;  // fraction
  std::string run_hash;
  std::filesystem::path run_dir;
  double wall_seconds = 0.0;  // summed epoch times of that run
  int runs = 0;               // completed runs aggregated into the cell
};

/// method x n_l grid; n_l = 0 stands for "all labels".
struct AccuracyGrid {
  std::vector<std::string> methods;
  std::vector<int> n_labeled;
  std::map<std::pair<std::string, int>, ReportCell> cells;

  [[nodiscard]] const ReportCell* find(const std::string& method, int n_l) const;
};

/// method x (n_l, beta_EMA) grid.
struct EmaGrid {
  std::vector<std::string> methods;
  std::vector<int> n_labeled;
  std::vector<double> betas;
  std::map<std::tuple<std::string, int, double>, ReportCell> cells;

  [[nodiscard]] const ReportCell* find(const std::string& method, int n_l, double beta) const;
};

/// Max test accuracy per (method, n_l) over completed runs; the earliest run
/// directory wins ties.
AccuracyGrid build_accuracy_grid(std::span<const StoredRun> runs);
/// As above, split by ema_decay. Baselines have no teacher and are reported
/// under beta = 0 only.
EmaGrid build_ema_grid(std::span<const StoredRun> runs);

/// Accuracies in percent with two decimals; "---" marks empty cells.
std::string format_accuracy_table(const AccuracyGrid& grid);
/// Long form: method,n_labeled,test_acc,runs,wall_seconds,run_hash. Same
/// numbers as the table.
std::string format_accuracy_csv(const AccuracyGrid& grid);
std::string format_ema_table(const EmaGrid& grid);
/// Training time of the best run per cell.
std::string format_time_table(const AccuracyGrid& grid);

/// "1d 16h 5m", "9h 12m", "12m"; durations under a minute print as "42s".
std::string format_duration(double seconds);

/// Test accuracy against n_l, one line per method, written as PNG.
void render_accuracy_plot(const AccuracyGrid& grid, const std::filesystem::path& png);

}  // namespace sslmatch
