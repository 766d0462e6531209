#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sslmatch/backbone.hpp"
#include "sslmatch/checkpoint.hpp"
#include "sslmatch/common.hpp"
#include "sslmatch/data.hpp"

namespace sslmatch {

/// One row of a run's history.
struct MetricsRecord {
  std::int64_t epoch = 0;  // 1-based
  std::int64_t step = 0;   // optimizer steps taken so far
  double train_total = 0.0;
  double train_sup = 0.0;
  double train_unsup = 0.0;
  double lambda_u = 0.0;
  double mask_rate = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double wall_seconds = 0.0;  // duration of this epoch
  std::optional<double> test_acc;
};

struct EvalResult {
  double loss = 0.0;      // mean cross-entropy
  double accuracy = 0.0;  // fraction in [0, 1]
  std::size_t count = 0;
};

/// Outcome of one training run. `best` holds the parameters of the selected
/// epoch; test accuracy is measured once, on those parameters.
struct TrainResult {
  Checkpoint best;
  std::vector<MetricsRecord> history;
  std::size_t best_index = 0;
  double test_accuracy = 0.0;
  int test_evaluations = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Mean supervised cross-entropy and accuracy of `params` on `examples`.
EvalResult evaluate(const Backbone& model, const ParamVector& params,
                    std::span<const LabeledExample> examples, std::size_t chunk = 64);

/// Index of the lowest val_loss; the earliest epoch wins ties. Throws on an
/// empty history.
std::size_t best_epoch_index(std::span<const MetricsRecord> history);

/// Strict-improvement early stopping. Epochs are reported in increasing order;
/// `update` returns true once `patience` epochs have passed without a new
/// best. patience == 0 never stops.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  bool update(std::int64_t epoch, double val_loss);
  [[nodiscard]] bool improved() const { return improved_; }
  [[nodiscard]] std::int64_t best_epoch() const { return best_epoch_; }
  [[nodiscard]] double best_loss() const { return best_loss_; }

 private:
  int patience_;
  std::int64_t best_epoch_ = -1;
  double best_loss_ = 0.0;
  bool improved_ = false;
};

}  // namespace sslmatch
