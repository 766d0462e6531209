#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "sslmatch/backbone.hpp"
#include "sslmatch/checkpoint.hpp"
#include "sslmatch/config.hpp"
#include "sslmatch/data.hpp"
#include "sslmatch/mean_teacher.hpp"
#include "sslmatch/metrics.hpp"

namespace sslmatch {

/// feature_extraction: only the final segment stays trainable.
/// fine_tuning: every segment is trainable.
void apply_regime(Backbone& model, Regime regime);

/// Freshly initialized backbone for `cfg.model`.
std::unique_ptr<Backbone> build_backbone(const ModelConfig& cfg, int num_classes, int input_channels,
                                         std::uint64_t seed);

/// Backbone whose non-final segments come from a pretrained model and whose
/// head is freshly initialized for `num_classes`. Loads `pretrained_path` when
/// set; otherwise pretrains for `pretrain_steps` on the auxiliary texture task.
std::unique_ptr<Backbone> pretrained_backbone(const ModelConfig& model_cfg, const TransferConfig& cfg,
                                              int num_classes, int input_channels, int image_side,
                                              std::uint64_t seed);

/// Checkpoint of the current student (and teacher, when present).
Checkpoint snapshot_checkpoint(const Backbone& model, const OptimizerState& optimizer,
                               const std::optional<EmaState>& ema, std::int64_t epoch);

/// Adam on splits.train_labeled with weak augmentation, validation after
/// every epoch, early stopping on validation loss and a final test pass on
/// the best epoch. The model is left at its last-epoch parameters.
TrainResult train_supervised(Backbone& model, const DatasetSplits& splits, const TransferConfig& cfg,
                             std::uint64_t seed, double shift_fraction = 0.125);

}  // namespace sslmatch
