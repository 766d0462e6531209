#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "sslmatch/fixmatch.hpp"
#include "sslmatch/mixmatch.hpp"
#include "sslmatch/optimizer.hpp"

namespace sslmatch {

enum class Method { mixmatch, fixmatch, transfer, supervised };
enum class Regime { feature_extraction, fine_tuning };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view name);

/// Baseline training knobs. patience = 0 disables early stopping.
struct TransferConfig {
  Regime regime = Regime::fine_tuning;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  int epochs = 50;
  int batch_size = 32;
  int patience = 25;
  std::string pretrained_path;
  // Desk-scale stand-in for ImageNet weights when no pretrained_path is given.
  int pretrain_steps = 300;

  void validate() const;
};

struct ModelConfig {
  std::string architecture = "tiny-cnn";
  int width1 = 16;
  int width2 = 32;
};

/// Every hyperparameter of a run. Flat dotted keys (see `to_flat`) are the
/// on-disk form.
struct TrainConfig {
  Method method = Method::fixmatch;
  int n_labeled = 40;
  int batch_size = 16;           // B
  std::int64_t n_batches = 15000;  // n_B, total labeled-batch budget for SSL
  std::int64_t epochs = 0;         // SSL epochs; 0 derives them from n_B
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  double ema_decay = 0.0;  // beta_EMA, 0 disables the teacher
  int image_side = 32;
  ModelConfig model;
  MixMatchConfig mixmatch;
  FixMatchConfig fixmatch;
  TransferConfig transfer;

  void validate() const;
};

using FlatConfig = std::map<std::string, std::string>;

/// Parses `key = value` lines; '#' starts a comment. Duplicate keys: last wins.
FlatConfig parse_flat_config(std::string_view text);
FlatConfig read_flat_config(const std::filesystem::path& path);

/// Sorted `key = value` lines; stable under key reordering of the input.
std::string format_flat_config(const FlatConfig& flat);

/// Applies one dotted key. Throws ConfigError for unknown keys or bad values.
void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value);
void apply_flat_config(TrainConfig& cfg, const FlatConfig& flat);

/// Full resolved key set of a config.
FlatConfig to_flat(const TrainConfig& cfg);
TrainConfig from_flat(const FlatConfig& flat);

/// Git-style content hash (SHA-1 of "blob <len>\0" + canonical text) of the
/// resolved config.
std::string config_hash(const TrainConfig& cfg);
std::string content_hash(std::string_view text);

}  // namespace sslmatch
