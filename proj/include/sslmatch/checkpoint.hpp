#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sslmatch/backbone.hpp"
#include "sslmatch/optimizer.hpp"
#include "sslmatch/params.hpp"

namespace sslmatch {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string architecture_id;
  std::map<std::string, std::int64_t> architecture_args;
  int num_classes = 0;
  ParamVector params;
  OptimizerState optimizer;
  std::optional<std::vector<double>> ema_params;
  double ema_decay = 0.0;
  std::int64_t epoch = -1;
  std::string resolved_config;
};

/// Binary container: "SSLMCKPT" magic, u32 version, then length-prefixed
/// little-endian fields. Written to a sibling temp file and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rebuilds the backbone described by a checkpoint with the stored values.
/// `use_ema` selects the teacher parameters when present.
std::unique_ptr<Backbone> restore_backbone(const Checkpoint& checkpoint, bool use_ema = false);

}  // namespace sslmatch
