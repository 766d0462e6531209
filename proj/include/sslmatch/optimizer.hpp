#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sslmatch/params.hpp"

namespace sslmatch {

enum class OptimizerKind { adam, sgd_momentum };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;  // SGD only
};

/// Moment buffers sized to the full parameter vector; frozen entries stay zero.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  std::uint64_t step = 0;
  std::vector<double> first_moment;   // Adam m, or SGD velocity
  std::vector<double> second_moment;  // Adam v; empty for SGD

  static OptimizerState for_params(const ParamVector& params, OptimizerKind kind);
};

/// One update of every trainable segment. Weight decay is applied as direct
/// shrinkage p -= lr * wd * p, outside the moment estimates. Throws, naming the
/// segment, if a trainable gradient entry is not finite.
void optimizer_step(ParamVector& params, const ParamVector& grads, OptimizerState& state,
                    const OptimizerConfig& config);

}  // namespace sslmatch
