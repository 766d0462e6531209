#include "sslmatch/optimizer.hpp"

#include <cmath>

#include "sslmatch/common.hpp"

namespace sslmatch {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd_momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected adam or sgd_momentum)");
}

OptimizerState OptimizerState::for_params(const ParamVector& params, OptimizerKind kind) {
  OptimizerState state;
  state.kind = kind;
  state.first_moment.assign(params.size(), 0.0);
  if (kind == OptimizerKind::adam) state.second_moment.assign(params.size(), 0.0);
  return state;
}

void optimizer_step(ParamVector& params, const ParamVector& grads, OptimizerState& state,
                    const OptimizerConfig& config) {
  if (!params.same_layout(grads)) throw Error("optimizer_step: gradient layout mismatch");
  if (state.kind != config.kind) throw Error("optimizer_step: state belongs to a different optimizer");
  if (state.first_moment.size() != params.size() ||
      (config.kind == OptimizerKind::adam && state.second_moment.size() != params.size())) {
    throw Error("optimizer_step: state size mismatch");
  }

  auto values = params.values();
  const auto g = grads.values();
  for (const auto& seg : params.segments()) {
    if (!seg.trainable) continue;
    for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) {
      if (!std::isfinite(g[i])) throw Error("non-finite gradient in segment '" + seg.name + "'");
    }
  }

  ++state.step;
  const double lr = config.learning_rate;
  const double shrink = lr * config.weight_decay;
  if (config.kind == OptimizerKind::adam) {
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (const auto& seg : params.segments()) {
      if (!seg.trainable) continue;
      for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = config.beta1 * m + (1.0 - config.beta1) * g[i];
        v = config.beta2 * v + (1.0 - config.beta2) * g[i] * g[i];
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        values[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon) + shrink * values[i];
      }
    }
  } else {
    for (const auto& seg : params.segments()) {
      if (!seg.trainable) continue;
      for (std::size_t i = seg.offset; i < seg.offset + seg.length; ++i) {
        double& velocity = state.first_moment[i];
        velocity = config.momentum * velocity + g[i];
        values[i] -= lr * velocity + shrink * values[i];
      }
    }
  }
}

}  // namespace sslmatch
