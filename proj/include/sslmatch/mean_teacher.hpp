#pragma once

#include <cstdint>
#include <optional>

#include "sslmatch/common.hpp"
#include "sslmatch/params.hpp"

namespace sslmatch {

/// Exponential moving average of the student parameters.
struct EmaState {
  ParamVector teacher_params;
  double beta = 0.0;
  std::uint64_t updates = 0;
};

EmaState init_teacher(const ParamVector& student, double beta);

/// teacher <- beta * teacher + (1 - beta) * student over every segment,
/// frozen ones included.
void ema_update(EmaState& state, const ParamVector& student);

/// Parameter set used for validation, test and checkpointing: the teacher when
/// EMA is enabled with beta > 0, otherwise the student.
const ParamVector& eval_params(const std::optional<EmaState>& state, const ParamVector& student);

}  // namespace sslmatch
