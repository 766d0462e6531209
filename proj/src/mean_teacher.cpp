#include "sslmatch/mean_teacher.hpp"

#include "sslmatch/common.hpp"

namespace sslmatch {

EmaState init_teacher(const ParamVector& student, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("EMA decay must lie in [0, 1]");
  return EmaState{student, beta, 0};
}

void ema_update(EmaState& state, const ParamVector& student) {
  if (!state.teacher_params.same_layout(student)) throw Error("ema_update: layout mismatch");
  auto teacher = state.teacher_params.values();
  const auto s = student.values();
  const double beta = state.beta;
  for (std::size_t i = 0; i < teacher.size(); ++i) teacher[i] = beta * teacher[i] + (1.0 - beta) * s[i];
  ++state.updates;
}

const ParamVector& eval_params(const std::optional<EmaState>& state, const ParamVector& student) {
  if (state && state->beta > 0.0) return state->teacher_params;
  return student;
}

}  // namespace sslmatch
