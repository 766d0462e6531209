#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sslmatch/common.hpp"

namespace sslmatch {

using Logits = std::vector<double>;

/// Probability vector over C classes.
struct SoftLabel {
  std::vector<double> probs;

  [[nodiscard]] std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  double& operator[](std::size_t i) { return probs[i]; }

  static SoftLabel one_hot(int index, int num_classes);
  static SoftLabel uniform(int num_classes);

  friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

/// Entries in [0, 1] summing to 1 within tol.
bool is_valid_soft_label(const SoftLabel& p, double tol = 1e-6);

/// Lowest index of the maximum entry.
int argmax(const SoftLabel& p);

/// Numerically stable softmax; throws on non-finite input.
SoftLabel softmax(std::span<const double> logits);

inline constexpr double kLogClamp = 1e-12;

/// -sum_i target_i * log(max(pred_i, 1e-12)).
double cross_entropy(const SoftLabel& target, const SoftLabel& pred);

/// Squared L2 distance between two distributions.
double brier(const SoftLabel& target, const SoftLabel& pred);

/// Composite SSL loss: total = supervised + lambda_u * unsupervised.
struct LossBreakdown {
  double total = 0.0;
  double supervised = 0.0;
  double unsupervised = 0.0;  // normalized, before the lambda_u weight
  double lambda_u = 0.0;
  double mask_rate = 0.0;  // FixMatch only
};

/// d cross_entropy(target, softmax(z)) / dz = sum(target) * p - target.
std::vector<double> cross_entropy_logit_grad(const SoftLabel& target, const SoftLabel& pred);

/// d brier(target, softmax(z)) / dz via the softmax Jacobian.
std::vector<double> brier_logit_grad(const SoftLabel& target, const SoftLabel& pred);

}  // namespace sslmatch
