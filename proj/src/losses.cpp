#include "sslmatch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sslmatch/common.hpp"

namespace sslmatch {
namespace {

void require_same_size(const SoftLabel& a, const SoftLabel& b, const char* what) {
  if (a.size() != b.size()) {
    throw Error(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
}

}  // namespace

SoftLabel SoftLabel::one_hot(int index, int num_classes) {
  if (index < 0 || index >= num_classes) throw Error("one_hot: index out of range");
  SoftLabel p{std::vector<double>(static_cast<std::size_t>(num_classes), 0.0)};
  p.probs[static_cast<std::size_t>(index)] = 1.0;
  return p;
}

SoftLabel SoftLabel::uniform(int num_classes) {
  return SoftLabel{std::vector<double>(static_cast<std::size_t>(num_classes), 1.0 / num_classes)};
}

bool is_valid_soft_label(const SoftLabel& p, double tol) {
  if (p.probs.empty()) return false;
  double sum = 0.0;
  for (double v : p.probs) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

int argmax(const SoftLabel& p) {
  if (p.probs.empty()) throw Error("argmax of an empty distribution");
  return static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
}

SoftLabel softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error("softmax: empty logits");
  double top = logits[0];
  for (double z : logits) {
    if (!std::isfinite(z)) throw Error("softmax: non-finite logit");
    top = std::max(top, z);
  }
  SoftLabel p{std::vector<double>(logits.size())};
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p.probs[i] = std::exp(logits[i] - top);
    sum += p.probs[i];
  }
  for (double& v : p.probs) v /= sum;
  return p;
}

double cross_entropy(const SoftLabel& target, const SoftLabel& pred) {
  require_same_size(target, pred, "cross_entropy");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * std::log(std::max(pred[i], kLogClamp));
  }
  return loss;
}

double brier(const SoftLabel& target, const SoftLabel& pred) {
  require_same_size(target, pred, "brier");
  double loss = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target[i] - pred[i];
    loss += d * d;
  }
  return loss;
}

std::vector<double> cross_entropy_logit_grad(const SoftLabel& target, const SoftLabel& pred) {
  require_same_size(target, pred, "cross_entropy_logit_grad");
  double mass = 0.0;
  for (double t : target.probs) mass += t;
  std::vector<double> g(target.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = mass * pred[i] - target[i];
  return g;
}

std::vector<double> brier_logit_grad(const SoftLabel& target, const SoftLabel& pred) {
  require_same_size(target, pred, "brier_logit_grad");
  // dL/dp_i = 2 (p_i - q_i); dL/dz_j = p_j (dL/dp_j - sum_i p_i dL/dp_i)
  double inner = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) inner += pred[i] * 2.0 * (pred[i] - target[i]);
  std::vector<double> g(pred.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = pred[j] * (2.0 * (pred[j] - target[j]) - inner);
  return g;
}

}  // namespace sslmatch
