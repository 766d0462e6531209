#include "sslmatch/metrics.hpp"

#include <algorithm>

#include "sslmatch/common.hpp"
#include "sslmatch/losses.hpp"

namespace sslmatch {

EvalResult evaluate(const Backbone& model, const ParamVector& params,
                    std::span<const LabeledExample> examples, std::size_t chunk) {
  EvalResult out;
  out.count = examples.size();
  if (examples.empty()) return out;
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<Image> images;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < examples.size(); start += chunk) {
    const std::size_t end = std::min(examples.size(), start + chunk);
    images.clear();
    for (std::size_t i = start; i < end; ++i) images.push_back(examples[i].image);
    const auto logits = model.forward_with(params, images);
    for (std::size_t i = start; i < end; ++i) {
      const auto p = softmax(logits[i - start]);
      const int label = examples[i].label;
      out.loss += cross_entropy(SoftLabel::one_hot(label, model.num_classes()), p);
      if (argmax(p) == label) ++correct;
    }
  }
  out.loss /= static_cast<double>(examples.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return out;
}

std::size_t best_epoch_index(std::span<const MetricsRecord> history) {
  if (history.empty()) throw Error("best_epoch_index: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].val_loss < history[best].val_loss) best = i;
  }
  return best;
}

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 0) throw ConfigError("patience must be >= 0");
}

bool EarlyStopping::update(std::int64_t epoch, double val_loss) {
  improved_ = best_epoch_ < 0 || val_loss < best_loss_;
  if (improved_) {
    best_epoch_ = epoch;
    best_loss_ = val_loss;
  }
  return patience_ > 0 && epoch - best_epoch_ >= patience_;
}

}  // namespace sslmatch
