#pragma once

#include <span>
#include <vector>

#include "sslmatch/augment.hpp"
#include "sslmatch/backbone.hpp"
#include "sslmatch/common.hpp"
#include "sslmatch/data.hpp"
#include "sslmatch/losses.hpp"

namespace sslmatch {

struct FixMatchConfig {
  int mu = 4;
  double tau = 0.7;
  double lambda_u = 5.0;
  AugmentationSpec weak = AugmentationSpec::weak_default();
  AugmentationSpec strong = AugmentationSpec::strong_default();

  void validate() const;
};

struct PseudoLabeledExample {
  const UnlabeledExample* u = nullptr;
  SoftLabel q;       // prediction on the weak view
  int q_hat = 0;     // argmax(q), lowest index on ties
  bool confident = false;
};

/// Strict threshold: max(q) > tau.
bool confidence_mask(const SoftLabel& q, double tau);

/// Builds a pseudo-labeled example from the prediction on a weak view.
PseudoLabeledExample make_pseudo_label(const UnlabeledExample& u, SoftLabel q, double tau);

/// Inference-only pass: q = softmax(f(weak(u))).
PseudoLabeledExample pseudo_label(const Backbone& model, const UnlabeledExample& u, Rng& rng,
                                  const FixMatchConfig& cfg);

/// Augmented views and pseudo-labels for one step; the loss only depends on
/// this and the parameters.
struct FixMatchBatch {
  std::vector<Image> labeled_weak;
  std::vector<int> labels;
  std::vector<Image> unlabeled_strong;
  std::vector<int> pseudo_labels;
  std::vector<bool> confident;
  int batch_size = 0;  // B
};

/// Weak views of X, weak-view pseudo-labels and strong views of U. Requires
/// |U| == mu * |X|.
FixMatchBatch prepare_fixmatch_batch(const Backbone& model, std::span<const LabeledExample* const> labeled,
                                     std::span<const UnlabeledExample* const> unlabeled,
                                     const FixMatchConfig& cfg, Rng& rng);

/// (1/B) sum H(y, f(weak x)) + lambda_u/(mu B) sum 1[max q > tau] H(q_hat, f(strong u)).
/// The mu*B denominator does not depend on how many examples pass the mask.
LossBreakdown fixmatch_loss_on_batch(const Backbone& model, const FixMatchBatch& batch,
                                     const FixMatchConfig& cfg, ParamVector* grad = nullptr);

LossBreakdown fixmatch_loss(const Backbone& model, std::span<const LabeledExample* const> labeled,
                            std::span<const UnlabeledExample* const> unlabeled, const FixMatchConfig& cfg,
                            Rng& rng, ParamVector* grad = nullptr);

}  // namespace sslmatch
