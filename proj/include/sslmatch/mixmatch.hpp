#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sslmatch/backbone.hpp"
#include "sslmatch/common.hpp"
#include "sslmatch/data.hpp"
#include "sslmatch/losses.hpp"

namespace sslmatch {

struct MixMatchConfig {
  int k = 2;                  // weak augmentations per unlabeled image
  double temperature = 0.5;   // sharpening T
  double alpha = 0.9;         // Beta(alpha, alpha)
  double lambda_u_max = 25.0;
  std::int64_t rampup_steps = 0;  // 0 resolves to 25% of all training steps
  double shift_fraction = 0.125;

  void validate() const;
};

struct MixedExample {
  Image image;
  SoftLabel target;
  double lam = 1.0;
};

struct MixMatchBatch {
  std::vector<MixedExample> labeled;    // X-hat, size B
  std::vector<MixedExample> unlabeled;  // U-hat, size K * B
};

/// Mean of softmax(f(weak(u))) over K independent weak augmentations.
/// Inference only; nothing here contributes to a gradient.
SoftLabel guess_label(const Backbone& model, const Image& u, int k, Rng& rng,
                      double shift_fraction = 0.125);

/// p_i^(1/T) / sum_j p_j^(1/T).
SoftLabel sharpen(const SoftLabel& p, double temperature);

/// lam ~ Beta(alpha, alpha), returned as max(lam, 1 - lam).
double sample_mix_coefficient(double alpha, Rng& rng);

MixedExample mixup(const Image& a_image, const SoftLabel& a_target, const Image& b_image,
                   const SoftLabel& b_target, double lam);

/// Label guessing, sharpening, the shuffled W set and MixUp. Requires
/// |labeled| == |unlabeled|. The k-th augmented copy of unlabeled image b
/// sits at index k * B + b of the returned unlabeled list.
MixMatchBatch compose_batch(const Backbone& model, std::span<const LabeledExample* const> labeled,
                            std::span<const UnlabeledExample* const> unlabeled,
                            const MixMatchConfig& cfg, Rng& rng);

/// (1/B) sum H(y, p) + lambda_u/(K B) sum ||q - p||^2 given predictions.
LossBreakdown mixmatch_loss_from_predictions(std::span<const SoftLabel> labeled_targets,
                                             std::span<const SoftLabel> labeled_preds,
                                             std::span<const SoftLabel> unlabeled_targets,
                                             std::span<const SoftLabel> unlabeled_preds,
                                             double lambda_u, int k, int batch_size);

/// Loss of a composed batch. Targets are constants; when `grad` is given the
/// parameter gradient is accumulated into it.
LossBreakdown mixmatch_loss(const Backbone& model, const MixMatchBatch& batch, double lambda_u,
                            int k, int batch_size, ParamVector* grad = nullptr);

/// lambda_u_max * min(1, step / rampup_steps).
double rampup_lambda(std::int64_t step, const MixMatchConfig& cfg);

}  // namespace sslmatch
