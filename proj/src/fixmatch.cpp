#include "sslmatch/fixmatch.hpp"

#include <algorithm>

namespace sslmatch {

void FixMatchConfig::validate() const {
  if (mu < 1) throw ConfigError("fixmatch.mu must be >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("fixmatch.tau must lie in [0, 1]");
  if (!(lambda_u >= 0.0)) throw ConfigError("fixmatch.lambda_u must be >= 0");
  weak.validate();
  strong.validate();
}

bool confidence_mask(const SoftLabel& q, double tau) {
  return *std::max_element(q.probs.begin(), q.probs.end()) > tau;
}

PseudoLabeledExample make_pseudo_label(const UnlabeledExample& u, SoftLabel q, double tau) {
  PseudoLabeledExample out;
  out.u = &u;
  out.q_hat = argmax(q);
  out.confident = confidence_mask(q, tau);
  out.q = std::move(q);
  return out;
}

PseudoLabeledExample pseudo_label(const Backbone& model, const UnlabeledExample& u, Rng& rng,
                                  const FixMatchConfig& cfg) {
  const Image weak = weak_augment(u.image, rng, cfg.weak.shift_fraction);
  const auto logits = model.forward(std::span<const Image>(&weak, 1));
  return make_pseudo_label(u, softmax(logits.front()), cfg.tau);
}

FixMatchBatch prepare_fixmatch_batch(const Backbone& model, std::span<const LabeledExample* const> labeled,
                                     std::span<const UnlabeledExample* const> unlabeled,
                                     const FixMatchConfig& cfg, Rng& rng) {
  cfg.validate();
  if (unlabeled.size() != static_cast<std::size_t>(cfg.mu) * labeled.size()) {
    throw Error("fixmatch: unlabeled batch must be mu times the labeled batch (" +
                std::to_string(unlabeled.size()) + " != " + std::to_string(cfg.mu) + " * " +
                std::to_string(labeled.size()) + ")");
  }
  FixMatchBatch batch;
  batch.batch_size = static_cast<int>(labeled.size());
  for (const auto* ex : labeled) {
    auto child = make_rng(rng());
    batch.labeled_weak.push_back(weak_augment(ex->image, child, cfg.weak.shift_fraction));
    batch.labels.push_back(ex->label);
  }

  std::vector<Image> weak_views;
  weak_views.reserve(unlabeled.size());
  batch.unlabeled_strong.reserve(unlabeled.size());
  for (const auto* ex : unlabeled) {
    auto child = make_rng(rng());
    weak_views.push_back(weak_augment(ex->image, child, cfg.weak.shift_fraction));
    batch.unlabeled_strong.push_back(strong_augment(ex->image, child, cfg.strong));
  }

  const auto logits = model.forward(weak_views);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto pl = make_pseudo_label(*unlabeled[i], softmax(logits[i]), cfg.tau);
    batch.pseudo_labels.push_back(pl.q_hat);
    batch.confident.push_back(pl.confident);
  }
  return batch;
}

LossBreakdown fixmatch_loss_on_batch(const Backbone& model, const FixMatchBatch& batch,
                                     const FixMatchConfig& cfg, ParamVector* grad) {
  if (batch.batch_size < 1) throw Error("fixmatch: empty labeled batch");
  if (batch.unlabeled_strong.size() != static_cast<std::size_t>(cfg.mu) * batch.batch_size) {
    throw Error("fixmatch: unlabeled batch must be mu times the labeled batch");
  }
  const int classes = model.num_classes();
  const std::size_t nl = batch.labeled_weak.size();

  // Masked-out strong views carry no loss and are not forwarded.
  std::vector<Image> images = batch.labeled_weak;
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < batch.unlabeled_strong.size(); ++i) {
    if (batch.confident[i]) {
      active.push_back(i);
      images.push_back(batch.unlabeled_strong[i]);
    }
  }

  std::vector<Logits> logits;
  std::unique_ptr<ForwardTape> tape;
  if (grad) {
    tape = model.forward_train(images, logits);
  } else {
    logits = model.forward(images);
  }

  const double b = batch.batch_size;
  const double unsup_norm = static_cast<double>(cfg.mu) * b;
  LossBreakdown out;
  out.lambda_u = cfg.lambda_u;
  std::vector<Logits> dlogits(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto p = softmax(logits[i]);
    const int target = i < nl ? batch.labels[i] : batch.pseudo_labels[active[i - nl]];
    const auto y = SoftLabel::one_hot(target, classes);
    const double ce = cross_entropy(y, p);
    const double scale = i < nl ? 1.0 / b : cfg.lambda_u / unsup_norm;
    if (i < nl) {
      out.supervised += ce / b;
    } else {
      out.unsupervised += ce / unsup_norm;
    }
    if (grad) {
      dlogits[i] = cross_entropy_logit_grad(y, p);
      for (double& v : dlogits[i]) v *= scale;
    }
  }
  out.total = out.supervised + cfg.lambda_u * out.unsupervised;
  const auto confident = std::count(batch.confident.begin(), batch.confident.end(), true);
  out.mask_rate = batch.confident.empty() ? 0.0 : static_cast<double>(confident) / batch.confident.size();
  if (grad) model.backward(*tape, dlogits, *grad);
  return out;
}

LossBreakdown fixmatch_loss(const Backbone& model, std::span<const LabeledExample* const> labeled,
                            std::span<const UnlabeledExample* const> unlabeled, const FixMatchConfig& cfg,
                            Rng& rng, ParamVector* grad) {
  const auto batch = prepare_fixmatch_batch(model, labeled, unlabeled, cfg, rng);
  return fixmatch_loss_on_batch(model, batch, cfg, grad);
}

}  // namespace sslmatch
