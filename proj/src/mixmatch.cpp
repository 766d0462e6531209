#include "sslmatch/mixmatch.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sslmatch/augment.hpp"

namespace sslmatch {

void MixMatchConfig::validate() const {
  if (k < 1) throw ConfigError("mixmatch.k must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("mixmatch.temperature must be > 0");
  if (!(alpha > 0.0)) throw ConfigError("mixmatch.alpha must be > 0");
  if (!(lambda_u_max >= 0.0)) throw ConfigError("mixmatch.lambda_u must be >= 0");
  if (rampup_steps < 0) throw ConfigError("mixmatch.rampup_steps must be >= 0");
}

SoftLabel guess_label(const Backbone& model, const Image& u, int k, Rng& rng, double shift_fraction) {
  if (k < 1) throw ConfigError("guess_label: K must be >= 1");
  std::vector<Image> views;
  views.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto child = make_rng(rng());
    views.push_back(weak_augment(u, child, shift_fraction));
  }
  const auto logits = model.forward(views);
  SoftLabel mean{std::vector<double>(static_cast<std::size_t>(model.num_classes()), 0.0)};
  for (const auto& z : logits) {
    const auto p = softmax(z);
    for (std::size_t c = 0; c < p.size(); ++c) mean[c] += p[c] / k;
  }
  return mean;
}

SoftLabel sharpen(const SoftLabel& p, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("sharpen: temperature must be > 0");
  SoftLabel out{std::vector<double>(p.size())};
  // Work in log space so tiny entries with small T do not underflow to a zero sum.
  double top = -INFINITY;
  for (double v : p.probs) {
    if (v < 0.0) throw Error("sharpen: negative probability");
    if (v > 0.0) top = std::max(top, std::log(v) / temperature);
  }
  if (top == -INFINITY) throw Error("sharpen: all-zero distribution");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = p[i] > 0.0 ? std::exp(std::log(p[i]) / temperature - top) : 0.0;
    sum += out[i];
  }
  for (double& v : out.probs) v /= sum;
  return out;
}

double sample_mix_coefficient(double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw ConfigError("MixUp alpha must be > 0");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  double x = 0.0;
  double y = 0.0;
  do {
    x = gamma(rng);
    y = gamma(rng);
  } while (x + y <= 0.0);
  const double lam = x / (x + y);
  return std::max(lam, 1.0 - lam);
}

MixedExample mixup(const Image& a_image, const SoftLabel& a_target, const Image& b_image,
                   const SoftLabel& b_target, double lam) {
  if (!a_image.same_shape(b_image)) throw Error("mixup: image shapes differ");
  if (a_target.size() != b_target.size()) throw Error("mixup: target sizes differ");
  if (!(lam >= 0.0 && lam <= 1.0)) throw Error("mixup: coefficient outside [0, 1]");
  MixedExample out;
  out.lam = lam;
  out.image = a_image;
  if (lam != 1.0) {
    for (std::size_t i = 0; i < out.image.pixels.size(); ++i) {
      const double v = lam * a_image.pixels[i] + (1.0 - lam) * b_image.pixels[i];
      out.image.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  out.target.probs.resize(a_target.size());
  for (std::size_t c = 0; c < a_target.size(); ++c) {
    out.target[c] = lam * a_target[c] + (1.0 - lam) * b_target[c];
  }
  return out;
}

MixMatchBatch compose_batch(const Backbone& model, std::span<const LabeledExample* const> labeled,
                            std::span<const UnlabeledExample* const> unlabeled,
                            const MixMatchConfig& cfg, Rng& rng) {
  cfg.validate();
  if (labeled.size() != unlabeled.size()) {
    throw Error("compose_batch: labeled and unlabeled batches must have equal size");
  }
  const std::size_t b = labeled.size();
  const auto k = static_cast<std::size_t>(cfg.k);
  const int classes = model.num_classes();

  std::vector<Image> x_aug;
  std::vector<SoftLabel> x_targets;
  x_aug.reserve(b);
  for (const auto* ex : labeled) {
    auto child = make_rng(rng());
    x_aug.push_back(weak_augment(ex->image, child, cfg.shift_fraction));
    x_targets.push_back(SoftLabel::one_hot(ex->label, classes));
  }

  std::vector<Image> u_aug;
  u_aug.reserve(k * b);
  for (std::size_t view = 0; view < k; ++view) {
    for (const auto* ex : unlabeled) {
      auto child = make_rng(rng());
      u_aug.push_back(weak_augment(ex->image, child, cfg.shift_fraction));
    }
  }

  // Label guessing: average the K views of each unlabeled image, then sharpen.
  std::vector<SoftLabel> guesses(b, SoftLabel{std::vector<double>(static_cast<std::size_t>(classes), 0.0)});
  if (b > 0) {
    const auto logits = model.forward(u_aug);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const auto p = softmax(logits[i]);
      auto& g = guesses[i % b];
      for (std::size_t c = 0; c < p.size(); ++c) g[c] += p[c] / static_cast<double>(k);
    }
  }
  for (auto& g : guesses) g = sharpen(g, cfg.temperature);

  // W: all augmented examples, shuffled.
  const std::size_t w_size = (k + 1) * b;
  auto entry = [&](std::size_t i) -> std::pair<const Image*, const SoftLabel*> {
    if (i < b) return {&x_aug[i], &x_targets[i]};
    return {&u_aug[i - b], &guesses[(i - b) % b]};
  };
  const auto perm = seeded_permutation(w_size, rng());

  MixMatchBatch out;
  out.labeled.reserve(b);
  out.unlabeled.reserve(k * b);
  for (std::size_t i = 0; i < w_size; ++i) {
    const auto [img, target] = entry(i);
    const auto [w_img, w_target] = entry(perm[i]);
    const double lam = sample_mix_coefficient(cfg.alpha, rng);
    auto mixed = mixup(*img, *target, *w_img, *w_target, lam);
    (i < b ? out.labeled : out.unlabeled).push_back(std::move(mixed));
  }
  return out;
}

LossBreakdown mixmatch_loss_from_predictions(std::span<const SoftLabel> labeled_targets,
                                             std::span<const SoftLabel> labeled_preds,
                                             std::span<const SoftLabel> unlabeled_targets,
                                             std::span<const SoftLabel> unlabeled_preds,
                                             double lambda_u, int k, int batch_size) {
  if (lambda_u < 0.0) throw Error("mixmatch_loss: lambda_u must be >= 0");
  if (k < 1 || batch_size < 1) throw Error("mixmatch_loss: K and B must be >= 1");
  if (labeled_targets.size() != labeled_preds.size() || unlabeled_targets.size() != unlabeled_preds.size()) {
    throw Error("mixmatch_loss: target/prediction count mismatch");
  }
  LossBreakdown out;
  out.lambda_u = lambda_u;
  for (std::size_t i = 0; i < labeled_targets.size(); ++i) {
    out.supervised += cross_entropy(labeled_targets[i], labeled_preds[i]);
  }
  out.supervised /= batch_size;
  for (std::size_t i = 0; i < unlabeled_targets.size(); ++i) {
    out.unsupervised += brier(unlabeled_targets[i], unlabeled_preds[i]);
  }
  out.unsupervised /= static_cast<double>(k) * batch_size;
  out.total = out.supervised + lambda_u * out.unsupervised;
  return out;
}

LossBreakdown mixmatch_loss(const Backbone& model, const MixMatchBatch& batch, double lambda_u, int k,
                            int batch_size, ParamVector* grad) {
  if (lambda_u < 0.0) throw Error("mixmatch_loss: lambda_u must be >= 0");
  std::vector<Image> images;
  images.reserve(batch.labeled.size() + batch.unlabeled.size());
  for (const auto& ex : batch.labeled) images.push_back(ex.image);
  for (const auto& ex : batch.unlabeled) images.push_back(ex.image);

  std::vector<Logits> logits;
  std::unique_ptr<ForwardTape> tape;
  if (grad) {
    tape = model.forward_train(images, logits);
  } else {
    logits = model.forward(images);
  }

  const std::size_t nl = batch.labeled.size();
  std::vector<SoftLabel> lt, lp, ut, up;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto p = softmax(logits[i]);
    if (i < nl) {
      lt.push_back(batch.labeled[i].target);
      lp.push_back(std::move(p));
    } else {
      ut.push_back(batch.unlabeled[i - nl].target);
      up.push_back(std::move(p));
    }
  }
  const auto loss = mixmatch_loss_from_predictions(lt, lp, ut, up, lambda_u, k, batch_size);

  if (grad) {
    std::vector<Logits> dlogits(logits.size());
    const double sup_scale = 1.0 / batch_size;
    const double unsup_scale = lambda_u / (static_cast<double>(k) * batch_size);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      if (i < nl) {
        dlogits[i] = cross_entropy_logit_grad(lt[i], lp[i]);
        for (double& v : dlogits[i]) v *= sup_scale;
      } else {
        dlogits[i] = brier_logit_grad(ut[i - nl], up[i - nl]);
        for (double& v : dlogits[i]) v *= unsup_scale;
      }
    }
    model.backward(*tape, dlogits, *grad);
  }
  return loss;
}

double rampup_lambda(std::int64_t step, const MixMatchConfig& cfg) {
  if (cfg.rampup_steps <= 0) throw ConfigError("rampup_steps must be > 0");
  if (step < 0) throw Error("rampup_lambda: step must be >= 0");
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(cfg.rampup_steps));
  return cfg.lambda_u_max * frac;
}

}  // namespace sslmatch
