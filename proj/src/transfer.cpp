#include "sslmatch/transfer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "sslmatch/augment.hpp"
#include "sslmatch/losses.hpp"
#include "sslmatch/optimizer.hpp"
#include "sslmatch/synth.hpp"

namespace sslmatch {
namespace {

constexpr std::uint64_t kInitSalt = 0x696e6974;
constexpr std::uint64_t kPretrainSalt = 0x70726574;
constexpr std::uint64_t kEpochSalt = 0x65706f63;
constexpr std::uint64_t kAugSalt = 0x61756720;
constexpr int kAuxPerClass = 64;

// Mean cross-entropy of one weakly augmented batch; accumulates the gradient.
double supervised_step(const Backbone& model, std::span<const LabeledExample> pool,
                       std::span<const std::size_t> indices, Rng& rng, double shift_fraction,
                       ParamVector& grad) {
  std::vector<Image> images;
  images.reserve(indices.size());
  for (std::size_t i : indices) {
    auto child = make_rng(rng());
    images.push_back(weak_augment(pool[i].image, child, shift_fraction));
  }
  std::vector<Logits> logits;
  const auto tape = model.forward_train(images, logits);
  const double scale = 1.0 / static_cast<double>(indices.size());
  std::vector<Logits> dlogits(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto p = softmax(logits[i]);
    const auto y = SoftLabel::one_hot(pool[indices[i]].label, model.num_classes());
    loss += cross_entropy(y, p) * scale;
    dlogits[i] = cross_entropy_logit_grad(y, p);
    for (double& v : dlogits[i]) v *= scale;
  }
  model.backward(*tape, dlogits, grad);
  return loss;
}

}  // namespace

void apply_regime(Backbone& model, Regime regime) {
  const std::string head = model.final_segment();
  const auto& segments = model.params().segments();
  const bool has_head = std::any_of(segments.begin(), segments.end(),
                                    [&](const ParamSegment& s) { return s.name == head; });
  if (head.empty() || !has_head) {
    throw Error("apply_regime: model '" + model.architecture_id() + "' has no final classification segment");
  }
  if (regime == Regime::fine_tuning) {
    model.params().set_all_trainable(true);
  } else {
    model.params().set_all_trainable(false);
    model.params().set_trainable(head, true);
  }
}

std::unique_ptr<Backbone> build_backbone(const ModelConfig& cfg, int num_classes, int input_channels,
                                         std::uint64_t seed) {
  auto model = make_backbone(cfg.architecture, {{"input_channels", input_channels},
                                                {"width1", cfg.width1},
                                                {"width2", cfg.width2},
                                                {"num_classes", num_classes}});
  if (auto* tiny = dynamic_cast<TinyCnn*>(model.get())) tiny->initialize(derive_seed(seed, kInitSalt));
  return model;
}

std::unique_ptr<Backbone> pretrained_backbone(const ModelConfig& model_cfg, const TransferConfig& cfg,
                                              int num_classes, int input_channels, int image_side,
                                              std::uint64_t seed) {
  std::unique_ptr<Backbone> source;
  if (!cfg.pretrained_path.empty()) {
    source = restore_backbone(load_checkpoint(cfg.pretrained_path));
    if (source->architecture_id() != model_cfg.architecture) {
      throw ConfigError("pretrained checkpoint holds '" + source->architecture_id() + "', config asks for '" +
                        model_cfg.architecture + "'");
    }
  } else {
    const auto aux = make_auxiliary_splits(kAuxPerClass, image_side, derive_seed(seed, kPretrainSalt));
    source = build_backbone(model_cfg, aux.num_classes(), input_channels, derive_seed(seed, kPretrainSalt));
    OptimizerConfig opt;
    auto state = OptimizerState::for_params(source->params(), opt.kind);
    auto rng = make_rng(derive_seed(seed, kPretrainSalt, 1));
    const std::size_t n = aux.train_labeled.size();
    const std::size_t b = std::min<std::size_t>(32, n);
    auto grad = source->params().zeros_like();
    for (int step = 0; step < cfg.pretrain_steps; ++step) {
      std::vector<std::size_t> idx(b);
      for (auto& i : idx) i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1));
      grad.fill(0.0);
      supervised_step(*source, aux.train_labeled, idx, rng, 0.125, grad);
      optimizer_step(source->params(), grad, state, opt);
    }
  }

  auto model = build_backbone(model_cfg, num_classes, input_channels, seed);
  // The head is sized for the new task; every other segment is copied.
  for (const auto& seg : model->params().segments()) {
    if (seg.name == model->final_segment()) continue;
    const auto src = std::as_const(*source).params().segment(seg.name);
    if (src.size() != seg.length) {
      throw ConfigError("pretrained segment '" + seg.name + "' has a different shape");
    }
    std::copy(src.begin(), src.end(), model->params().segment(seg.name).begin());
  }
  model->pretrained = true;
  return model;
}

Checkpoint snapshot_checkpoint(const Backbone& model, const OptimizerState& optimizer,
                               const std::optional<EmaState>& ema, std::int64_t epoch) {
  Checkpoint ck;
  ck.architecture_id = model.architecture_id();
  ck.architecture_args = model.architecture_args();
  ck.num_classes = model.num_classes();
  ck.params = model.params();
  ck.optimizer = optimizer;
  if (ema) {
    const auto v = ema->teacher_params.values();
    ck.ema_params = std::vector<double>(v.begin(), v.end());
    ck.ema_decay = ema->beta;
  }
  ck.epoch = epoch;
  return ck;
}

TrainResult train_supervised(Backbone& model, const DatasetSplits& splits, const TransferConfig& cfg,
                             std::uint64_t seed, double shift_fraction) {
  cfg.validate();
  if (splits.train_labeled.empty()) throw Error("train_supervised: no labeled training data");
  if (splits.validation.empty()) {
    throw Error("train_supervised: validation split is empty, best-epoch selection is undefined");
  }
  const auto& pool = splits.train_labeled;
  const std::size_t n = pool.size();
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const std::size_t batches = (n + b - 1) / b;

  OptimizerConfig opt;
  opt.kind = OptimizerKind::adam;
  opt.learning_rate = cfg.learning_rate;
  opt.weight_decay = cfg.weight_decay;
  auto state = OptimizerState::for_params(model.params(), opt.kind);
  auto grad = model.params().zeros_like();

  TrainResult result;
  EarlyStopping stopper(cfg.patience);
  std::int64_t step = 0;
  for (std::int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto perm = seeded_permutation(n, derive_seed(seed, kEpochSalt, static_cast<std::uint64_t>(epoch)));
    MetricsRecord rec;
    rec.epoch = epoch;
    for (std::size_t k = 0; k < batches; ++k) {
      const std::size_t lo = k * b;
      const std::size_t hi = std::min(n, lo + b);
      auto rng = make_rng(derive_seed(seed, kAugSalt, static_cast<std::uint64_t>(step)));
      grad.fill(0.0);
      const double loss = supervised_step(model, pool, std::span(perm).subspan(lo, hi - lo), rng,
                                          shift_fraction, grad);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        result.aborted = true;
        result.diagnostic = "non-finite supervised loss at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step);
        return result;
      }
      optimizer_step(model.params(), grad, state, opt);
      ++step;
      rec.train_sup += loss / static_cast<double>(batches);
    }
    rec.train_total = rec.train_sup;
    rec.step = step;
    const auto val = evaluate(model, model.params(), splits.validation);
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);

    const bool stop = stopper.update(epoch, val.loss);
    if (stopper.improved()) {
      result.best = snapshot_checkpoint(model, state, std::nullopt, epoch);
      result.best_index = result.history.size() - 1;
    }
    if (stop) break;
  }

  const auto best_model = restore_backbone(result.best);
  result.test_accuracy = evaluate(*best_model, best_model->params(), splits.test).accuracy;
  result.test_evaluations = 1;
  result.history.back().test_acc = result.test_accuracy;
  return result;
}

}  // namespace sslmatch
