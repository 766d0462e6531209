#include <gtest/gtest.h>

#include <cmath>

#include "sslmatch/fixmatch.hpp"
#include "support/stub_backbone.hpp"

using namespace sslmatch;
using sslmatch::testing::constant_image;
using sslmatch::testing::LookupBackbone;

namespace {

FixMatchConfig oracle_config() {
  FixMatchConfig cfg;
  cfg.mu = 1;
  cfg.tau = 0.7;
  cfg.lambda_u = 5.0;
  cfg.strong.strong_ops = {{StrongOp::brightness, 0.25, 0.25}};
  cfg.strong.ops_per_image = 1;
  return cfg;
}

LookupBackbone oracle_model() {
  LookupBackbone m(2);
  m.set(0.0f, {0.5, 0.5});   // labeled weak view
  m.set(0.5f, {0.8, 0.2});   // unlabeled weak view
  m.set(0.75f, {0.6, 0.4});  // unlabeled strong view
  return m;
}

struct MicroBatch {
  LabeledExample x{constant_image(0.0f), 0, 0};
  UnlabeledExample u{constant_image(0.5f), 1};
  std::vector<const LabeledExample*> xs{&x};
  std::vector<const UnlabeledExample*> us{&u};
};

}  // namespace

TEST(ConfidenceMask, StrictThreshold) {
  EXPECT_FALSE(confidence_mask({{0.65, 0.35}}, 0.7));
  EXPECT_TRUE(confidence_mask({{0.71, 0.29}}, 0.7));
  EXPECT_FALSE(confidence_mask({{0.7, 0.3}}, 0.7));
  EXPECT_TRUE(confidence_mask({{0.5, 0.5}}, 0.0));
  EXPECT_FALSE(confidence_mask({{1.0, 0.0}}, 1.0));
}

TEST(ConfidenceMask, MonotoneInTau) {
  Rng rng = make_rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const double a = uniform(rng, 0, 1);
    const SoftLabel q{{a, 1 - a}};
    const double t1 = uniform(rng, 0, 1), t2 = uniform(rng, 0, 1);
    const double lo = std::min(t1, t2), hi = std::max(t1, t2);
    if (confidence_mask(q, hi)) EXPECT_TRUE(confidence_mask(q, lo));
  }
}

TEST(PseudoLabel, ArgmaxTieBreakAndOneHot) {
  UnlabeledExample u{constant_image(0.1f), 0};
  auto pl = make_pseudo_label(u, {{0.1, 0.7, 0.1, 0.1}}, 0.7);
  EXPECT_EQ(pl.q_hat, 1);
  EXPECT_FALSE(pl.confident);
  pl = make_pseudo_label(u, {{0.5, 0.5}}, 0.3);
  EXPECT_EQ(pl.q_hat, 0);
  pl = make_pseudo_label(u, SoftLabel::one_hot(2, 3), 0.999);
  EXPECT_EQ(pl.q_hat, 2);
  EXPECT_TRUE(pl.confident);
  EXPECT_EQ(pl.u, &u);
}

TEST(PseudoLabel, UsesWeakView) {
  LookupBackbone model(2);
  model.set(0.3f, {0.9, 0.1});
  UnlabeledExample u{constant_image(0.3f), 0};
  Rng rng = make_rng(0);
  const auto pl = pseudo_label(model, u, rng, FixMatchConfig{});
  EXPECT_NEAR(pl.q[0], 0.9, 1e-12);
  EXPECT_TRUE(pl.confident);
}

TEST(FixMatchLoss, OracleMicroBatch) {
  MicroBatch mb;
  const auto model = oracle_model();
  Rng rng = make_rng(1);
  const auto loss = fixmatch_loss(model, mb.xs, mb.us, oracle_config(), rng);
  EXPECT_NEAR(loss.supervised, std::log(2.0), 1e-12);
  EXPECT_NEAR(loss.unsupervised, -std::log(0.6), 1e-12);
  EXPECT_NEAR(loss.total, 3.247276, 1e-6);
  EXPECT_EQ(loss.mask_rate, 1.0);
}

TEST(FixMatchLoss, BelowThresholdContributesNothing) {
  MicroBatch mb;
  auto model = oracle_model();
  model.set(0.5f, {0.65, 0.35});
  Rng rng = make_rng(1);
  const auto loss = fixmatch_loss(model, mb.xs, mb.us, oracle_config(), rng);
  EXPECT_EQ(loss.unsupervised, 0.0);
  EXPECT_EQ(loss.mask_rate, 0.0);
  EXPECT_NEAR(loss.total, std::log(2.0), 1e-12);
}

TEST(FixMatchLoss, DenominatorIsMuTimesB) {
  // Two unlabeled images, one confident: the unlabeled term is halved, not averaged over survivors.
  LabeledExample x{constant_image(0.0f), 0, 0};
  UnlabeledExample u1{constant_image(0.5f), 1}, u2{constant_image(0.25f), 2};
  std::vector<const LabeledExample*> xs{&x};
  std::vector<const UnlabeledExample*> us{&u1, &u2};
  auto model = oracle_model();
  model.set(0.25f, {0.5, 0.5});
  auto cfg = oracle_config();
  cfg.mu = 2;
  Rng rng = make_rng(2);
  const auto loss = fixmatch_loss(model, xs, us, cfg, rng);
  EXPECT_NEAR(loss.unsupervised, -std::log(0.6) / 2, 1e-12);
  EXPECT_EQ(loss.mask_rate, 0.5);
}

TEST(FixMatchLoss, RatioMismatchIsError) {
  MicroBatch mb;
  const auto model = oracle_model();
  auto cfg = oracle_config();
  cfg.mu = 3;
  Rng rng = make_rng(1);
  EXPECT_THROW(fixmatch_loss(model, mb.xs, mb.us, cfg, rng), Error);
}

TEST(FixMatchBatch, SeededComposition) {
  TinyCnn net({3, 4, 4, 2});
  net.initialize(3);
  std::vector<LabeledExample> xs;
  std::vector<UnlabeledExample> us;
  for (int i = 0; i < 2; ++i) xs.push_back({Image(8, 8, 3, 0.2f + 0.1f * i), i, 0});
  for (int i = 0; i < 8; ++i) us.push_back({Image(8, 8, 3, 0.05f * i), 0});
  std::vector<const LabeledExample*> xp;
  std::vector<const UnlabeledExample*> up;
  for (auto& x : xs) xp.push_back(&x);
  for (auto& u : us) up.push_back(&u);
  FixMatchConfig cfg;
  Rng a = make_rng(8), b = make_rng(8);
  const auto ba = prepare_fixmatch_batch(net, xp, up, cfg, a);
  const auto bb = prepare_fixmatch_batch(net, xp, up, cfg, b);
  EXPECT_EQ(ba.batch_size, 2);
  EXPECT_EQ(ba.unlabeled_strong.size(), 8u);
  EXPECT_EQ(ba.pseudo_labels, bb.pseudo_labels);
  EXPECT_EQ(ba.unlabeled_strong[5], bb.unlabeled_strong[5]);
  EXPECT_EQ(ba.labels, (std::vector<int>{0, 1}));
}

TEST(FixMatchConfig, Validation) {
  FixMatchConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.mu = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.tau = 1.2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda_u = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.strong.strong_ops.clear();
  EXPECT_THROW(cfg.validate(), ConfigError);
}
