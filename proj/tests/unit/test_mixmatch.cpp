#include <gtest/gtest.h>

#include <boost/math/special_functions/beta.hpp>
#include <cmath>

#include "sslmatch/backbone.hpp"
#include "sslmatch/mixmatch.hpp"
#include "support/stub_backbone.hpp"

using namespace sslmatch;
using sslmatch::testing::constant_image;
using sslmatch::testing::LookupBackbone;

namespace {

MixMatchBatch oracle_batch() {
  MixMatchBatch batch;
  batch.labeled.push_back({constant_image(0.1f), SoftLabel{{1.0, 0.0}}, 1.0});
  batch.unlabeled.push_back({constant_image(0.2f), SoftLabel{{0.7, 0.3}}, 1.0});
  return batch;
}

LookupBackbone oracle_model() {
  LookupBackbone m(2);
  m.set(0.1f, {0.5, 0.5});
  m.set(0.2f, {0.6, 0.4});
  return m;
}

// Expected value of max(L, 1 - L) for L ~ Beta(a, a), via the regularized
// incomplete beta function.
double folded_beta_mean(double a) { return 1.0 - boost::math::ibeta(a + 1.0, a, 0.5); }

}  // namespace

TEST(Sharpen, HandValueAndIdentity) {
  const auto s = sharpen({{0.6, 0.4}}, 0.5);
  EXPECT_NEAR(s[0], 0.36 / 0.52, 1e-12);
  EXPECT_NEAR(s[0], 0.692308, 1e-6);
  const SoftLabel p{{0.1, 0.2, 0.3, 0.4}};
  const auto same = sharpen(p, 1.0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(same[i], p[i], 1e-15);
}

TEST(Sharpen, Properties) {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    SoftLabel p{std::vector<double>(5)};
    double sum = 0;
    for (auto& v : p.probs) sum += v = uniform(rng, 0.01, 1.0);
    for (auto& v : p.probs) v /= sum;
    const double t = uniform(rng, 0.05, 2.0);
    const auto s = sharpen(p, t);
    EXPECT_TRUE(is_valid_soft_label(s, 1e-12));
    EXPECT_EQ(argmax(s), argmax(p));
    if (t < 1.0) EXPECT_GE(s[argmax(s)], p[argmax(p)] - 1e-12);
  }
}

TEST(Sharpen, TinyTemperatureApproachesOneHot) {
  const auto s = sharpen({{0.3, 0.25, 0.45}}, 1e-3);
  EXPECT_NEAR(s[2], 1.0, 1e-12);
  EXPECT_TRUE(std::isfinite(s[0]));
}

TEST(Sharpen, Errors) {
  EXPECT_THROW(sharpen({{0.5, 0.5}}, 0.0), ConfigError);
  EXPECT_THROW(sharpen({{0.0, 0.0}}, 0.5), Error);
  EXPECT_THROW(sharpen({{-0.1, 1.1}}, 0.5), Error);
}

TEST(Mixup, EndpointsAndConvexity) {
  const Image a(2, 2, 1, 0.2f), b(2, 2, 1, 0.8f);
  const SoftLabel ta = SoftLabel::one_hot(0, 2), tb = SoftLabel::one_hot(1, 2);
  const auto one = mixup(a, ta, b, tb, 1.0);
  EXPECT_EQ(one.image, a);
  EXPECT_EQ(one.target, ta);
  const auto zero = mixup(a, ta, b, tb, 0.0);
  EXPECT_NEAR(zero.image.pixels[0], 0.8f, 1e-7);
  EXPECT_EQ(zero.target, tb);
  const auto mid = mixup(a, ta, b, tb, 0.75);
  EXPECT_NEAR(mid.image.pixels[3], 0.75 * 0.2 + 0.25 * 0.8, 1e-6);
  EXPECT_NEAR(mid.target[0], 0.75, 1e-15);
  EXPECT_TRUE(is_valid_soft_label(mid.target));
}

TEST(Mixup, Errors) {
  const Image a(2, 2, 1), b(3, 3, 1);
  EXPECT_THROW(mixup(a, SoftLabel::uniform(2), b, SoftLabel::uniform(2), 0.5), Error);
  EXPECT_THROW(mixup(a, SoftLabel::uniform(2), a, SoftLabel::uniform(3), 0.5), Error);
  EXPECT_THROW(mixup(a, SoftLabel::uniform(2), a, SoftLabel::uniform(2), 1.5), Error);
}

TEST(MixCoefficient, RangeAndMonteCarloMean) {
  for (double alpha : {0.25, 0.75, 2.0}) {
    Rng rng = make_rng(static_cast<std::uint64_t>(alpha * 100));
    const int n = 200000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      const double lam = sample_mix_coefficient(alpha, rng);
      ASSERT_GE(lam, 0.5);
      ASSERT_LE(lam, 1.0);
      sum += lam;
    }
    EXPECT_NEAR(sum / n, folded_beta_mean(alpha), 0.005) << "alpha " << alpha;
  }
  Rng rng = make_rng(0);
  EXPECT_THROW(sample_mix_coefficient(0.0, rng), ConfigError);
}

TEST(Rampup, EndpointsAndMidpoint) {
  MixMatchConfig cfg;
  cfg.lambda_u_max = 100.0;
  cfg.rampup_steps = 400;
  EXPECT_EQ(rampup_lambda(0, cfg), 0.0);
  EXPECT_DOUBLE_EQ(rampup_lambda(200, cfg), 50.0);
  EXPECT_DOUBLE_EQ(rampup_lambda(400, cfg), 100.0);
  EXPECT_DOUBLE_EQ(rampup_lambda(10000, cfg), 100.0);
  EXPECT_THROW(rampup_lambda(-1, cfg), Error);
  cfg.rampup_steps = 0;
  EXPECT_THROW(rampup_lambda(1, cfg), ConfigError);
}

TEST(MixMatchLoss, OracleMicroBatch) {
  const auto model = oracle_model();
  const auto loss = mixmatch_loss(model, oracle_batch(), 25.0, 1, 1);
  EXPECT_NEAR(loss.supervised, std::log(2.0), 1e-12);
  EXPECT_NEAR(loss.unsupervised, 0.02, 1e-12);
  EXPECT_NEAR(loss.total, 1.193147, 1e-6);
  EXPECT_EQ(loss.lambda_u, 25.0);
}

TEST(MixMatchLoss, ZeroWeightIsSupervisedOnly) {
  const auto model = oracle_model();
  const auto loss = mixmatch_loss(model, oracle_batch(), 0.0, 1, 1);
  EXPECT_DOUBLE_EQ(loss.total, loss.supervised);
}

TEST(MixMatchLoss, NormalizesByKTimesB) {
  const std::vector<SoftLabel> lt = {SoftLabel::one_hot(0, 2)}, lp = {SoftLabel{{0.5, 0.5}}};
  const std::vector<SoftLabel> ut(4, SoftLabel{{0.7, 0.3}}), up(4, SoftLabel{{0.6, 0.4}});
  const auto loss = mixmatch_loss_from_predictions(lt, lp, ut, up, 10.0, 2, 2);
  EXPECT_NEAR(loss.supervised, std::log(2.0) / 2, 1e-12);
  EXPECT_NEAR(loss.unsupervised, 4 * 0.02 / 4, 1e-12);
  EXPECT_THROW(mixmatch_loss_from_predictions(lt, lp, ut, up, -1.0, 2, 2), Error);
  EXPECT_THROW(mixmatch_loss_from_predictions(lt, lp, ut, up, 1.0, 0, 2), Error);
  EXPECT_THROW(mixmatch_loss_from_predictions(lt, {}, ut, up, 1.0, 2, 2), Error);
}

TEST(GuessLabel, AveragesSoftmaxOverViews) {
  LookupBackbone model(3);
  model.set(0.4f, {0.2, 0.3, 0.5});
  Rng rng = make_rng(1);
  const auto q = guess_label(model, constant_image(0.4f), 3, rng);
  EXPECT_NEAR(q[2], 0.5, 1e-12);
  EXPECT_TRUE(is_valid_soft_label(q));
  EXPECT_THROW(guess_label(model, constant_image(0.4f), 0, rng), ConfigError);
}

TEST(ComposeBatch, ShapesAndTargets) {
  TinyCnn net({3, 4, 4, 3});
  net.initialize(2);
  std::vector<LabeledExample> xs;
  std::vector<UnlabeledExample> us;
  for (int i = 0; i < 4; ++i) {
    xs.push_back({Image(8, 8, 3, 0.1f * i), i % 3, static_cast<std::size_t>(i)});
    us.push_back({Image(8, 8, 3, 0.05f * i + 0.3f), static_cast<std::size_t>(i)});
  }
  std::vector<const LabeledExample*> xp;
  std::vector<const UnlabeledExample*> up;
  for (auto& x : xs) xp.push_back(&x);
  for (auto& u : us) up.push_back(&u);
  MixMatchConfig cfg;
  cfg.k = 2;
  Rng rng = make_rng(5);
  const auto batch = compose_batch(net, xp, up, cfg, rng);
  ASSERT_EQ(batch.labeled.size(), 4u);
  ASSERT_EQ(batch.unlabeled.size(), 8u);
  for (const auto& group : {batch.labeled, batch.unlabeled}) {
    for (const auto& ex : group) {
      EXPECT_GE(ex.lam, 0.5);
      EXPECT_TRUE(is_valid_soft_label(ex.target));
      EXPECT_TRUE(is_valid(ex.image));
    }
  }
  // Each labeled target keeps at least half of its one-hot mass.
  for (std::size_t i = 0; i < 4; ++i) EXPECT_GE(batch.labeled[i].target[xs[i].label], 0.5 - 1e-12);

  Rng again = make_rng(5);
  const auto repeat = compose_batch(net, xp, up, cfg, again);
  EXPECT_EQ(repeat.unlabeled[3].image, batch.unlabeled[3].image);

  xp.pop_back();
  EXPECT_THROW(compose_batch(net, xp, up, cfg, rng), Error);
}

TEST(MixMatchConfig, Validation) {
  MixMatchConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.k = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.temperature = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.alpha = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.lambda_u_max = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
