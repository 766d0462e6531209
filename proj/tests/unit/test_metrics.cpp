#include <gtest/gtest.h>

#include "sslmatch/metrics.hpp"
#include "support/stub_backbone.hpp"

using namespace sslmatch;
using sslmatch::testing::constant_image;
using sslmatch::testing::LookupBackbone;

namespace {

std::int64_t stop_epoch(int patience, const std::vector<double>& losses) {
  EarlyStopping es(patience);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (es.update(static_cast<std::int64_t>(i) + 1, losses[i])) return static_cast<std::int64_t>(i) + 1;
  }
  return -1;
}

}  // namespace

TEST(EarlyStopping, ConstantLossStopsAtPatiencePlusOne) {
  EXPECT_EQ(stop_epoch(25, std::vector<double>(50, 1.0)), 26);
}

TEST(EarlyStopping, StrictImprovementNeverStops) {
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(2.0 - 0.01 * i);
  EXPECT_EQ(stop_epoch(25, losses), -1);
}

TEST(EarlyStopping, TiesDoNotResetPatience) {
  std::vector<double> losses = {1.0, 0.5};
  losses.resize(40, 0.5);
  EXPECT_EQ(stop_epoch(3, losses), 5);
}

TEST(EarlyStopping, StopsAtBestPlusPatience) {
  std::vector<double> losses = {3, 2, 1, 1.5, 0.9, 1.2, 1.3, 1.1, 1.0, 1.0, 1.0};
  EarlyStopping es(4);
  std::int64_t stopped = -1;
  for (std::size_t i = 0; i < losses.size() && stopped < 0; ++i) {
    if (es.update(static_cast<std::int64_t>(i) + 1, losses[i])) stopped = static_cast<std::int64_t>(i) + 1;
  }
  EXPECT_EQ(es.best_epoch(), 5);
  EXPECT_EQ(es.best_loss(), 0.9);
  EXPECT_EQ(stopped, 9);
}

TEST(EarlyStopping, ZeroPatienceDisables) {
  EXPECT_EQ(stop_epoch(0, std::vector<double>(100, 1.0)), -1);
}

TEST(BestEpoch, EarliestMinimum) {
  std::vector<MetricsRecord> h(4);
  const double losses[] = {0.9, 0.4, 0.6, 0.4};
  for (std::size_t i = 0; i < h.size(); ++i) {
    h[i].epoch = static_cast<std::int64_t>(i) + 1;
    h[i].val_loss = losses[i];
  }
  EXPECT_EQ(best_epoch_index(h), 1u);
  EXPECT_THROW(best_epoch_index({}), Error);
}

TEST(Evaluate, LossAndAccuracy) {
  LookupBackbone model(2);
  model.set(0.1f, {0.8, 0.2});
  model.set(0.2f, {0.4, 0.6});
  std::vector<LabeledExample> ex = {
      {constant_image(0.1f), 0, 0}, {constant_image(0.2f), 0, 1}, {constant_image(0.2f), 1, 2}};
  const auto r = evaluate(model, model.params(), ex, 2);
  EXPECT_EQ(r.count, 3u);
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.loss, (-std::log(0.8) - std::log(0.4) - std::log(0.6)) / 3.0, 1e-12);
  const auto empty = evaluate(model, model.params(), {});
  EXPECT_EQ(empty.count, 0u);
}
