#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "sslmatch/data.hpp"
#include "sslmatch/image.hpp"
#include "sslmatch/synth.hpp"

using namespace sslmatch;
namespace fs = std::filesystem;

namespace {

std::vector<LabeledExample> labeled_pool(int classes, int per_class) {
  std::vector<LabeledExample> out;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      LabeledExample ex;
      ex.image = Image(2, 2, 1, static_cast<float>(out.size()) / 1000.0f);
      ex.label = c;
      ex.source_index = out.size();
      out.push_back(ex);
    }
  }
  return out;
}

class ImageFolder : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("sslmatch_data_" + std::to_string(::getpid()) + "_" +
                                         ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    SynthSpec spec;
    spec.classes = 2;
    spec.train_per_class = 3;
    spec.val_per_class = 1;
    spec.test_per_class = 2;
    spec.image_side = 16;
    write_synthetic_dataset(root_, spec);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path root_;
};

}  // namespace

TEST(Image, ReflectIndex) {
  EXPECT_EQ(reflect_index(-1, 5), 1);
  EXPECT_EQ(reflect_index(-2, 5), 2);
  EXPECT_EQ(reflect_index(5, 5), 3);
  EXPECT_EQ(reflect_index(6, 5), 2);
  EXPECT_EQ(reflect_index(3, 5), 3);
  EXPECT_EQ(reflect_index(-7, 5), 1);
  EXPECT_EQ(reflect_index(4, 1), 0);
  for (int i = -40; i < 40; ++i) {
    const int r = reflect_index(i, 7);
    EXPECT_GE(r, 0);
    EXPECT_LT(r, 7);
  }
}

TEST(Image, ThreeChannelAndResize) {
  Image mono(2, 3, 1, 0.25f);
  const auto rgb = to_three_channel(mono);
  EXPECT_EQ(rgb.channels, 3);
  EXPECT_EQ(rgb.at(2, 1, 2), 0.25f);
  EXPECT_EQ(to_three_channel(rgb), rgb);
  EXPECT_THROW(to_three_channel(Image(2, 2, 2)), Error);

  const auto big = resize_square(mono, 8);
  EXPECT_EQ(big.height, 8);
  EXPECT_EQ(big.width, 8);
  for (float v : big.pixels) EXPECT_NEAR(v, 0.25f, 1e-6);
  EXPECT_THROW(resize_square(mono, 0), Error);
  EXPECT_TRUE(is_valid(big));
  EXPECT_FALSE(is_valid(Image(2, 2, 1, 1.5f)));
}

TEST(LabeledSubset, BalancedAndDisjoint) {
  const auto train = labeled_pool(4, 30);
  const auto s = sample_labeled_subset(train, 40, 4, 99);
  ASSERT_EQ(s.labeled.size(), 40u);
  EXPECT_EQ(s.unlabeled.size(), 80u);
  std::map<int, int> per_class;
  std::set<std::size_t> seen;
  for (const auto& ex : s.labeled) {
    ++per_class[ex.label];
    EXPECT_EQ(train[ex.source_index].label, ex.label);
    seen.insert(ex.source_index);
  }
  for (int c = 0; c < 4; ++c) EXPECT_EQ(per_class[c], 10);
  for (const auto& u : s.unlabeled) EXPECT_TRUE(seen.insert(u.source_index).second);
  EXPECT_EQ(seen.size(), train.size());
}

TEST(LabeledSubset, SeededAndSeedSensitive) {
  const auto train = labeled_pool(2, 50);
  const auto a = sample_labeled_subset(train, 10, 2, 5);
  const auto b = sample_labeled_subset(train, 10, 2, 5);
  const auto c = sample_labeled_subset(train, 10, 2, 6);
  auto ids = [](const LabeledSubset& s) {
    std::vector<std::size_t> v;
    for (const auto& ex : s.labeled) v.push_back(ex.source_index);
    std::sort(v.begin(), v.end());
    return v;
  };
  EXPECT_EQ(ids(a), ids(b));
  EXPECT_NE(ids(a), ids(c));
}

TEST(LabeledSubset, Errors) {
  const auto train = labeled_pool(3, 4);
  EXPECT_THROW(sample_labeled_subset(train, 10, 3, 0), ConfigError);
  EXPECT_THROW(sample_labeled_subset(train, 15, 3, 0), ConfigError);
  EXPECT_THROW(sample_labeled_subset(train, 3, 0, 0), Error);
  const auto all = sample_labeled_subset(train, 12, 3, 0);
  EXPECT_EQ(all.labeled.size(), 12u);
  EXPECT_TRUE(all.unlabeled.empty());
}

TEST(Permutation, IsAPermutation) {
  for (std::size_t n : {0u, 1u, 2u, 17u}) {
    auto p = seeded_permutation(n, 3);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i], i);
  }
  EXPECT_EQ(seeded_permutation(20, 1), seeded_permutation(20, 1));
  EXPECT_NE(seeded_permutation(20, 1), seeded_permutation(20, 2));
}

TEST(BatchIterator, SizesAndCoverage) {
  BatchIterator it(40, 90, {16, 4, 7});
  EXPECT_EQ(it.batches_per_epoch(), 2u);
  EXPECT_EQ(it.unlabeled_batch_size(), 64u);
  std::set<std::size_t> unlabeled_seen;
  for (std::size_t e = 0; e < 2; ++e) {
    std::set<std::size_t> labeled_seen;
    for (const auto& b : it.epoch(e)) {
      EXPECT_EQ(b.labeled.size(), 16u);
      EXPECT_EQ(b.unlabeled.size(), 64u);
      for (auto i : b.labeled) EXPECT_TRUE(labeled_seen.insert(i).second) << "labeled repeat in an epoch";
      unlabeled_seen.insert(b.unlabeled.begin(), b.unlabeled.end());
    }
  }
  // 4 batches of 64 cover the 90-image pool.
  EXPECT_EQ(unlabeled_seen.size(), 90u);
}

TEST(BatchIterator, PureFunctionOfEpochAndIndex) {
  BatchIterator a(32, 64, {8, 2, 3});
  BatchIterator b(32, 64, {8, 2, 3});
  const auto late = a.batch(5, 3);
  (void)b.batch(0, 0);
  const auto again = b.batch(5, 3);
  EXPECT_EQ(late.labeled, again.labeled);
  EXPECT_EQ(late.unlabeled, again.unlabeled);
  EXPECT_THROW(a.batch(0, 4), Error);
}

TEST(BatchIterator, ConfigErrors) {
  EXPECT_THROW(BatchIterator(10, 10, {0, 1, 0}), ConfigError);
  EXPECT_THROW(BatchIterator(10, 10, {4, 0, 0}), ConfigError);
  EXPECT_THROW(BatchIterator(3, 10, {4, 1, 0}), ConfigError);
}

TEST_F(ImageFolder, LoadsAllSplits) {
  const auto splits = load_image_folder(root_, {}, {8, true});
  EXPECT_EQ(splits.class_names, (std::vector<std::string>{"DRUSEN", "NORMAL"}));
  EXPECT_EQ(splits.train_labeled.size(), 6u);
  EXPECT_EQ(splits.validation.size(), 2u);
  EXPECT_EQ(splits.test.size(), 4u);
  EXPECT_TRUE(splits.warnings.empty());
  for (const auto& ex : splits.train_labeled) {
    EXPECT_EQ(ex.image.channels, 3);
    EXPECT_EQ(ex.image.height, 8);
    EXPECT_TRUE(is_valid(ex.image));
  }
}

TEST_F(ImageFolder, MatchesInMemoryDataset) {
  SynthSpec spec;
  spec.classes = 2;
  spec.train_per_class = 3;
  spec.val_per_class = 1;
  spec.test_per_class = 2;
  spec.image_side = 16;
  const auto mem = make_synthetic_splits(spec, false);
  const auto disk = load_image_folder(root_, mem.class_names, {0, false});
  ASSERT_EQ(disk.train_labeled.size(), mem.train_labeled.size());
  for (std::size_t i = 0; i < mem.train_labeled.size(); ++i) {
    EXPECT_EQ(disk.train_labeled[i].label, mem.train_labeled[i].label);
    EXPECT_EQ(disk.train_labeled[i].image, mem.train_labeled[i].image);
  }
}

TEST_F(ImageFolder, MissingTrainClassIsError) {
  EXPECT_THROW(load_image_folder(root_, {"NORMAL", "CNV"}), Error);
  fs::remove_all(root_ / "test");
  EXPECT_THROW(load_image_folder(root_, {}), Error);
}

TEST_F(ImageFolder, EmptyValidationWarns) {
  for (const auto& e : fs::directory_iterator(root_ / "val" / "NORMAL")) fs::remove(e.path());
  const auto splits = load_image_folder(root_, {});
  EXPECT_EQ(splits.validation.size(), 1u);
  EXPECT_FALSE(splits.warnings.empty());
}

TEST_F(ImageFolder, CorruptFileIsSkipped) {
  { std::ofstream(root_ / "train" / "NORMAL" / "broken.png") << "definitely not png"; }
  const auto splits = load_image_folder(root_, {});
  EXPECT_EQ(splits.skipped_images, 1u);
  EXPECT_EQ(splits.train_labeled.size(), 6u);
}

TEST_F(ImageFolder, EmptyTrainClassIsError) {
  for (const auto& e : fs::directory_iterator(root_ / "train" / "DRUSEN")) fs::remove(e.path());
  EXPECT_THROW(load_image_folder(root_, {}), Error);
}
