#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "sslmatch/synth.hpp"

using namespace sslmatch;

TEST(Synth, ClassNames) {
  EXPECT_EQ(synth_class_names(4), (std::vector<std::string>{"NORMAL", "DRUSEN", "CNV", "DME"}));
  EXPECT_EQ(synth_class_names(5).back(), "CLASS4");
  EXPECT_EQ(synth_class_names(2).size(), 2u);
}

TEST(Synth, SplitSizesAndBalance) {
  SynthSpec spec;
  spec.train_per_class = 5;
  spec.val_per_class = 2;
  spec.test_per_class = 3;
  spec.image_side = 16;
  const auto s = make_synthetic_splits(spec);
  EXPECT_EQ(s.train_labeled.size(), 20u);
  EXPECT_EQ(s.validation.size(), 8u);
  EXPECT_EQ(s.test.size(), 12u);
  std::map<int, int> per_class;
  for (const auto& ex : s.test) ++per_class[ex.label];
  for (int c = 0; c < 4; ++c) EXPECT_EQ(per_class[c], 3);
  for (const auto& ex : s.train_labeled) {
    EXPECT_EQ(ex.image.channels, 3);
    EXPECT_TRUE(is_valid(ex.image));
  }
}

TEST(Synth, QuantizedAndSeeded) {
  SynthSpec spec;
  spec.image_side = 12;
  Rng a = make_rng(3), b = make_rng(3);
  const auto x = synth_image(2, spec, a);
  EXPECT_EQ(x, synth_image(2, spec, b));
  for (float v : x.pixels) EXPECT_NEAR(v * 255.0f, std::round(v * 255.0f), 1e-3);

  SynthSpec other = spec;
  other.seed = 1;
  spec.train_per_class = other.train_per_class = 1;
  spec.val_per_class = other.val_per_class = 1;
  spec.test_per_class = other.test_per_class = 1;
  EXPECT_NE(make_synthetic_splits(spec).train_labeled[0].image, make_synthetic_splits(other).train_labeled[0].image);
}

TEST(Synth, ClassMeansDiffer) {
  SynthSpec spec;
  spec.image_side = 16;
  spec.noise = 0.0;
  Rng rng = make_rng(0);
  std::vector<double> means;
  for (int c = 0; c < 4; ++c) {
    double acc = 0;
    for (int i = 0; i < 20; ++i) {
      const auto img = synth_image(c, spec, rng);
      for (float v : img.pixels) acc += v;
    }
    means.push_back(acc);
  }
  // CNV adds a bright lesion, DME dark cysts.
  EXPECT_GT(means[2], means[0]);
  EXPECT_LT(means[3], means[0]);
}

TEST(Synth, Validation) {
  SynthSpec spec;
  spec.classes = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.image_side = 4;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.val_per_class = -1;
  EXPECT_THROW(spec.validate(), ConfigError);
  spec = {};
  spec.noise = -0.1;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(make_auxiliary_splits(0, 8, 0), ConfigError);
}

TEST(Synth, AuxiliaryTaskIsDisjointFourWay) {
  const auto aux = make_auxiliary_splits(3, 8, 1);
  EXPECT_EQ(aux.num_classes(), 4);
  EXPECT_EQ(aux.train_labeled.size(), 12u);
  EXPECT_EQ(aux.train_labeled.front().image.channels, 3);
  EXPECT_EQ(aux.class_names.size(), 4u);
}
