#include <gtest/gtest.h>

#include <numeric>

#include "sslmatch/augment.hpp"

using namespace sslmatch;

namespace {

Image gradient(int side = 8, int channels = 1) {
  Image img(side, side, channels);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) img.at(c, y, x) = static_cast<float>(x + side * y) / (side * side);
  return img;
}

double mean(const Image& img) {
  return std::accumulate(img.pixels.begin(), img.pixels.end(), 0.0) / static_cast<double>(img.pixels.size());
}

}  // namespace

TEST(Flip, InvolutionAndMirror) {
  const auto img = gradient();
  const auto f = flip_horizontal(img);
  EXPECT_EQ(f.at(0, 2, 0), img.at(0, 2, 7));
  EXPECT_EQ(flip_horizontal(f), img);
}

TEST(Translate, ZeroIsIdentityAndShiftMovesContent) {
  const auto img = gradient();
  EXPECT_EQ(translate_reflect(img, 0, 0), img);
  const auto t = translate_reflect(img, 2, 1);
  EXPECT_EQ(t.at(0, 3, 4), img.at(0, 2, 2));
  // Vacated column 0 is filled by reflection of column 2.
  EXPECT_EQ(t.at(0, 3, 0), img.at(0, 2, 2));
}

TEST(WeakAugment, ShiftFractionZeroIsFlipOrIdentity) {
  const auto img = gradient();
  Rng rng = make_rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto out = weak_augment(img, rng, 0.0);
    EXPECT_TRUE(out == img || out == flip_horizontal(img));
  }
}

TEST(WeakAugment, SeededAndShapePreserving) {
  const auto img = gradient(16, 3);
  Rng a = make_rng(4);
  Rng b = make_rng(4);
  for (int i = 0; i < 5; ++i) {
    const auto x = weak_augment(img, a);
    EXPECT_EQ(x, weak_augment(img, b));
    EXPECT_TRUE(x.same_shape(img));
    EXPECT_TRUE(is_valid(x));
  }
}

TEST(StrongOps, IdentityMagnitudes) {
  const auto img = gradient();
  EXPECT_EQ(apply_strong_op(img, StrongOp::identity, 5.0), img);
  EXPECT_EQ(apply_strong_op(img, StrongOp::brightness, 0.0), img);
  for (auto op : {StrongOp::rotate, StrongOp::shear_x, StrongOp::shear_y, StrongOp::translate_x,
                  StrongOp::translate_y, StrongOp::contrast}) {
    const auto out = apply_strong_op(img, op, 0.0);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(out.pixels[i], img.pixels[i], 1e-6);
  }
}

TEST(StrongOps, BrightnessIsAdditiveAndClamped) {
  const Image flat(4, 4, 1, 0.5f);
  EXPECT_EQ(apply_strong_op(flat, StrongOp::brightness, 0.25).pixels[0], 0.75f);
  EXPECT_EQ(apply_strong_op(flat, StrongOp::brightness, 0.9).pixels[0], 1.0f);
  EXPECT_EQ(apply_strong_op(flat, StrongOp::brightness, -0.9).pixels[0], 0.0f);
}

TEST(StrongOps, ContrastKeepsMean) {
  const auto img = gradient();
  const auto out = apply_strong_op(img, StrongOp::contrast, -0.5);
  EXPECT_NEAR(mean(out), mean(img), 1e-6);
}

TEST(StrongOps, EqualizeSpreadsRange) {
  Image img(4, 4, 1, 0.4f);
  for (int x = 0; x < 4; ++x) img.at(0, 0, x) = 0.5f;
  const auto out = apply_strong_op(img, StrongOp::equalize, 0.0);
  EXPECT_FLOAT_EQ(out.at(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(out.at(0, 3, 3), 0.0f);
}

TEST(StrongOps, AllOutputsStayInRange) {
  const auto img = gradient(12, 3);
  Rng rng = make_rng(9);
  const auto spec = AugmentationSpec::strong_default();
  for (int i = 0; i < 50; ++i) {
    const auto out = strong_augment(img, rng, spec);
    EXPECT_TRUE(out.same_shape(img));
    EXPECT_TRUE(is_valid(out));
  }
}

TEST(StrongOps, NamesRoundTrip) {
  for (const auto& r : default_strong_ops()) EXPECT_EQ(parse_strong_op(to_string(r.op)), r.op);
  EXPECT_THROW(parse_strong_op("solarize"), ConfigError);
}

TEST(StrongOpList, ParseAndFormat) {
  const auto ops = parse_strong_ops("brightness:[-0.3,0.3], rotate:[-30, 30]");
  ASSERT_EQ(ops.size(), 2u);
  EXPECT_EQ(ops[1], (StrongOpRange{StrongOp::rotate, -30.0, 30.0}));
  EXPECT_EQ(parse_strong_ops(format_strong_ops(default_strong_ops())), default_strong_ops());
  EXPECT_TRUE(parse_strong_ops("").empty());
  EXPECT_THROW(parse_strong_ops("rotate[-1,1]"), ConfigError);
  EXPECT_THROW(parse_strong_ops("rotate:[1]"), ConfigError);
  EXPECT_THROW(parse_strong_ops("rotate:[a,b]"), ConfigError);
}

TEST(AugmentationSpec, Validation) {
  EXPECT_NO_THROW(AugmentationSpec::weak_default().validate());
  EXPECT_NO_THROW(AugmentationSpec::strong_default().validate());
  auto s = AugmentationSpec::strong_default();
  s.ops_per_image = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = AugmentationSpec::strong_default();
  s.strong_ops.clear();
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(Augmenter{s}, ConfigError);
  s = AugmentationSpec::strong_default();
  s.strong_ops = {{StrongOp::rotate, 5.0, -5.0}};
  EXPECT_THROW(s.validate(), ConfigError);
  auto w = AugmentationSpec::weak_default();
  w.shift_fraction = 0.6;
  EXPECT_THROW(w.validate(), ConfigError);
}

TEST(Augmenter, DispatchesOnKind) {
  const auto img = gradient();
  auto spec = AugmentationSpec::strong_default();
  spec.strong_ops = {{StrongOp::brightness, 0.1, 0.1}};
  spec.ops_per_image = 1;
  Augmenter strong(spec);
  Rng rng = make_rng(0);
  EXPECT_EQ(strong(img, rng), apply_strong_op(img, StrongOp::brightness, 0.1));
  EXPECT_EQ(Augmenter(AugmentationSpec::weak_default()).kind(), AugmentKind::weak);
}
