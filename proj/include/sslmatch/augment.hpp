#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sslmatch/common.hpp"
#include "sslmatch/image.hpp"

namespace sslmatch {

enum class AugmentKind { weak, strong };

enum class StrongOp {
  identity,
  brightness,
  contrast,
  sharpness,
  equalize,
  rotate,
  shear_x,
  shear_y,
  translate_x,
  translate_y,
};

std::string_view to_string(StrongOp op);
StrongOp parse_strong_op(std::string_view name);

/// One entry of the strong catalog: the op and the range its magnitude is
/// drawn from uniformly.
struct StrongOpRange {
  StrongOp op = StrongOp::identity;
  double lo = 0.0;
  double hi = 0.0;

  friend bool operator==(const StrongOpRange&, const StrongOpRange&) = default;
};

struct AugmentationSpec {
  AugmentKind kind = AugmentKind::weak;
  double shift_fraction = 0.125;
  std::vector<StrongOpRange> strong_ops;
  int ops_per_image = 2;

  static AugmentationSpec weak_default();
  static AugmentationSpec strong_default();

  /// Throws ConfigError when a field is out of its documented range.
  void validate() const;
};

/// Monochrome-safe RandAugment subset with magnitude ranges:
/// brightness is an additive offset, contrast/sharpness are (1 + m) blend
/// factors, rotate is in degrees, shear is a slope and translate a fraction
/// of the side.
std::vector<StrongOpRange> default_strong_ops();

/// "brightness:[-0.3,0.3], rotate:[-30,30]" <-> list of ranges.
std::vector<StrongOpRange> parse_strong_ops(std::string_view text);
std::string format_strong_ops(const std::vector<StrongOpRange>& ops);

Image flip_horizontal(const Image& img);

/// Shifts content by (dx, dy) pixels; vacated pixels are filled by reflection.
Image translate_reflect(const Image& img, int dx, int dy);

/// Flip with probability 0.5 then a random shift of up to
/// shift_fraction * side pixels on each axis.
Image weak_augment(const Image& img, Rng& rng, double shift_fraction = 0.125);

/// Applies one strong op at a fixed magnitude. Output is clamped to [0, 1].
Image apply_strong_op(const Image& img, StrongOp op, double magnitude);

/// Applies spec.ops_per_image ops drawn uniformly (with replacement) from
/// spec.strong_ops, each at a uniformly drawn magnitude.
Image strong_augment(const Image& img, Rng& rng, const AugmentationSpec& spec);

/// Augmentation pipeline selected by AugmentationSpec::kind.
class Augmenter {
 public:
  explicit Augmenter(AugmentationSpec spec);

  [[nodiscard]] AugmentKind kind() const { return spec_.kind; }
  [[nodiscard]] const AugmentationSpec& spec() const { return spec_; }

  Image operator()(const Image& img, Rng& rng) const;

 private:
  AugmentationSpec spec_;
};

}  // namespace sslmatch
