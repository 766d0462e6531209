#include "sslmatch/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace sslmatch {
namespace {

constexpr std::array<std::pair<StrongOp, std::string_view>, 10> kOpNames{{
    {StrongOp::identity, "identity"},
    {StrongOp::brightness, "brightness"},
    {StrongOp::contrast, "contrast"},
    {StrongOp::sharpness, "sharpness"},
    {StrongOp::equalize, "equalize"},
    {StrongOp::rotate, "rotate"},
    {StrongOp::shear_x, "shear_x"},
    {StrongOp::shear_y, "shear_y"},
    {StrongOp::translate_x, "translate_x"},
    {StrongOp::translate_y, "translate_y"},
}};

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

// Inverse affine warp: the destination pixel (x, y) reads the source at
// center + M * ((x, y) - center) + t, bilinear with reflection.
Image warp_affine(const Image& img, double m00, double m01, double m10, double m11, double tx,
                  double ty) {
  Image out(img.height, img.width, img.channels);
  const double cx = (img.width - 1) * 0.5;
  const double cy = (img.height - 1) * 0.5;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = cx + m00 * dx + m01 * dy + tx;
      const double sy = cy + m10 * dx + m11 * dy + ty;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double wx = sx - fx;
      const double wy = sy - fy;
      const int x0 = reflect_index(static_cast<int>(fx), img.width);
      const int x1 = reflect_index(static_cast<int>(fx) + 1, img.width);
      const int y0 = reflect_index(static_cast<int>(fy), img.height);
      const int y1 = reflect_index(static_cast<int>(fy) + 1, img.height);
      for (int c = 0; c < img.channels; ++c) {
        const double v = (1 - wy) * ((1 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1)) +
                         wy * ((1 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1));
        out.at(c, y, x) = clamp01(v);
      }
    }
  }
  return out;
}

Image box_blur3(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (int ky = -1; ky <= 1; ++ky) {
          for (int kx = -1; kx <= 1; ++kx) {
            const double w = (kx == 0 && ky == 0) ? 5.0 : 1.0;
            acc += w * img.at(c, reflect_index(y + ky, img.height), reflect_index(x + kx, img.width));
          }
        }
        out.at(c, y, x) = static_cast<float>(acc / 13.0);
      }
    }
  }
  return out;
}

Image equalize(const Image& img) {
  Image out(img.height, img.width, img.channels);
  const auto plane = img.plane_size();
  for (int c = 0; c < img.channels; ++c) {
    std::array<std::size_t, 256> hist{};
    const float* src = img.pixels.data() + c * plane;
    auto bin = [](float v) { return static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); };
    for (std::size_t i = 0; i < plane; ++i) ++hist[bin(src[i])];
    std::array<double, 256> cdf{};
    std::size_t running = 0;
    for (int b = 0; b < 256; ++b) {
      running += hist[b];
      cdf[b] = static_cast<double>(running);
    }
    const auto first = std::find_if(cdf.begin(), cdf.end(), [](double v) { return v > 0; });
    const double cdf_min = first == cdf.end() ? 0.0 : *first;
    const double denom = static_cast<double>(plane) - cdf_min;
    float* dst = out.pixels.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[i] = denom <= 0 ? src[i] : clamp01((cdf[bin(src[i])] - cdf_min) / denom);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(StrongOp op) {
  for (const auto& [value, name] : kOpNames) {
    if (value == op) return name;
  }
  return "unknown";
}

StrongOp parse_strong_op(std::string_view name) {
  for (const auto& [value, known] : kOpNames) {
    if (known == name) return value;
  }
  throw ConfigError("unknown strong augmentation op '" + std::string(name) + "'");
}

std::vector<StrongOpRange> default_strong_ops() {
  return {
      {StrongOp::identity, 0.0, 0.0},      {StrongOp::brightness, -0.3, 0.3},
      {StrongOp::contrast, -0.5, 0.5},     {StrongOp::sharpness, -0.5, 0.9},
      {StrongOp::equalize, 0.0, 0.0},      {StrongOp::rotate, -30.0, 30.0},
      {StrongOp::shear_x, -0.3, 0.3},      {StrongOp::shear_y, -0.3, 0.3},
      {StrongOp::translate_x, -0.3, 0.3},  {StrongOp::translate_y, -0.3, 0.3},
  };
}

AugmentationSpec AugmentationSpec::weak_default() { return AugmentationSpec{}; }

AugmentationSpec AugmentationSpec::strong_default() {
  AugmentationSpec spec;
  spec.kind = AugmentKind::strong;
  spec.strong_ops = default_strong_ops();
  return spec;
}

void AugmentationSpec::validate() const {
  if (!(shift_fraction >= 0.0 && shift_fraction <= 0.5)) {
    throw ConfigError("shift_fraction must lie in [0, 0.5]");
  }
  if (kind == AugmentKind::strong) {
    if (ops_per_image < 1) throw ConfigError("ops_per_image must be >= 1");
    if (strong_ops.empty()) throw ConfigError("strong augmentation needs at least one op");
    for (const auto& r : strong_ops) {
      if (r.lo > r.hi) throw ConfigError("magnitude range of '" + std::string(to_string(r.op)) + "' is inverted");
    }
  }
}

std::vector<StrongOpRange> parse_strong_ops(std::string_view text) {
  std::vector<StrongOpRange> ops;
  std::size_t pos = 0;
  auto skip_ws = [&] {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t' || text[pos] == ',')) ++pos;
  };
  skip_ws();
  while (pos < text.size()) {
    const auto colon = text.find(':', pos);
    const auto open = text.find('[', pos);
    const auto close = text.find(']', pos);
    if (colon == std::string_view::npos || open == std::string_view::npos ||
        close == std::string_view::npos || !(colon < open && open < close)) {
      throw ConfigError("malformed strong op list near '" + std::string(text.substr(pos)) + "'");
    }
    auto name = text.substr(pos, colon - pos);
    while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
    const std::string range(text.substr(open + 1, close - open - 1));
    const auto comma = range.find(',');
    if (comma == std::string::npos) throw ConfigError("magnitude range needs [lo, hi]: " + range);
    StrongOpRange r;
    r.op = parse_strong_op(name);
    try {
      r.lo = std::stod(range.substr(0, comma));
      r.hi = std::stod(range.substr(comma + 1));
    } catch (const std::exception&) {
      throw ConfigError("non-numeric magnitude range: [" + range + "]");
    }
    ops.push_back(r);
    pos = close + 1;
    skip_ws();
  }
  return ops;
}

std::string format_strong_ops(const std::vector<StrongOpRange>& ops) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (i) os << ", ";
    os << to_string(ops[i].op) << ":[" << ops[i].lo << "," << ops[i].hi << "]";
  }
  return os.str();
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    }
  }
  return out;
}

Image translate_reflect(const Image& img, int dx, int dy) {
  if (dx == 0 && dy == 0) return img;
  Image out(img.height, img.width, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    for (int y = 0; y < img.height; ++y) {
      const int sy = reflect_index(y - dy, img.height);
      for (int x = 0; x < img.width; ++x) {
        out.at(c, y, x) = img.at(c, sy, reflect_index(x - dx, img.width));
      }
    }
  }
  return out;
}

Image weak_augment(const Image& img, Rng& rng, double shift_fraction) {
  const bool flip = coin(rng);
  const int max_dx = static_cast<int>(std::floor(shift_fraction * img.width));
  const int max_dy = static_cast<int>(std::floor(shift_fraction * img.height));
  const int dx = static_cast<int>(uniform_int(rng, -max_dx, max_dx));
  const int dy = static_cast<int>(uniform_int(rng, -max_dy, max_dy));
  return translate_reflect(flip ? flip_horizontal(img) : img, dx, dy);
}

Image apply_strong_op(const Image& img, StrongOp op, double m) {
  switch (op) {
    case StrongOp::identity:
      return img;
    case StrongOp::brightness: {
      Image out = img;
      for (auto& v : out.pixels) v = clamp01(static_cast<double>(v) + m);
      return out;
    }
    case StrongOp::contrast: {
      Image out = img;
      const auto plane = img.plane_size();
      for (int c = 0; c < img.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mean += img.pixels[c * plane + i];
        mean /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) {
          auto& v = out.pixels[c * plane + i];
          v = clamp01(mean + (1.0 + m) * (v - mean));
        }
      }
      return out;
    }
    case StrongOp::sharpness: {
      const Image blurred = box_blur3(img);
      Image out = img;
      for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        out.pixels[i] = clamp01(blurred.pixels[i] + (1.0 + m) * (img.pixels[i] - blurred.pixels[i]));
      }
      return out;
    }
    case StrongOp::equalize:
      return equalize(img);
    case StrongOp::rotate: {
      const double rad = m * std::numbers::pi / 180.0;
      const double c = std::cos(rad);
      const double s = std::sin(rad);
      return warp_affine(img, c, -s, s, c, 0.0, 0.0);
    }
    case StrongOp::shear_x:
      return warp_affine(img, 1.0, m, 0.0, 1.0, 0.0, 0.0);
    case StrongOp::shear_y:
      return warp_affine(img, 1.0, 0.0, m, 1.0, 0.0, 0.0);
    case StrongOp::translate_x:
      return warp_affine(img, 1.0, 0.0, 0.0, 1.0, -m * img.width, 0.0);
    case StrongOp::translate_y:
      return warp_affine(img, 1.0, 0.0, 0.0, 1.0, 0.0, -m * img.height);
  }
  return img;
}

Image strong_augment(const Image& img, Rng& rng, const AugmentationSpec& spec) {
  if (spec.strong_ops.empty()) throw ConfigError("strong augmentation needs at least one op");
  Image out = img;
  for (int k = 0; k < spec.ops_per_image; ++k) {
    const auto& r = spec.strong_ops[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(spec.strong_ops.size()) - 1))];
    const double magnitude = uniform(rng, r.lo, r.hi);
    out = apply_strong_op(out, r.op, magnitude);
  }
  return out;
}

Augmenter::Augmenter(AugmentationSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

Image Augmenter::operator()(const Image& img, Rng& rng) const {
  if (spec_.kind == AugmentKind::weak) return weak_augment(img, rng, spec_.shift_fraction);
  return strong_augment(img, rng, spec_);
}

}  // namespace sslmatch
