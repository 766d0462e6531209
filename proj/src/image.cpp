#include "sslmatch/image.hpp"

#include <algorithm>
#include <cmath>

#include "sslmatch/common.hpp"

namespace sslmatch {

bool is_valid(const Image& img) {
  if (img.height < 1 || img.width < 1 || (img.channels != 1 && img.channels != 3)) return false;
  if (img.pixels.size() != img.plane_size() * img.channels) return false;
  return std::all_of(img.pixels.begin(), img.pixels.end(),
                     [](float v) { return v >= 0.0f && v <= 1.0f; });
}

Image to_three_channel(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw Error("to_three_channel: expected 1 or 3 channels");
  Image out(img.height, img.width, 3);
  const auto plane = img.plane_size();
  for (int c = 0; c < 3; ++c) {
    std::copy(img.pixels.begin(), img.pixels.end(), out.pixels.begin() + c * plane);
  }
  return out;
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Image resize_square(const Image& img, int side) {
  if (side < 1) throw Error("resize_square: side must be positive");
  if (img.height == side && img.width == side) return img;
  Image out(side, side, img.channels);
  const double sy = static_cast<double>(img.height) / side;
  const double sx = static_cast<double>(img.width) / side;
  for (int y = 0; y < side; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < side; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double v = (1 - wy) * ((1 - wx) * img.at(c, y0, x0) + wx * img.at(c, y0, x1)) +
                         wy * ((1 - wx) * img.at(c, y1, x0) + wx * img.at(c, y1, x1));
        out.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace sslmatch
