#pragma once

#include <cstddef>
#include <vector>

namespace sslmatch {

/// Planar (channel-major) image with intensities in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
  [[nodiscard]] std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height + y) * width + x;
  }
  float& at(int c, int y, int x) { return pixels[index(c, y, x)]; }
  [[nodiscard]] float at(int c, int y, int x) const { return pixels[index(c, y, x)]; }

  [[nodiscard]] bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// True when dimensions are positive and every pixel lies in [0, 1].
bool is_valid(const Image& img);

/// Replicates a monochrome plane into three identical channels. A 3-channel
/// input is returned unchanged.
Image to_three_channel(const Image& img);

/// Bilinear resize of every channel to side x side.
Image resize_square(const Image& img, int side);

/// Reflect-101 index mapping (edge pixel not repeated), valid for any offset.
int reflect_index(int i, int n);

}  // namespace sslmatch
