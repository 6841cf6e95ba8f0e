#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "burst/errors.hpp"

namespace burst {

/// Row-major grayscale image with linear intensities, typically in [0, 1]
/// (16-bit input scaled by 1/65535). An optional validity mask tags pixels
/// that carry no usable content (e.g. warped in from outside the source);
/// an empty mask means fully valid.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;
  std::vector<std::uint8_t> mask;  // 255 = valid, 0 = invalid; empty = all valid

  static Image constant(int w, int h, double value) {
    Image img;
    img.width = w;
    img.height = h;
    img.data.assign(static_cast<std::size_t>(w) * h, value);
    return img;
  }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }

  bool has_mask() const { return !mask.empty(); }

  bool valid_at(int x, int y) const {
    return mask.empty() || mask[static_cast<std::size_t>(y) * width + x] != 0;
  }

  void ensure_mask() {
    if (mask.empty()) mask.assign(data.size(), 255);
  }

  double valid_fraction() const {
    if (mask.empty()) return 1.0;
    std::size_t n = 0;
    for (auto v : mask) n += (v != 0);
    return static_cast<double>(n) / static_cast<double>(mask.size());
  }
};

/// Bilinear sample with clamped taps. The caller is responsible for staying
/// within [0, w-1] x [0, h-1]; clamping only keeps the +1 taps in range so
/// that integer positions reproduce pixel values exactly.
inline double bilinear(const Image& img, double x, double y) {
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, img.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
  const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace burst
