#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "burst/features.hpp"
#include "burst/geometry.hpp"
#include "burst/image.hpp"

namespace burst {

/// Resamples img into reference geometry: output(p) = img(h(p)) with
/// bilinear interpolation. Pixels whose source lies outside the image (or on
/// masked input) come back masked out.
inline Image warp_frame(const Image& img, const Homography& h) {
  Image out;
  out.width = img.width;
  out.height = img.height;
  out.data.assign(img.size(), 0.0);
  out.mask.assign(img.size(), 0);

  const Mat3& m = h.h;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double den = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      if (std::abs(den) < 1e-12) continue;
      const double qx = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / den;
      const double qy = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / den;
      if (qx < 0.0 || qy < 0.0 || qx > img.width - 1 || qy > img.height - 1) {
        continue;
      }
      if (img.has_mask()) {
        const int x0 = static_cast<int>(std::floor(qx));
        const int y0 = static_cast<int>(std::floor(qy));
        const int x1 = std::min(x0 + 1, img.width - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        if (!img.valid_at(x0, y0) || !img.valid_at(x1, y0) ||
            !img.valid_at(x0, y1) || !img.valid_at(x1, y1)) {
          continue;
        }
      }
      out.at(x, y) = bilinear(img, qx, qy);
      out.mask[static_cast<std::size_t>(y) * out.width + x] = 255;
    }
  }
  return out;
}

namespace detail {

inline Image downsample2(const Image& src) {
  // Binomial blur then decimate by two.
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  Image blurred = src;
  std::vector<double> tmp(src.size());
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        acc += k[i + 2] * src.at(std::clamp(x + i, 0, src.width - 1), y);
      }
      tmp[static_cast<std::size_t>(y) * src.width + x] = acc;
    }
  }
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        acc += k[i + 2] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, src.height - 1)) *
                                  src.width +
                              x];
      }
      blurred.at(x, y) = acc;
    }
  }
  Image out;
  out.width = src.width / 2;
  out.height = src.height / 2;
  out.data.resize(static_cast<std::size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = blurred.at(2 * x, 2 * y);
    }
  }
  return out;
}

// Mean squared difference between current shifted by (dx, dy) and the
// reference, over the in-bounds overlap.
inline double shifted_msd(const Image& ref, const Image& cur, int dx, int dy) {
  const int x0 = std::max(0, -dx);
  const int x1 = std::min(ref.width, cur.width - dx);
  const int y0 = std::max(0, -dy);
  const int y1 = std::min(ref.height, cur.height - dy);
  if (x1 - x0 < 4 || y1 - y0 < 4) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double d = cur.at(x + dx, y + dy) - ref.at(x, y);
      acc += d * d;
    }
  }
  return acc / (static_cast<double>(x1 - x0) * (y1 - y0));
}

}  // namespace detail

/// Coarse-to-fine integer translation aligning current to reference: the
/// returned displacement d minimizes sum (current(p + d) - reference(p))^2.
/// Each level searches +-search around the doubled coarser estimate, so the
/// reachable displacement grows with the pyramid height. Featureless inputs
/// return (0, 0).
inline Vec2 pyramid_align(const Image& reference, const Image& current, int levels,
                          int search) {
  if (reference.width != current.width || reference.height != current.height) {
    throw DimensionMismatch("pyramid_align needs equal image sizes");
  }
  if (levels < 1) throw std::invalid_argument("levels must be >= 1");

  std::vector<Image> pr{reference}, pc{current};
  for (int l = 1; l < levels; ++l) {
    if (pr.back().width < 16 || pr.back().height < 16) break;
    pr.push_back(detail::downsample2(pr.back()));
    pc.push_back(detail::downsample2(pc.back()));
  }

  int dx = 0, dy = 0;
  for (int l = static_cast<int>(pr.size()) - 1; l >= 0; --l) {
    const Image& r = pr[static_cast<std::size_t>(l)];
    const Image& c = pc[static_cast<std::size_t>(l)];
    int best_dx = dx, best_dy = dy;
    double best = detail::shifted_msd(r, c, dx, dy);
    for (int oy = -search; oy <= search; ++oy) {
      for (int ox = -search; ox <= search; ++ox) {
        if (ox == 0 && oy == 0) continue;
        const double cost = detail::shifted_msd(r, c, dx + ox, dy + oy);
        if (cost < best) {
          best = cost;
          best_dx = dx + ox;
          best_dy = dy + oy;
        }
      }
    }
    dx = best_dx;
    dy = best_dy;
    if (l > 0) {
      dx *= 2;
      dy *= 2;
    }
  }
  return {static_cast<double>(dx), static_cast<double>(dy)};
}

/// Mean Euclidean norm of h(x) - x_prime over the set: the frame-validity
/// statistic thresholded during selection.
inline double steady_error(const Homography& h, const CorrespondenceSet& set) {
  if (set.pairs.empty()) throw std::invalid_argument("steady_error needs >= 1 pair");
  double acc = 0.0;
  for (const auto& m : set.pairs) {
    const Vec3 q = h.h * Vec3(m.x.x(), m.x.y(), 1.0);
    if (std::abs(q.z()) < 1e-12) {
      acc += 1e12;
      continue;
    }
    acc += (Vec2(q.x() / q.z(), q.y() / q.z()) - m.x_prime).norm();
  }
  return acc / static_cast<double>(set.pairs.size());
}

}  // namespace burst
