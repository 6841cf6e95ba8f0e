#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "burst/geometry.hpp"
#include "burst/image.hpp"

namespace burst {

/// A matched point pair: x in the target (reference) frame, x_prime in the
/// current frame, score = correlation confidence in [0, 1].
struct Correspondence {
  Vec2 x = Vec2::Zero();
  Vec2 x_prime = Vec2::Zero();
  double score = 0.0;
};

struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  double point_noise_sigma = 0.5;  // assumed localization noise, px

  std::size_t size() const { return pairs.size(); }
};

namespace detail {

// Separable binomial blur [1 4 6 4 1]/16 with clamped borders.
inline std::vector<double> binomial5(const std::vector<double>& src, int w, int h) {
  static const double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        const int xx = std::clamp(x + i, 0, w - 1);
        acc += k[i + 2] * src[static_cast<std::size_t>(y) * w + xx];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) {
        const int yy = std::clamp(y + i, 0, h - 1);
        acc += k[i + 2] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

// One-dimensional parabola vertex from three samples; 0 when flat.
inline double parabola_offset(double lo, double mid, double hi) {
  const double denom = lo - 2.0 * mid + hi;
  if (std::abs(denom) < 1e-300) return 0.0;
  const double off = 0.5 * (lo - hi) / denom;
  return std::clamp(off, -0.5, 0.5);
}

}  // namespace detail

/// Harris corners, strongest first, non-maximum suppressed to min_distance
/// spacing, refined to subpixel by a quadratic fit of the response surface.
/// Throws TooFewFeatures when fewer than 4 corners survive -- the signal
/// for a low-texture or low-light frame.
inline std::vector<Vec2> detect_corners(const Image& img, int max_corners,
                                        double min_distance) {
  if (img.width < 32 || img.height < 32) {
    throw std::invalid_argument("detect_corners needs at least a 32x32 image");
  }
  const int w = img.width, h = img.height;

  // Sobel gradients.
  std::vector<double> ix(img.size(), 0.0), iy(img.size(), 0.0);
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const auto p = [&](int dx, int dy) { return img.at(x + dx, y + dy); };
      ix[static_cast<std::size_t>(y) * w + x] =
          (p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) -
           p(-1, 1)) /
          8.0;
      iy[static_cast<std::size_t>(y) * w + x] =
          (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) -
           p(1, -1)) /
          8.0;
    }
  }

  std::vector<double> ixx(img.size()), iyy(img.size()), ixy(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    ixx[i] = ix[i] * ix[i];
    iyy[i] = iy[i] * iy[i];
    ixy[i] = ix[i] * iy[i];
  }
  ixx = detail::binomial5(ixx, w, h);
  iyy = detail::binomial5(iyy, w, h);
  ixy = detail::binomial5(ixy, w, h);

  constexpr double kHarrisK = 0.04;
  std::vector<double> resp(img.size(), 0.0);
  double max_resp = 0.0;
  const int border = 3;
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double det = ixx[i] * iyy[i] - ixy[i] * ixy[i];
      const double tr = ixx[i] + iyy[i];
      resp[i] = det - kHarrisK * tr * tr;
      max_resp = std::max(max_resp, resp[i]);
    }
  }

  const double threshold = std::max(1e-14, 0.01 * max_resp);
  struct Cand {
    int x, y;
    double r;
  };
  std::vector<Cand> cands;
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double r = resp[i];
      if (r <= threshold) continue;
      // 3x3 local maximum
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (resp[static_cast<std::size_t>(y + dy) * w + (x + dx)] > r) {
            peak = false;
            break;
          }
        }
      }
      if (peak) cands.push_back({x, y, r});
    }
  }
  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.r > b.r; });

  // Greedy spacing enforcement over a coarse grid.
  const double cell = std::max(1.0, min_distance);
  const int gw = static_cast<int>(w / cell) + 1;
  const int gh = static_cast<int>(h / cell) + 1;
  std::vector<std::vector<Vec2>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<Vec2> corners;
  const double min_d2 = min_distance * min_distance;
  for (const auto& cand : cands) {
    if (static_cast<int>(corners.size()) >= max_corners) break;
    const int gx = static_cast<int>(cand.x / cell);
    const int gy = static_cast<int>(cand.y / cell);
    bool ok = true;
    for (int dy = -1; dy <= 1 && ok; ++dy) {
      for (int dx = -1; dx <= 1 && ok; ++dx) {
        const int nx = gx + dx, ny = gy + dy;
        if (nx < 0 || ny < 0 || nx >= gw || ny >= gh) continue;
        for (const Vec2& q : grid[static_cast<std::size_t>(ny) * gw + nx]) {
          const double ddx = q.x() - cand.x, ddy = q.y() - cand.y;
          if (ddx * ddx + ddy * ddy < min_d2) {
            ok = false;
            break;
          }
        }
      }
    }
    if (!ok) continue;
    const auto r_at = [&](int xx, int yy) {
      return resp[static_cast<std::size_t>(yy) * w + xx];
    };
    const double sx = detail::parabola_offset(r_at(cand.x - 1, cand.y),
                                              cand.r, r_at(cand.x + 1, cand.y));
    const double sy = detail::parabola_offset(r_at(cand.x, cand.y - 1),
                                              cand.r, r_at(cand.x, cand.y + 1));
    const Vec2 pt(cand.x + sx, cand.y + sy);
    grid[static_cast<std::size_t>(gy) * gw + gx].push_back(pt);
    corners.push_back(pt);
  }

  if (corners.size() < 4) {
    throw TooFewFeatures("found " + std::to_string(corners.size()) +
                         " corners, need at least 4");
  }
  return corners;
}

namespace detail {

struct PatchStats {
  std::vector<double> centered;
  double norm = 0.0;
  bool flat = true;
};

inline PatchStats patch_stats(const Image& img, int cx, int cy, int half) {
  PatchStats st;
  const int n = 2 * half + 1;
  st.centered.resize(static_cast<std::size_t>(n) * n);
  double mean = 0.0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      mean += img.at(cx + dx, cy + dy);
    }
  }
  mean /= st.centered.size();
  double ss = 0.0;
  std::size_t i = 0;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx, ++i) {
      const double v = img.at(cx + dx, cy + dy) - mean;
      st.centered[i] = v;
      ss += v * v;
    }
  }
  st.norm = std::sqrt(ss);
  st.flat = st.norm < 1e-12;
  return st;
}

inline double zncc(const PatchStats& a, const PatchStats& b) {
  if (a.flat || b.flat) return -1.0;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.centered.size(); ++i) dot += a.centered[i] * b.centered[i];
  return dot / (a.norm * b.norm);
}

}  // namespace detail

/// Matches target corners into the current frame by zero-mean normalized
/// cross-correlation over a window of search_radius around the location the
/// predicted homography projects each corner to. Integer peak plus a
/// quadratic subpixel refinement; pairs scoring below zncc_threshold are
/// dropped.
inline CorrespondenceSet match_corners(const Image& target, const Image& current,
                                       const std::vector<Vec2>& corners,
                                       const Homography& predicted_h,
                                       int search_radius, int patch,
                                       double zncc_threshold = 0.5) {
  if (patch < 7 || patch % 2 == 0) {
    throw std::invalid_argument("patch must be odd and >= 7");
  }
  if (search_radius < 1) {
    throw std::invalid_argument("search_radius must be >= 1");
  }
  const int half = patch / 2;
  CorrespondenceSet set;

  for (const Vec2& c : corners) {
    const int rcx = static_cast<int>(std::lround(c.x()));
    const int rcy = static_cast<int>(std::lround(c.y()));
    if (rcx < half || rcy < half || rcx >= target.width - half ||
        rcy >= target.height - half) {
      continue;
    }
    Vec2 pred;
    try {
      pred = apply_homography(predicted_h, c);
    } catch (const PointAtInfinity&) {
      continue;
    }
    const int pcx = static_cast<int>(std::lround(pred.x()));
    const int pcy = static_cast<int>(std::lround(pred.y()));

    const auto tstats = detail::patch_stats(target, rcx, rcy, half);
    if (tstats.flat) continue;

    double best = -2.0;
    int bx = 0, by = 0;
    std::vector<double> scores(static_cast<std::size_t>(2 * search_radius + 1) *
                                   (2 * search_radius + 1),
                               -2.0);
    const auto score_at = [&](int dx, int dy) -> double& {
      return scores[static_cast<std::size_t>(dy + search_radius) *
                        (2 * search_radius + 1) +
                    (dx + search_radius)];
    };
    for (int dy = -search_radius; dy <= search_radius; ++dy) {
      for (int dx = -search_radius; dx <= search_radius; ++dx) {
        const int qx = pcx + dx, qy = pcy + dy;
        if (qx < half || qy < half || qx >= current.width - half ||
            qy >= current.height - half) {
          continue;
        }
        const double s = detail::zncc(tstats, detail::patch_stats(current, qx, qy, half));
        score_at(dx, dy) = s;
        if (s > best) {
          best = s;
          bx = dx;
          by = dy;
        }
      }
    }
    if (best < zncc_threshold) continue;

    double subx = 0.0, suby = 0.0;
    if (std::abs(bx) < search_radius && score_at(bx - 1, by) > -2.0 &&
        score_at(bx + 1, by) > -2.0) {
      subx = detail::parabola_offset(score_at(bx - 1, by), best, score_at(bx + 1, by));
    }
    if (std::abs(by) < search_radius && score_at(bx, by - 1) > -2.0 &&
        score_at(bx, by + 1) > -2.0) {
      suby = detail::parabola_offset(score_at(bx, by - 1), best, score_at(bx, by + 1));
    }

    Correspondence m;
    m.x = c;
    // The correlation localizes the rounded patch center; carry the corner's
    // subpixel fraction over as a local translation.
    m.x_prime = Vec2(pcx + bx + subx + (c.x() - rcx), pcy + by + suby + (c.y() - rcy));
    m.score = std::clamp(best, 0.0, 1.0);
    set.pairs.push_back(m);
  }

  if (set.pairs.size() < 4) {
    throw TooFewFeatures("only " + std::to_string(set.pairs.size()) +
                         " matches survived");
  }
  return set;
}

}  // namespace burst
