#pragma once

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "burst/align.hpp"
#include "burst/image.hpp"

namespace burst {

/// A frame warped into reference geometry together with its selection
/// statistics. frames[0] of any burst is the unwarped reference with
/// steady_error 0.
struct AlignedFrame {
  Image image;
  Homography homography;
  double steady_error = 0.0;
  bool valid = true;
};

struct MergeConfig {
  int tile = 16;                     // power of two in {8, 16, 32, 64}
  int overlap = 8;                   // 0 < overlap < tile
  double noise_variance = 1e-4;      // per-pixel intensity variance of inputs
  int max_frames = 18;
  double steady_error_threshold = 5.0;  // px
  double shrink_c = 8.0;             // robustness factor in the shrinkage

  void validate() const {
    if (tile != 8 && tile != 16 && tile != 32 && tile != 64) {
      throw std::invalid_argument("tile must be one of 8, 16, 32, 64");
    }
    if (overlap <= 0 || overlap >= tile) {
      throw std::invalid_argument("overlap must satisfy 0 < overlap < tile");
    }
  }
};

/// Indices kept by the steady-error threshold and frame cap; index 0 (the
/// reference) is always first.
inline std::vector<std::size_t> select_frame_indices(
    const std::vector<AlignedFrame>& frames, const MergeConfig& cfg) {
  std::vector<std::size_t> out;
  if (frames.empty()) return out;
  out.push_back(0);
  for (std::size_t i = 1; i < frames.size(); ++i) {
    if (static_cast<int>(out.size()) >= cfg.max_frames) break;
    if (!frames[i].valid) continue;
    if (frames[i].steady_error > cfg.steady_error_threshold) continue;
    out.push_back(i);
  }
  return out;
}

/// Keeps the reference plus every alternative whose steady error is within
/// the threshold, in temporal order, capped at max_frames total. Idempotent
/// and order-preserving; the worst case is the reference alone.
inline std::vector<AlignedFrame> select_frames(const std::vector<AlignedFrame>& frames,
                                               const MergeConfig& cfg) {
  std::vector<AlignedFrame> out;
  for (const std::size_t i : select_frame_indices(frames, cfg)) {
    out.push_back(frames[i]);
  }
  return out;
}

namespace detail {

using Cplx = std::complex<double>;

// Forward 2-D DFT scaled by 1/n^2 so that bin (0,0) is the tile mean;
// the matching inverse is the plain unscaled sum.
inline void fft2_forward(Eigen::FFT<double>& fft, const std::vector<double>& tile,
                         int n, std::vector<Cplx>& freq) {
  freq.resize(static_cast<std::size_t>(n) * n);
  std::vector<Cplx> row_in(n), row_out(n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) row_in[x] = tile[static_cast<std::size_t>(y) * n + x];
    fft.fwd(row_out, row_in);
    for (int x = 0; x < n; ++x) freq[static_cast<std::size_t>(y) * n + x] = row_out[x];
  }
  const double scale = 1.0 / (static_cast<double>(n) * n);
  std::vector<Cplx> col_in(n), col_out(n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) col_in[y] = freq[static_cast<std::size_t>(y) * n + x];
    fft.fwd(col_out, col_in);
    for (int y = 0; y < n; ++y) {
      freq[static_cast<std::size_t>(y) * n + x] = col_out[y] * scale;
    }
  }
}

inline void fft2_inverse_sum(Eigen::FFT<double>& fft, std::vector<Cplx>& freq, int n,
                             std::vector<double>& tile) {
  // inverse = conj(fwd(conj(X))), unscaled.
  for (auto& v : freq) v = std::conj(v);
  std::vector<Cplx> row_in(n), row_out(n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) row_in[x] = freq[static_cast<std::size_t>(y) * n + x];
    fft.fwd(row_out, row_in);
    for (int x = 0; x < n; ++x) freq[static_cast<std::size_t>(y) * n + x] = row_out[x];
  }
  std::vector<Cplx> col_in(n), col_out(n);
  tile.resize(static_cast<std::size_t>(n) * n);
  for (int x = 0; x < n; ++x) {
    for (int y = 0; y < n; ++y) col_in[y] = freq[static_cast<std::size_t>(y) * n + x];
    fft.fwd(col_out, col_in);
    for (int y = 0; y < n; ++y) {
      tile[static_cast<std::size_t>(y) * n + x] = std::real(std::conj(col_out[y]));
    }
  }
}

// Wrap-around box smoothing of the difference power spectrum (smoothed
// periodogram); stabilizes the shrinkage decision per frequency.
inline void smooth_power(const std::vector<double>& power, int n,
                         std::vector<double>& out) {
  constexpr int kHalf = 2;  // 5x5 window
  out.assign(power.size(), 0.0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double acc = 0.0;
      for (int dy = -kHalf; dy <= kHalf; ++dy) {
        const int yy = (y + dy + n) % n;
        for (int dx = -kHalf; dx <= kHalf; ++dx) {
          const int xx = (x + dx + n) % n;
          acc += power[static_cast<std::size_t>(yy) * n + xx];
        }
      }
      out[static_cast<std::size_t>(y) * n + x] = acc / ((2 * kHalf + 1) * (2 * kHalf + 1));
    }
  }
}

inline std::vector<double> raised_cosine(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / n);
  }
  return w;
}

inline std::vector<int> tile_positions(int extent, int tile, int stride) {
  std::vector<int> pos;
  for (int p = 0; p + tile <= extent; p += stride) pos.push_back(p);
  if (pos.empty() || pos.back() != extent - tile) pos.push_back(extent - tile);
  return pos;
}

}  // namespace detail

/// Pairwise temporal Wiener merge in the frequency domain. Each overlapping
/// tile contributes reference + (1/N) sum_z (1 - A_z) D_z where
/// D_z = T_z - T_0 and A_z(w) = |D_z|^2 / (|D_z|^2 + c * sigma_d^2), with
/// sigma_d^2 the per-frequency noise power of the difference spectrum.
/// A_z -> 1 rejects an alternative's difference at that frequency entirely.
/// Identical inputs reproduce the reference bit for bit: every correction is
/// exactly zero. Alternatives with more than 25% invalid pixels in a tile
/// contribute nothing there; isolated invalid pixels are filled from the
/// reference before the transform.
inline Image merge_wiener(const std::vector<AlignedFrame>& frames,
                          const MergeConfig& cfg) {
  cfg.validate();
  std::vector<const AlignedFrame*> used;
  for (const auto& f : frames) {
    if (f.valid) used.push_back(&f);
  }
  if (used.empty()) throw std::invalid_argument("merge needs at least one valid frame");
  const Image& ref = used.front()->image;
  for (const auto* f : used) {
    if (f->image.width != ref.width || f->image.height != ref.height) {
      throw DimensionMismatch("merge inputs must share dimensions");
    }
  }
  if (ref.width < cfg.tile || ref.height < cfg.tile) {
    throw DimensionMismatch("image smaller than one tile");
  }

  const int n = cfg.tile;
  const int stride = cfg.tile - cfg.overlap;
  const double inv_n = 1.0 / static_cast<double>(used.size());
  // Per-frequency noise power of a difference of two frames under the
  // mean-normalized transform.
  const double noise_power = 2.0 * cfg.noise_variance / (static_cast<double>(n) * n);

  const std::vector<double> win = detail::raised_cosine(n);
  const std::vector<int> xs = detail::tile_positions(ref.width, n, stride);
  const std::vector<int> ys = detail::tile_positions(ref.height, n, stride);

  std::vector<double> corr_acc(ref.size(), 0.0), weight_acc(ref.size(), 0.0);
  Eigen::FFT<double> fft;
  std::vector<double> rtile(static_cast<std::size_t>(n) * n);
  std::vector<double> diff(rtile.size()), power(rtile.size()), spower(rtile.size());
  std::vector<detail::Cplx> dfreq, csum(rtile.size());
  std::vector<double> corr;

  for (const int ty : ys) {
    for (const int tx : xs) {
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          rtile[static_cast<std::size_t>(y) * n + x] = ref.at(tx + x, ty + y);
        }
      }
      std::fill(csum.begin(), csum.end(), detail::Cplx(0.0, 0.0));
      bool any = false;
      for (std::size_t z = 1; z < used.size(); ++z) {
        const Image& alt = used[z]->image;
        int invalid = 0;
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            invalid += alt.valid_at(tx + x, ty + y) ? 0 : 1;
          }
        }
        if (invalid * 4 > n * n) continue;  // > 25% masked: reference stands in
        bool all_zero = true;
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * n + x;
            diff[i] = alt.valid_at(tx + x, ty + y)
                          ? alt.at(tx + x, ty + y) - rtile[i]
                          : 0.0;
            all_zero = all_zero && diff[i] == 0.0;
          }
        }
        if (all_zero) continue;  // contributes the reference tile exactly
        any = true;
        detail::fft2_forward(fft, diff, n, dfreq);
        for (std::size_t i = 0; i < dfreq.size(); ++i) power[i] = std::norm(dfreq[i]);
        detail::smooth_power(power, n, spower);
        for (std::size_t i = 0; i < dfreq.size(); ++i) {
          const double a = spower[i] / (spower[i] + cfg.shrink_c * noise_power);
          csum[i] += (1.0 - a) * dfreq[i];
        }
      }
      if (any) detail::fft2_inverse_sum(fft, csum, n, corr);
      for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
          const std::size_t i = static_cast<std::size_t>(ty + y) * ref.width + (tx + x);
          const double w = win[static_cast<std::size_t>(y)] * win[static_cast<std::size_t>(x)];
          if (any) corr_acc[i] += w * inv_n * corr[static_cast<std::size_t>(y) * n + x];
          weight_acc[i] += w;
        }
      }
    }
  }

  Image out = ref;
  out.mask.clear();  // merged output is fully valid
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (weight_acc[i] > 0.0) out.data[i] += corr_acc[i] / weight_acc[i];
  }
  return out;
}

/// Noise std estimate: median absolute deviation of the finest-scale Haar
/// diagonal coefficients, scaled by 1/0.6745.
inline double estimate_noise_sigma(const Image& img) {
  if (img.width < 64 || img.height < 64) {
    throw std::invalid_argument("estimate_noise_sigma needs at least 64x64");
  }
  std::vector<double> coeffs;
  coeffs.reserve(static_cast<std::size_t>(img.width / 2) * (img.height / 2));
  for (int y = 0; y + 1 < img.height; y += 2) {
    for (int x = 0; x + 1 < img.width; x += 2) {
      coeffs.push_back(
          std::abs(img.at(x, y) - img.at(x + 1, y) - img.at(x, y + 1) +
                   img.at(x + 1, y + 1)) /
          2.0);
    }
  }
  auto mid = coeffs.begin() + coeffs.size() / 2;
  std::nth_element(coeffs.begin(), mid, coeffs.end());
  return *mid / 0.6745;
}

}  // namespace burst
