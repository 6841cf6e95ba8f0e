#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "burst/features.hpp"
#include "burst/geometry.hpp"

namespace burst {

namespace detail {

// Similarity that moves the centroid to the origin and the mean distance
// to sqrt(2) (Hartley normalization).
inline Mat3 normalizing_similarity(const std::vector<Vec2>& pts) {
  Vec2 c = Vec2::Zero();
  for (const Vec2& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_d = 0.0;
  for (const Vec2& p : pts) mean_d += (p - c).norm();
  mean_d /= static_cast<double>(pts.size());
  const double s = mean_d > 1e-12 ? std::sqrt(2.0) / mean_d : 1.0;
  Mat3 t;
  t << s, 0.0, -s * c.x(), 0.0, s, -s * c.y(), 0.0, 0.0, 1.0;
  return t;
}

inline Vec2 transform(const Mat3& t, const Vec2& p) {
  return {t(0, 0) * p.x() + t(0, 2), t(1, 1) * p.y() + t(1, 2)};
}

// Stacked constraint rows for x' = H x: two per pair, unknowns are the
// nine entries of H in row-major order.
inline Eigen::MatrixXd dlt_matrix(const std::vector<Vec2>& x,
                                  const std::vector<Vec2>& xp) {
  Eigen::MatrixXd a(2 * x.size(), 9);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = x[i].x(), v = x[i].y();
    const double up = xp[i].x(), vp = xp[i].y();
    a.row(2 * i) << u, v, 1.0, 0.0, 0.0, 0.0, -up * u, -up * v, -up;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, u, v, 1.0, -vp * u, -vp * v, -vp;
  }
  return a;
}

inline Homography dlt_fit(const std::vector<Vec2>& x, const std::vector<Vec2>& xp) {
  const Mat3 t1 = normalizing_similarity(x);
  const Mat3 t2 = normalizing_similarity(xp);
  std::vector<Vec2> xn(x.size()), xpn(xp.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xn[i] = transform(t1, x[i]);
    xpn[i] = transform(t2, xp[i]);
  }
  const Eigen::MatrixXd a = dlt_matrix(xn, xpn);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  // The null space must be one-dimensional: coincident or collinear points
  // leave the two smallest singular values indistinguishable.
  if (sv(7) <= 0.0 || (sv(7) - sv(8)) / sv(7) < 1e-9) {
    throw DegenerateConfiguration("point configuration does not determine a homography");
  }
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Mat3 hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  const Mat3 t2inv = (Mat3() << 1.0 / t2(0, 0), 0.0, -t2(0, 2) / t2(0, 0), 0.0,
                      1.0 / t2(1, 1), -t2(1, 2) / t2(1, 1), 0.0, 0.0, 1.0)
                         .finished();
  const Mat3 h = t2inv * hn * t1;
  Homography out{h};
  if (!out.normalizable()) {
    throw DegenerateConfiguration("fitted homography has vanishing h33");
  }
  return out.normalized();
}

}  // namespace detail

/// Least-squares homography from >= 4 correspondences via the normalized
/// direct linear transform; returned with h33 = 1.
inline Homography fit_homography_dlt(const CorrespondenceSet& set) {
  if (set.pairs.size() < 4) {
    throw DegenerateConfiguration("need at least 4 correspondences");
  }
  std::vector<Vec2> x, xp;
  x.reserve(set.pairs.size());
  xp.reserve(set.pairs.size());
  for (const auto& m : set.pairs) {
    x.push_back(m.x);
    xp.push_back(m.x_prime);
  }
  return detail::dlt_fit(x, xp);
}

struct RobustFit {
  Homography h;
  std::vector<bool> inliers;
  double mean_inlier_error_px = 0.0;
};

/// RANSAC over 4-point minimal samples with a final least-squares refit on
/// the consensus set. Deterministic for a fixed seed.
inline RobustFit fit_homography_robust(const CorrespondenceSet& set,
                                       double inlier_threshold, int max_iters,
                                       std::uint64_t rng_seed) {
  const std::size_t n = set.pairs.size();
  if (n < 4) throw DegenerateConfiguration("need at least 4 correspondences");

  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();

  std::vector<Vec2> sx(4), sxp(4);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::size_t idx[4];
    idx[0] = pick(rng);
    for (int k = 1; k < 4; ++k) {
      bool dup = true;
      while (dup) {
        idx[k] = pick(rng);
        dup = false;
        for (int j = 0; j < k; ++j) dup = dup || idx[j] == idx[k];
      }
    }
    for (int k = 0; k < 4; ++k) {
      sx[k] = set.pairs[idx[k]].x;
      sxp[k] = set.pairs[idx[k]].x_prime;
    }
    Homography model;
    try {
      model = detail::dlt_fit(sx, sxp);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    std::vector<bool> mask(n, false);
    std::size_t count = 0;
    double err_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      try {
        const double e = (apply_homography(model, set.pairs[i].x) -
                          set.pairs[i].x_prime)
                             .norm();
        if (e < inlier_threshold) {
          mask[i] = true;
          ++count;
          err_sum += e;
        }
      } catch (const PointAtInfinity&) {
      }
    }
    const double mean_err = count > 0 ? err_sum / count : 0.0;
    if (count > best_count || (count == best_count && mean_err < best_err)) {
      best_count = count;
      best_err = mean_err;
      best_mask = std::move(mask);
    }
  }

  if (best_count < 4) {
    throw DegenerateConfiguration("no consensus set of at least 4 inliers");
  }

  CorrespondenceSet inlier_set;
  inlier_set.point_noise_sigma = set.point_noise_sigma;
  for (std::size_t i = 0; i < n; ++i) {
    if (best_mask[i]) inlier_set.pairs.push_back(set.pairs[i]);
  }
  RobustFit out;
  out.h = fit_homography_dlt(inlier_set);
  out.inliers = std::move(best_mask);
  double err_sum = 0.0;
  for (const auto& m : inlier_set.pairs) {
    err_sum += (apply_homography(out.h, m.x) - m.x_prime).norm();
  }
  out.mean_inlier_error_px = err_sum / static_cast<double>(inlier_set.pairs.size());
  return out;
}

}  // namespace burst
