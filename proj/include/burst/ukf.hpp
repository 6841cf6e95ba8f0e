#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "burst/features.hpp"
#include "burst/geometry.hpp"

namespace burst {

using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

/// Filter state: the eight free homography parameters (bottom-right entry
/// pinned to 1) and their covariance. The covariance is kept symmetric and
/// positive semidefinite by every producing operation.
struct UkfState {
  Vec8 h = Vec8::Zero();
  Mat8 p = Mat8::Identity();
};

struct UkfConfig {
  double alpha = 1e-3;                  // sigma-point spread scaling
  double beta = 2.0;                    // Gaussian prior-knowledge constant
  double process_noise_sigma = 1e-4;    // per-parameter random-walk std
  double measurement_noise_sigma = 1.0; // px
};

/// 2L+1 sampled states (columns) with mean and covariance weights.
struct SigmaPoints {
  Eigen::Matrix<double, 8, 17> points;
  Eigen::Matrix<double, 17, 1> w_m;
  Eigen::Matrix<double, 17, 1> w_c;
};

inline Vec8 state_from_homography(const Homography& h) {
  const Mat3 m = h.normalized().h;
  Vec8 v;
  v << m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1);
  return v;
}

inline Homography homography_from_state(const Vec8& v) {
  Mat3 m;
  m << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), 1.0;
  return {m};
}

/// Mean Euclidean reprojection residual of h over the set, in pixels.
/// A vanishing perspective denominator contributes a huge sentinel rather
/// than throwing, so diagnostics stay total.
inline double mean_reprojection_error(const Homography& h,
                                      const CorrespondenceSet& set) {
  double acc = 0.0;
  for (const auto& m : set.pairs) {
    try {
      acc += (apply_homography(h, m.x) - m.x_prime).norm();
    } catch (const PointAtInfinity&) {
      acc += 1e12;
    }
  }
  return acc / static_cast<double>(set.pairs.size());
}

/// Initial state covariance from the stacked constraint matrix of the
/// predicted correspondences (x, h0 x): first-order propagation of i.i.d.
/// point noise through the smallest-singular-vector map, reduced to the
/// eight free parameters, symmetrized, floored at 1e-10 I.
inline Mat8 init_covariance(const CorrespondenceSet& set, const Homography& h0) {
  const std::size_t n = set.pairs.size();
  if (n < 4) throw DegenerateConfiguration("need at least 4 correspondences");

  std::vector<Vec2> x(n), xp(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = set.pairs[i].x;
    xp[i] = apply_homography(h0, set.pairs[i].x);
  }
  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = x[i].x(), v = x[i].y();
    a.row(2 * i) << u, v, 1.0, 0.0, 0.0, 0.0, -xp[i].x() * u, -xp[i].x() * v,
        -xp[i].x();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, u, v, 1.0, -xp[i].y() * u, -xp[i].y() * v,
        -xp[i].y();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(7) < 1e-12 * sv(0)) {
    throw DegenerateConfiguration("constraint matrix rank-deficient beyond its null space");
  }

  Eigen::VectorXd u9 = svd.matrixV().col(8);  // unit null vector ~ h0
  if (u9(8) < 0.0) u9 = -u9;
  if (std::abs(u9(8)) < 1e-12) {
    throw DegenerateConfiguration("null vector has vanishing scale entry");
  }

  // Pseudo-inverse excluding the null direction.
  Eigen::VectorXd sinv = Eigen::VectorXd::Zero(9);
  for (int k = 0; k < 8; ++k) sinv(k) = 1.0 / sv(k);
  const Eigen::MatrixXd apinv =
      svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();  // 9 x 2n

  // Noise on the measured points enters the last three columns of each row
  // pair; (dA h) has per-row magnitude equal to the unit vector's third-row
  // dot with the source point.
  Eigen::VectorXd d(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = u9(6) * x[i].x() + u9(7) * x[i].y() + u9(8);
    d(2 * i) = w * w;
    d(2 * i + 1) = w * w;
  }
  const double s2 = set.point_noise_sigma * set.point_noise_sigma;
  const Eigen::MatrixXd cov9 = s2 * apinv * d.asDiagonal() * apinv.transpose();

  // Chain rule for s_i = u_i / u_9, i = 1..8.
  Eigen::Matrix<double, 8, 9> jac = Eigen::Matrix<double, 8, 9>::Zero();
  for (int i = 0; i < 8; ++i) {
    jac(i, i) = 1.0 / u9(8);
    jac(i, 8) = -u9(i) / (u9(8) * u9(8));
  }
  Mat8 p0 = jac * cov9 * jac.transpose();
  p0 = 0.5 * (p0 + p0.transpose()).eval();
  p0 += 1e-10 * Mat8::Identity();
  return p0;
}

namespace detail {

// Lower-triangular factor of (L+lambda) P, tolerating a PSD-singular P by
// escalating jitter. An exactly zero matrix factors to zero.
inline Mat8 scaled_sqrt(const Mat8& p, double scale) {
  const Mat8 s = scale * p;
  if (s.cwiseAbs().maxCoeff() == 0.0) return Mat8::Zero();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Eigen::LLT<Mat8> llt(s + jitter * Mat8::Identity());
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-12 * std::max(1.0, s.trace() / 8.0) : jitter * 100.0;
  }
  throw CovarianceNotPsd("sigma-point square root failed after jitter");
}

}  // namespace detail

/// Deterministic sample of the state distribution:
///   X = [h, h + sqrt((L+lambda)P) columns, h - ...]
/// with lambda = (alpha^2 - 1) L and the standard weight set
///   w_m0 = lambda/(L+lambda), w_c0 = w_m0 + 1 - alpha^2 + beta,
///   w_j = 1/(2(L+lambda)) for j >= 1.
inline SigmaPoints sigma_points(const UkfState& state, const UkfConfig& cfg) {
  constexpr double kL = 8.0;
  const double lambda = (cfg.alpha * cfg.alpha - 1.0) * kL;
  const double denom = kL + lambda;  // = alpha^2 L, positive

  SigmaPoints sp;
  const Mat8 root = detail::scaled_sqrt(state.p, denom);
  sp.points.col(0) = state.h;
  for (int j = 0; j < 8; ++j) {
    sp.points.col(1 + j) = state.h + root.col(j);
    sp.points.col(9 + j) = state.h - root.col(j);
  }
  sp.w_m.setConstant(1.0 / (2.0 * denom));
  sp.w_c.setConstant(1.0 / (2.0 * denom));
  sp.w_m(0) = lambda / denom;
  sp.w_c(0) = lambda / denom + (1.0 - cfg.alpha * cfg.alpha + cfg.beta);
  return sp;
}

namespace detail {

// Stacked projections of every target point under one sampled state.
// Throws PointAtInfinity when the sampled homography sends a point to the
// line at infinity.
inline Eigen::VectorXd observe(const Vec8& h, const CorrespondenceSet& set) {
  Eigen::VectorXd y(2 * set.pairs.size());
  const Homography hom = homography_from_state(h);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    const Vec2 q = apply_homography(hom, set.pairs[i].x);
    y(2 * i) = q.x();
    y(2 * i + 1) = q.y();
  }
  return y;
}

inline Mat8 clamp_psd(Mat8 p) {
  p = 0.5 * (p + p.transpose()).eval();
  Eigen::LLT<Mat8> llt(p + 1e-12 * Mat8::Identity());
  if (llt.info() == Eigen::Success) return p;
  Eigen::SelfAdjointEigenSolver<Mat8> es(p);
  Vec8 ev = es.eigenvalues().cwiseMax(1e-12);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// One predict/update cycle against a fixed correspondence set. The process
/// is a stationary random walk (identity transition plus isotropic noise);
/// the measurement stacks the projections of all target points. A sigma
/// column that degenerates to a point at infinity is retried with its spread
/// halved, up to three times.
inline UkfState ukf_step(const UkfState& state, const CorrespondenceSet& set,
                         const UkfConfig& cfg) {
  if (set.pairs.size() < 4) {
    throw DegenerateConfiguration("need at least 4 correspondences");
  }
  const std::size_t dim = 2 * set.pairs.size();
  SigmaPoints sp = sigma_points(state, cfg);

  Eigen::MatrixXd y(dim, 17);
  for (int j = 0; j < 17; ++j) {
    int tries = 0;
    for (;;) {
      try {
        y.col(j) = detail::observe(sp.points.col(j), set);
        break;
      } catch (const PointAtInfinity&) {
        if (++tries > 3) throw;
        sp.points.col(j) = sp.points.col(0) +
                           0.5 * (sp.points.col(j) - sp.points.col(0));
      }
    }
  }

  // Predict under the identity transition.
  Vec8 h_pred = Vec8::Zero();
  for (int j = 0; j < 17; ++j) h_pred += sp.w_m(j) * sp.points.col(j);
  Mat8 p_pred = Mat8::Zero();
  for (int j = 0; j < 17; ++j) {
    const Vec8 dx = sp.points.col(j) - h_pred;
    p_pred += sp.w_c(j) * dx * dx.transpose();
  }
  p_pred += cfg.process_noise_sigma * cfg.process_noise_sigma * Mat8::Identity();

  // Observation statistics.
  Eigen::VectorXd y_mean = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < 17; ++j) y_mean += sp.w_m(j) * y.col(j);
  Eigen::MatrixXd p_yy =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  Eigen::MatrixXd p_hy = Eigen::MatrixXd::Zero(8, static_cast<Eigen::Index>(dim));
  for (int j = 0; j < 17; ++j) {
    const Eigen::VectorXd dy = y.col(j) - y_mean;
    const Vec8 dx = sp.points.col(j) - h_pred;
    p_yy += sp.w_c(j) * dy * dy.transpose();
    p_hy += sp.w_c(j) * dx * dy.transpose();
  }
  p_yy += cfg.measurement_noise_sigma * cfg.measurement_noise_sigma *
          Eigen::MatrixXd::Identity(dim, dim);

  Eigen::VectorXd obs(dim);
  for (std::size_t i = 0; i < set.pairs.size(); ++i) {
    obs(2 * i) = set.pairs[i].x_prime.x();
    obs(2 * i + 1) = set.pairs[i].x_prime.y();
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(p_yy);
  if (ldlt.info() != Eigen::Success) {
    throw CovarianceNotPsd("innovation covariance factorization failed");
  }
  const Eigen::MatrixXd gain = ldlt.solve(p_hy.transpose()).transpose();  // 8 x dim

  UkfState out;
  out.h = h_pred + gain * (obs - y_mean);
  out.p = detail::clamp_psd(p_pred - gain * p_yy * gain.transpose());
  return out;
}

struct RefineResult {
  Homography h;
  double mean_reprojection_px = 0.0;
  int iterations = 0;
};

/// Iterates the filter on a fixed correspondence set until the mean
/// reprojection error stops improving by more than tol_px, starting from the
/// given homography. Non-convergence shows up as a large returned error, not
/// an exception.
inline RefineResult refine_homography(const Homography& h0,
                                      const CorrespondenceSet& set,
                                      const UkfConfig& cfg, int max_iters,
                                      double tol_px) {
  UkfState state;
  state.h = state_from_homography(h0);

  double prev = mean_reprojection_error(homography_from_state(state.h), set);
  RefineResult out;
  out.h = homography_from_state(state.h);
  out.mean_reprojection_px = prev;
  if (prev < tol_px) return out;  // already at tolerance, nothing to refine

  state.p = init_covariance(set, h0);
  for (int it = 0; it < max_iters; ++it) {
    state = ukf_step(state, set, cfg);
    const double err = mean_reprojection_error(homography_from_state(state.h), set);
    out.h = homography_from_state(state.h);
    out.mean_reprojection_px = err;
    out.iterations = it + 1;
    if (std::abs(prev - err) < tol_px) break;
    prev = err;
  }
  return out;
}

}  // namespace burst
