#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "burst/errors.hpp"

namespace burst {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Proper rotation (orthonormal, det = +1). Producing operations keep
/// ||m^T m - I||_F below 1e-9; use from_nearest() to re-project a drifted
/// matrix.
struct RotationMatrix {
  Mat3 m = Mat3::Identity();

  static RotationMatrix identity() { return {}; }

  static RotationMatrix about_x(double angle_rad) {
    return {Eigen::AngleAxisd(angle_rad, Vec3::UnitX()).toRotationMatrix()};
  }
  static RotationMatrix about_y(double angle_rad) {
    return {Eigen::AngleAxisd(angle_rad, Vec3::UnitY()).toRotationMatrix()};
  }
  static RotationMatrix about_z(double angle_rad) {
    return {Eigen::AngleAxisd(angle_rad, Vec3::UnitZ()).toRotationMatrix()};
  }
  static RotationMatrix about_axis(double angle_rad, const Vec3& axis) {
    return {Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix()};
  }

  /// Nearest rotation in Frobenius norm (polar projection via SVD).
  static RotationMatrix from_nearest(const Mat3& a) {
    Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Mat3 u = svd.matrixU();
      u.col(2) *= -1.0;
      r = u * svd.matrixV().transpose();
    }
    return {r};
  }

  RotationMatrix transposed() const { return {m.transpose()}; }

  double orthonormality_error() const {
    return (m.transpose() * m - Mat3::Identity()).norm();
  }
};

inline RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
  return {a.m * b.m};
}

/// Angle of the relative rotation, in radians.
inline double geodesic_distance(const RotationMatrix& a, const RotationMatrix& b) {
  const double c = ((a.m.transpose() * b.m).trace() - 1.0) / 2.0;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

/// Pinhole intrinsics. The induced matrix is upper triangular with unit
/// bottom-right entry.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  Mat3 inverse_matrix() const {
    Mat3 ki;
    ki << 1.0 / fx, 0.0, -cx / fx, 0.0, 1.0 / fy, -cy / fy, 0.0, 0.0, 1.0;
    return ki;
  }

  bool valid() const { return fx > 0.0 && fy > 0.0; }
};

/// 3x3 projective map. Stored unnormalized; normalized() imposes the
/// bottom-right = 1 convention where a consumer needs it.
struct Homography {
  Mat3 h = Mat3::Identity();

  static Homography identity() { return {}; }

  static Homography translation(double dx, double dy) {
    Mat3 t = Mat3::Identity();
    t(0, 2) = dx;
    t(1, 2) = dy;
    return {t};
  }

  static Homography from_rotation(const RotationMatrix& r) { return {r.m}; }

  double determinant() const { return h.determinant(); }

  bool normalizable() const { return std::abs(h(2, 2)) > 1e-9; }

  /// Scales so that h(2,2) == 1. Only meaningful when normalizable().
  Homography normalized() const {
    if (!normalizable()) {
      throw DegenerateConfiguration("homography not normalizable: |h33| <= 1e-9");
    }
    return {h / h(2, 2)};
  }

  Homography inverse() const {
    if (std::abs(h.determinant()) <= 1e-12) {
      throw DegenerateConfiguration("homography is singular");
    }
    return {h.inverse().eval()};
  }
};

inline Homography operator*(const Homography& a, const Homography& b) {
  return {a.h * b.h};
}

/// Maps a pixel through h with perspective division.
inline Vec2 apply_homography(const Homography& h, const Vec2& p) {
  const Vec3 q = h.h * Vec3(p.x(), p.y(), 1.0);
  if (std::abs(q.z()) < 1e-12) {
    throw PointAtInfinity("perspective denominator vanished");
  }
  return {q.x() / q.z(), q.y() / q.z()};
}

/// Conjugates a rotation into pixel coordinates: K * R * K^-1. An exact
/// identity passes through exactly (K K^-1 would otherwise leave
/// last-ulp residue that downstream bit-exactness guarantees care about).
inline Homography to_camera_frame(const RotationMatrix& r_gyro,
                                  const CameraIntrinsics& k) {
  if (r_gyro.m == Mat3::Identity()) return Homography::identity();
  return {k.matrix() * r_gyro.m * k.inverse_matrix()};
}

/// r0 + t0 * n0^T with n0 a unit plane normal.
inline Homography compose_initial_homography(const Homography& r0, const Vec3& t0,
                                             const Vec3& n0) {
  if (std::abs(n0.norm() - 1.0) > 1e-9) {
    throw NonUnitNormal("plane normal must have unit length");
  }
  return {r0.h + t0 * n0.transpose()};
}

/// Rotation / scaled-translation / plane-normal factorization of a
/// homography. Recomposing r + t * n^T reproduces the source up to scale.
/// `degenerate` marks a pure rotation, where t = 0 and n is arbitrary.
struct PlaneDecomposition {
  RotationMatrix r;
  Vec3 t = Vec3::Zero();
  Vec3 n = Vec3::UnitZ();
  bool degenerate = false;
};

namespace detail {

// Flips (t, n) so the normal satisfies n_z >= 0 (n_x, then n_y break ties).
inline void canonicalize_normal_sign(Vec3& t, Vec3& n) {
  double lead = n.z();
  if (std::abs(lead) < 1e-12) lead = n.x();
  if (std::abs(lead) < 1e-12) lead = n.y();
  if (lead < 0.0) {
    t = -t;
    n = -n;
  }
}

}  // namespace detail

/// Factors h ~ s * (R + t n^T) and returns the analytic solution whose
/// rotation is nearest (geodesic) to r_hint. A homography whose singular
/// values coincide within 1e-9 is a pure rotation and comes back flagged
/// degenerate with t = 0.
inline PlaneDecomposition decompose_homography(const Homography& h,
                                               const RotationMatrix& r_hint) {
  const double det = h.h.determinant();
  if (std::abs(det) <= 1e-12) {
    throw DegenerateConfiguration("cannot decompose a singular homography");
  }

  Eigen::JacobiSVD<Mat3> svd0(h.h);
  const Vec3 sv0 = svd0.singularValues();
  // Scale so the middle singular value is one; the sign follows det(h),
  // which keeps the rotation factor proper.
  const double scale = (det > 0.0 ? 1.0 : -1.0) / sv0(1);
  const Mat3 hn = h.h * scale;

  Eigen::JacobiSVD<Mat3> svd(hn, Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();

  PlaneDecomposition out;
  if (s(0) - s(2) < 1e-9 * s(1)) {
    out.r = RotationMatrix::from_nearest(hn);
    out.t = Vec3::Zero();
    out.n = Vec3::UnitZ();
    out.degenerate = true;
    return out;
  }

  const Mat3 v = svd.matrixV();
  const Vec3 v1 = v.col(0), v2 = v.col(1), v3 = v.col(2);
  const double a = std::sqrt(std::max(0.0, 1.0 - s(2) * s(2)));
  const double b = std::sqrt(std::max(0.0, s(0) * s(0) - 1.0));
  const double c = std::sqrt(s(0) * s(0) - s(2) * s(2));

  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& u : {Vec3((a * v1 + b * v3) / c), Vec3((a * v1 - b * v3) / c)}) {
    Vec3 n = v2.cross(u);
    Mat3 um, wm;
    um.col(0) = v2;
    um.col(1) = u;
    um.col(2) = n;
    wm.col(0) = hn * v2;
    wm.col(1) = hn * u;
    wm.col(2) = (hn * v2).cross(hn * u);
    const Mat3 r = wm * um.transpose();
    Vec3 t = (hn - r) * n;
    detail::canonicalize_normal_sign(t, n);
    const double d = geodesic_distance({r}, r_hint);
    if (d < best) {
      best = d;
      out.r = {r};
      out.t = t;
      out.n = n;
    }
  }
  out.degenerate = false;
  return out;
}

}  // namespace burst
