#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "burst/geometry.hpp"

namespace burst {

struct GyroSample {
  std::int64_t t_ns = 0;
  Vec3 omega = Vec3::Zero();  // rad/s
};

/// Time-ordered angular-velocity samples. Timestamps strictly increase and
/// at least two samples are required before interpolation makes sense.
struct GyroTrace {
  std::vector<GyroSample> samples;

  void validate() const {
    if (samples.size() < 2) {
      throw InputFormat("gyro trace needs at least 2 samples");
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (samples[i].t_ns <= samples[i - 1].t_ns) {
        throw InputFormat("gyro timestamps must strictly increase");
      }
    }
    for (const auto& s : samples) {
      if (!s.omega.allFinite() || s.omega.norm() >= 100.0) {
        throw InputFormat("gyro sample out of sane range");
      }
    }
  }

  std::int64_t start_ns() const { return samples.front().t_ns; }
  std::int64_t end_ns() const { return samples.back().t_ns; }
};

struct FrameTiming {
  std::int64_t exposure_start_ns = 0;
  std::int64_t exposure_end_ns = 0;

  std::int64_t midpoint_ns() const {
    return exposure_start_ns + (exposure_end_ns - exposure_start_ns) / 2;
  }
};

namespace detail {

// Linear interpolation at a fractional nanosecond position. RK4 needs
// angular velocity at half-steps the sensor never sampled.
inline Vec3 omega_at_dbl(const GyroTrace& trace, double t_ns) {
  const auto& s = trace.samples;
  if (t_ns < static_cast<double>(s.front().t_ns) ||
      t_ns > static_cast<double>(s.back().t_ns)) {
    throw OutOfRange("time outside gyro trace span");
  }
  auto it = std::upper_bound(
      s.begin(), s.end(), t_ns,
      [](double t, const GyroSample& g) { return t < static_cast<double>(g.t_ns); });
  if (it == s.begin()) return s.front().omega;
  if (it == s.end()) return s.back().omega;
  const GyroSample& lo = *(it - 1);
  const GyroSample& hi = *it;
  const double u = (t_ns - static_cast<double>(lo.t_ns)) /
                   static_cast<double>(hi.t_ns - lo.t_ns);
  return (1.0 - u) * lo.omega + u * hi.omega;
}

inline Mat3 skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

}  // namespace detail

inline Vec3 omega_at(const GyroTrace& trace, std::int64_t t_ns) {
  return detail::omega_at_dbl(trace, static_cast<double>(t_ns));
}

/// Integrates dR/dt = [omega]x R from identity at t_from to t_to with
/// classic RK4 at the given step, then re-orthonormalizes once via polar
/// projection. Integrating backwards (t_to < t_from) is allowed.
inline RotationMatrix integrate_rotation(const GyroTrace& trace, std::int64_t t_from,
                                         std::int64_t t_to, std::int64_t step_ns) {
  if (step_ns <= 0) throw Error("integration step must be positive");
  if (t_from < trace.start_ns() || t_from > trace.end_ns() ||
      t_to < trace.start_ns() || t_to > trace.end_ns()) {
    throw OutOfRange("integration interval outside gyro trace span");
  }
  const std::int64_t span = t_to - t_from;
  if (span == 0) return RotationMatrix::identity();

  const std::int64_t abs_span = span < 0 ? -span : span;
  const std::int64_t n_steps =
      std::max<std::int64_t>(1, (abs_span + step_ns - 1) / step_ns);
  const double h_s = static_cast<double>(span) / static_cast<double>(n_steps) * 1e-9;
  const double h_ns = static_cast<double>(span) / static_cast<double>(n_steps);
  const double t0 = static_cast<double>(t_from);

  Mat3 r = Mat3::Identity();
  for (std::int64_t i = 0; i < n_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h_ns;
    const Mat3 w1 = detail::skew(detail::omega_at_dbl(trace, t));
    const Mat3 w2 = detail::skew(detail::omega_at_dbl(trace, t + 0.5 * h_ns));
    const Mat3 w4 = detail::skew(detail::omega_at_dbl(trace, t + h_ns));
    const Mat3 k1 = w1 * r;
    const Mat3 k2 = w2 * (r + 0.5 * h_s * k1);
    const Mat3 k3 = w2 * (r + 0.5 * h_s * k2);
    const Mat3 k4 = w4 * (r + h_s * k3);
    r += h_s / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!r.allFinite()) throw NonFiniteResult("rotation integration diverged");
  return RotationMatrix::from_nearest(r);
}

namespace detail {

inline std::int64_t native_interval_ns(const GyroTrace& trace) {
  std::vector<std::int64_t> gaps;
  gaps.reserve(trace.samples.size());
  for (std::size_t i = 1; i < trace.samples.size(); ++i) {
    gaps.push_back(trace.samples[i].t_ns - trace.samples[i - 1].t_ns);
  }
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

}  // namespace detail

/// Rotation from frame 0's exposure midpoint to every other frame's
/// midpoint; element 0 is identity. step_ns = 0 picks
/// min(native gyro interval, 1 ms).
inline std::vector<RotationMatrix> interframe_rotations(
    const GyroTrace& trace, const std::vector<FrameTiming>& timings,
    std::int64_t step_ns = 0) {
  if (step_ns <= 0) {
    step_ns = std::min<std::int64_t>(detail::native_interval_ns(trace), 1'000'000);
  }
  std::vector<RotationMatrix> out;
  out.reserve(timings.size());
  if (timings.empty()) return out;

  out.push_back(RotationMatrix::identity());
  RotationMatrix acc = RotationMatrix::identity();
  for (std::size_t i = 1; i < timings.size(); ++i) {
    const RotationMatrix leg = integrate_rotation(
        trace, timings[i - 1].midpoint_ns(), timings[i].midpoint_ns(), step_ns);
    acc = leg * acc;
    out.push_back(acc);
  }
  return out;
}

}  // namespace burst
