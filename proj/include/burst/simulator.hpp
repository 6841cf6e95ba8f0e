#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "burst/geometry.hpp"
#include "burst/gyro.hpp"
#include "burst/image.hpp"

namespace burst {

struct TrajectoryKeyframe {
  std::int64_t t_ns = 0;
  RotationMatrix rotation;          // world -> camera, world = start pose frame
  Vec3 translation = Vec3::Zero();  // camera position, scene units
};

/// Piecewise camera trajectory: constant-rate rotation (spherical
/// interpolation) and linear translation between keyframes, clamped at the
/// ends.
struct Trajectory {
  std::vector<TrajectoryKeyframe> keyframes;

  void validate() const {
    if (keyframes.size() < 2) throw Error("trajectory needs at least 2 keyframes");
    for (std::size_t i = 1; i < keyframes.size(); ++i) {
      if (keyframes[i].t_ns <= keyframes[i - 1].t_ns) {
        throw Error("trajectory keyframes must strictly increase in time");
      }
    }
  }

  std::int64_t start_ns() const { return keyframes.front().t_ns; }
  std::int64_t end_ns() const { return keyframes.back().t_ns; }

  struct Pose {
    RotationMatrix rotation;
    Vec3 translation;
  };

  Pose pose_at(std::int64_t t_ns) const {
    if (t_ns <= start_ns()) {
      return {keyframes.front().rotation, keyframes.front().translation};
    }
    if (t_ns >= end_ns()) {
      return {keyframes.back().rotation, keyframes.back().translation};
    }
    const std::size_t seg = segment_of(t_ns);
    const auto& a = keyframes[seg];
    const auto& b = keyframes[seg + 1];
    const double u = static_cast<double>(t_ns - a.t_ns) /
                     static_cast<double>(b.t_ns - a.t_ns);
    const Eigen::AngleAxisd rel(b.rotation.m * a.rotation.m.transpose());
    const Mat3 r =
        Eigen::AngleAxisd(rel.angle() * u, rel.axis()).toRotationMatrix() *
        a.rotation.m;
    return {RotationMatrix{r}, (1.0 - u) * a.translation + u * b.translation};
  }

  /// Angular velocity in the fixed frame (dR/dt = [w]x R), piecewise
  /// constant per segment; zero outside the keyframe span.
  Vec3 angular_velocity_at(std::int64_t t_ns) const {
    if (t_ns < start_ns() || t_ns >= end_ns()) return Vec3::Zero();
    const std::size_t seg = segment_of(t_ns);
    const auto& a = keyframes[seg];
    const auto& b = keyframes[seg + 1];
    const Eigen::AngleAxisd rel(b.rotation.m * a.rotation.m.transpose());
    const double dt_s = static_cast<double>(b.t_ns - a.t_ns) * 1e-9;
    return rel.axis() * (rel.angle() / dt_s);
  }

 private:
  std::size_t segment_of(std::int64_t t_ns) const {
    std::size_t seg = 0;
    while (seg + 2 < keyframes.size() && keyframes[seg + 1].t_ns <= t_ns) ++seg;
    return seg;
  }
};

struct SensorModel {
  double gyro_rate_hz = 200.0;
  double gyro_noise_sigma = 0.0;      // rad/s per axis
  Vec3 gyro_bias = Vec3::Zero();      // rad/s
  double frame_rate_hz = 30.0;
  std::int64_t exposure_ns = 8'000'000;
  double image_noise_sigma = 0.02;    // intensity units
};

/// Everything a deterministic end-to-end evaluation needs: frames, their
/// timings, the gyro trace that produced them, and the exact per-frame
/// homographies mapping reference pixels into each frame.
struct GroundTruthBurst {
  std::vector<Image> frames;
  std::vector<FrameTiming> timings;
  GyroTrace trace;
  std::vector<Homography> true_homographies;
  CameraIntrinsics intrinsics;
  Image clean_reference;
  std::uint64_t seed = 0;
  double image_noise_sigma = 0.0;
  double plane_depth = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Multi-octave value-noise texture in [0.15, 0.85]; rich in corners and
/// gradients at several scales, deterministic per seed.
inline Image make_test_scene(int width, int height, std::uint64_t seed) {
  Image img = Image::constant(width, height, 0.0);
  std::mt19937_64 rng(detail::splitmix64(seed));
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (const int octave : {8, 16, 32, 64}) {
    const int gw = width / octave + 2;
    const int gh = height / octave + 2;
    std::vector<double> grid(static_cast<std::size_t>(gw) * gh);
    for (auto& g : grid) g = uni(rng);
    const double weight = static_cast<double>(octave) / 120.0;
    for (int y = 0; y < height; ++y) {
      const double gy = static_cast<double>(y) / octave;
      const int y0 = static_cast<int>(gy);
      const double fy = gy - y0;
      for (int x = 0; x < width; ++x) {
        const double gx = static_cast<double>(x) / octave;
        const int x0 = static_cast<int>(gx);
        const double fx = gx - x0;
        const auto g = [&](int ix, int iy) {
          return grid[static_cast<std::size_t>(iy) * gw + ix];
        };
        const double top = (1.0 - fx) * g(x0, y0) + fx * g(x0 + 1, y0);
        const double bot = (1.0 - fx) * g(x0, y0 + 1) + fx * g(x0 + 1, y0 + 1);
        img.at(x, y) += weight * ((1.0 - fy) * top + fy * bot);
      }
    }
  }
  double lo = img.data[0], hi = img.data[0];
  for (double v : img.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  for (double& v : img.data) v = 0.15 + 0.7 * (v - lo) / span;
  return img;
}

/// Renders a ground-truth burst: per frame, the pose at the exposure
/// midpoint induces the exact homography K (R + (T/d) n^T) K^-1 against the
/// fronto-parallel plane n = (0,0,1) at depth d; frames sample the scene
/// through its inverse plus i.i.d. Gaussian noise. The gyro trace samples
/// the trajectory's analytic angular velocity (plus bias and noise), with
/// an extra sample just before each interior keyframe so a piecewise-linear
/// reading of the trace reproduces the piecewise-constant truth.
/// Deterministic per seed. Frame size is round(2cx) x round(2cy).
inline GroundTruthBurst render_burst(const Image& scene, const Trajectory& traj,
                                     const SensorModel& sensor,
                                     const CameraIntrinsics& k, double plane_depth,
                                     std::uint64_t rng_seed) {
  traj.validate();
  if (plane_depth <= 0.0) throw Error("plane depth must be positive");
  const int fw = static_cast<int>(std::lround(2.0 * k.cx));
  const int fh = static_cast<int>(std::lround(2.0 * k.cy));
  if (fw < 16 || fh < 16) throw Error("intrinsics imply a degenerate frame size");
  if (scene.width < fw || scene.height < fh) {
    throw ExcursionTooLarge("scene smaller than the output frame");
  }
  const int margin_x = (scene.width - fw) / 2;
  const int margin_y = (scene.height - fh) / 2;

  GroundTruthBurst burst;
  burst.intrinsics = k;
  burst.seed = rng_seed;
  burst.image_noise_sigma = sensor.image_noise_sigma;
  burst.plane_depth = plane_depth;

  // Frame schedule: as many exposures as fit inside the trajectory span.
  const auto interval_ns =
      static_cast<std::int64_t>(std::llround(1e9 / sensor.frame_rate_hz));
  if (sensor.exposure_ns >= interval_ns) {
    throw Error("exposure must be shorter than the frame interval");
  }
  for (std::int64_t t = traj.start_ns();
       t + sensor.exposure_ns <= traj.end_ns(); t += interval_ns) {
    burst.timings.push_back({t, t + sensor.exposure_ns});
  }
  if (burst.timings.empty()) throw Error("trajectory too short for one exposure");

  // Gyro trace covering the full trajectory.
  const auto gyro_interval_ns =
      static_cast<std::int64_t>(std::llround(1e9 / sensor.gyro_rate_hz));
  std::vector<std::int64_t> stamps;
  for (std::int64_t t = traj.start_ns(); t <= traj.end_ns(); t += gyro_interval_ns) {
    stamps.push_back(t);
  }
  if (stamps.back() != traj.end_ns()) stamps.push_back(traj.end_ns());
  for (std::size_t i = 1; i + 1 < traj.keyframes.size(); ++i) {
    stamps.push_back(traj.keyframes[i].t_ns - 1);
  }
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());

  std::mt19937_64 gyro_rng(detail::splitmix64(rng_seed ^ 0x67726f6bULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const std::int64_t t : stamps) {
    Vec3 w = traj.angular_velocity_at(t) + sensor.gyro_bias;
    if (sensor.gyro_noise_sigma > 0.0) {
      w += sensor.gyro_noise_sigma * Vec3(gauss(gyro_rng), gauss(gyro_rng),
                                          gauss(gyro_rng));
    }
    burst.trace.samples.push_back({t, w});
  }

  // Reference pose anchors everything at frame 0's exposure midpoint.
  const auto ref_pose = traj.pose_at(burst.timings.front().midpoint_ns());
  const Vec3 plane_normal = Vec3::UnitZ();

  for (std::size_t i = 0; i < burst.timings.size(); ++i) {
    Homography h;
    if (i == 0) {
      h = Homography::identity();
    } else {
      const auto pose = traj.pose_at(burst.timings[i].midpoint_ns());
      const Mat3 r_rel = pose.rotation.m * ref_pose.rotation.m.transpose();
      const Vec3 t_rel = pose.rotation.m * (ref_pose.translation - pose.translation);
      const Mat3 h_cal = r_rel + (t_rel / plane_depth) * plane_normal.transpose();
      h = {k.matrix() * h_cal * k.inverse_matrix()};
    }
    burst.true_homographies.push_back(h);

    const Homography h_inv = h.inverse();
    // Every output corner must land inside the scene with a bilinear halo.
    for (const Vec2 corner : {Vec2(0, 0), Vec2(fw - 1, 0), Vec2(0, fh - 1),
                              Vec2(fw - 1, fh - 1)}) {
      const Vec2 src = apply_homography(h_inv, corner);
      const double sx = src.x() + margin_x;
      const double sy = src.y() + margin_y;
      if (sx < 1.0 || sy < 1.0 || sx > scene.width - 2.0 || sy > scene.height - 2.0) {
        throw ExcursionTooLarge("frame " + std::to_string(i) +
                                " samples outside the scene");
      }
    }

    Image frame = Image::constant(fw, fh, 0.0);
    if (i == 0) {
      for (int y = 0; y < fh; ++y) {
        for (int x = 0; x < fw; ++x) {
          frame.at(x, y) = scene.at(x + margin_x, y + margin_y);
        }
      }
      burst.clean_reference = frame;
    } else {
      const Mat3& m = h_inv.h;
      for (int y = 0; y < fh; ++y) {
        for (int x = 0; x < fw; ++x) {
          const double den = m(2, 0) * x + m(2, 1) * y + m(2, 2);
          const double qx = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / den;
          const double qy = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / den;
          frame.at(x, y) = bilinear(scene, qx + margin_x, qy + margin_y);
        }
      }
    }
    if (sensor.image_noise_sigma > 0.0) {
      std::mt19937_64 frame_rng(detail::splitmix64(rng_seed + 0x1000 + i));
      for (double& v : frame.data) {
        v = std::max(0.0, v + sensor.image_noise_sigma * gauss(frame_rng));
      }
    }
    burst.frames.push_back(std::move(frame));
  }
  return burst;
}

/// Peak signal-to-noise ratio in dB against a [0, 1] peak, capped at the
/// 99 dB sentinel (equal images).
inline double psnr(const Image& test, const Image& truth) {
  if (test.width != truth.width || test.height != truth.height) {
    throw DimensionMismatch("psnr needs equal dimensions");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    const double d = test.data[i] - truth.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(test.data.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

/// Mean discrepancy of two pixel mappings over the four corners and the
/// center of a frame_size x frame_size frame.
inline double homography_error(const Homography& estimate, const Homography& truth,
                               double frame_size) {
  const double s = frame_size - 1.0;
  const Vec2 probes[5] = {{0.0, 0.0}, {s, 0.0}, {0.0, s}, {s, s}, {s / 2, s / 2}};
  double acc = 0.0;
  for (const Vec2& p : probes) {
    acc += (apply_homography(estimate, p) - apply_homography(truth, p)).norm();
  }
  return acc / 5.0;
}

enum class MotionPreset { kOffset, kInPlaneRotation, kOutOfPlaneRotation };

/// Canonical trajectories: pure in-plane offset, rotation about the optical
/// axis, rotation about the camera x axis. `strength_per_frame` is scene
/// units/frame for the offset preset and degrees/frame for the rotations.
inline Trajectory make_preset_trajectory(MotionPreset preset, int n_frames,
                                         const SensorModel& sensor,
                                         double strength_per_frame) {
  if (n_frames < 1) throw Error("need at least one frame");
  const auto interval_ns =
      static_cast<std::int64_t>(std::llround(1e9 / sensor.frame_rate_hz));
  const std::int64_t t_end =
      static_cast<std::int64_t>(n_frames - 1) * interval_ns + sensor.exposure_ns +
      interval_ns / 2;
  const double total = strength_per_frame * (n_frames - 1);

  TrajectoryKeyframe a, b;
  a.t_ns = 0;
  b.t_ns = t_end;
  const double scale = t_end == 0 ? 0.0
                                  : static_cast<double>(t_end) /
                                        (static_cast<double>(std::max(1, n_frames - 1)) *
                                         interval_ns);
  switch (preset) {
    case MotionPreset::kOffset:
      b.translation = Vec3(total * scale * 0.8, total * scale * 0.6, 0.0);
      break;
    case MotionPreset::kInPlaneRotation:
      b.rotation = RotationMatrix::about_z(total * scale * M_PI / 180.0);
      break;
    case MotionPreset::kOutOfPlaneRotation:
      b.rotation = RotationMatrix::about_x(total * scale * M_PI / 180.0);
      break;
  }
  return {{a, b}};
}

}  // namespace burst
