#include "burst/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "burst/gyro.hpp"
#include "synthetic.hpp"

using namespace burst;

namespace {

SensorModel quiet_sensor() {
  SensorModel s;
  s.gyro_rate_hz = 200.0;
  s.frame_rate_hz = 30.0;
  s.exposure_ns = 8'000'000;
  s.image_noise_sigma = 0.0;
  return s;
}

CameraIntrinsics small_camera() { return {300.0, 300.0, 96.0, 96.0}; }

}  // namespace

TEST(Trajectory, PosesInterpolateBetweenKeyframes) {
  Trajectory traj;
  traj.keyframes.push_back({0, RotationMatrix::identity(), Vec3::Zero()});
  traj.keyframes.push_back(
      {1'000'000'000, RotationMatrix::about_z(0.2), Vec3(1.0, 0.0, 0.0)});
  const auto mid = traj.pose_at(500'000'000);
  EXPECT_LT((mid.rotation.m - RotationMatrix::about_z(0.1).m).norm(), 1e-12);
  EXPECT_LT((mid.translation - Vec3(0.5, 0.0, 0.0)).norm(), 1e-12);
  // Clamped outside the span.
  EXPECT_EQ(traj.pose_at(-5).translation, Vec3::Zero());
  EXPECT_EQ(traj.pose_at(2'000'000'000).translation, Vec3(1.0, 0.0, 0.0));
}

TEST(Trajectory, AngularVelocityMatchesSegmentRate) {
  Trajectory traj;
  traj.keyframes.push_back({0, RotationMatrix::identity(), Vec3::Zero()});
  traj.keyframes.push_back({2'000'000'000, RotationMatrix::about_z(0.4), Vec3::Zero()});
  const Vec3 w = traj.angular_velocity_at(700'000'000);
  EXPECT_LT((w - Vec3(0.0, 0.0, 0.2)).norm(), 1e-12);
}

TEST(RenderBurst, StaticSceneProducesIdentityBurst) {
  Trajectory traj;
  traj.keyframes.push_back({0, RotationMatrix::identity(), Vec3::Zero()});
  traj.keyframes.push_back({600'000'000, RotationMatrix::identity(), Vec3::Zero()});
  const Image scene = make_test_scene(320, 320, 3);
  const auto burst = render_burst(scene, traj, quiet_sensor(), small_camera(), 20.0, 1);

  ASSERT_GE(burst.frames.size(), 2u);
  EXPECT_TRUE(burst.true_homographies[0].h == Mat3::Identity());
  for (std::size_t i = 0; i < burst.frames.size(); ++i) {
    EXPECT_LT((burst.true_homographies[i].h - Mat3::Identity()).norm(), 1e-12);
    for (std::size_t p = 0; p < burst.frames[i].data.size(); ++p) {
      ASSERT_EQ(burst.frames[i].data[p], burst.clean_reference.data[p]);
    }
  }
  for (const auto& s : burst.trace.samples) {
    EXPECT_EQ(s.omega, Vec3::Zero());
  }
}

TEST(RenderBurst, InPlaneRotationMatchesClosedForm) {
  const SensorModel sensor = quiet_sensor();
  const CameraIntrinsics k = small_camera();
  const double per_frame_deg = 0.5;
  const auto traj = make_preset_trajectory(MotionPreset::kInPlaneRotation, 8, sensor,
                                           per_frame_deg);
  const Image scene = make_test_scene(384, 384, 4);
  const auto burst = render_burst(scene, traj, sensor, k, 20.0, 2);
  ASSERT_EQ(burst.frames.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    const double angle = per_frame_deg * M_PI / 180.0 * static_cast<double>(i);
    const Mat3 expect =
        k.matrix() * RotationMatrix::about_z(angle).m * k.inverse_matrix();
    EXPECT_LT((burst.true_homographies[i].h - expect).norm(), 1e-9) << "frame " << i;
  }
}

TEST(RenderBurst, OutOfPlaneRotationMatchesExplicitExpansion) {
  const SensorModel sensor = quiet_sensor();
  const CameraIntrinsics k = small_camera();
  const auto traj =
      make_preset_trajectory(MotionPreset::kOutOfPlaneRotation, 6, sensor, 0.4);
  const Image scene = make_test_scene(384, 384, 5);
  const auto burst = render_burst(scene, traj, sensor, k, 20.0, 3);
  for (std::size_t i = 1; i < burst.frames.size(); ++i) {
    const double th = 0.4 * M_PI / 180.0 * static_cast<double>(i);
    const double c = std::cos(th), s = std::sin(th);
    // K rot_x(th) K^-1 expanded symbolically for K = [f 0 cx; 0 f cy; 0 0 1]:
    //   [1, cx s/f, cx (c - 1 - cy s/f)]
    //   [0, c + cy s/f, -s (f + cy^2/f)]
    //   [0, s/f, c - cy s/f]
    const double f = k.fx, cx = k.cx, cy = k.cy;
    Mat3 expect;
    expect << 1.0, cx * s / f, cx * (c - 1.0 - cy * s / f),  //
        0.0, c + cy * s / f, -s * (f + cy * cy / f),         //
        0.0, s / f, c - cy * s / f;
    EXPECT_LT((burst.true_homographies[i].h - expect).norm() / expect.norm(), 1e-9)
        << "frame " << i;
    EXPECT_GT(std::abs(burst.true_homographies[i].h(2, 1)), 1e-6);
  }
}

TEST(RenderBurst, DeterministicPerSeed) {
  const SensorModel sensor = [] {
    SensorModel s;
    s.image_noise_sigma = 0.02;
    s.gyro_noise_sigma = 0.001;
    return s;
  }();
  const auto traj = make_preset_trajectory(MotionPreset::kOffset, 4, sensor, 0.02);
  const Image scene = make_test_scene(320, 320, 6);
  const auto a = render_burst(scene, traj, sensor, small_camera(), 20.0, 77);
  const auto b = render_burst(scene, traj, sensor, small_camera(), 20.0, 77);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    ASSERT_EQ(a.frames[i].data, b.frames[i].data);
  }
  for (std::size_t i = 0; i < a.trace.samples.size(); ++i) {
    ASSERT_EQ(a.trace.samples[i].omega, b.trace.samples[i].omega);
  }
}

TEST(RenderBurst, NoiseCalibrationWithinTwoPercent) {
  Trajectory traj;
  traj.keyframes.push_back({0, RotationMatrix::identity(), Vec3::Zero()});
  traj.keyframes.push_back({200'000'000, RotationMatrix::identity(), Vec3::Zero()});
  SensorModel sensor = quiet_sensor();
  sensor.image_noise_sigma = 0.02;
  CameraIntrinsics k{600.0, 600.0, 256.0, 256.0};
  const Image scene = Image::constant(576, 576, 0.5);
  const auto burst = render_burst(scene, traj, sensor, k, 20.0, 8);
  const Image& f = burst.frames[0];
  double mean = 0.0;
  for (double v : f.data) mean += v;
  mean /= static_cast<double>(f.data.size());
  double var = 0.0;
  for (double v : f.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.data.size() - 1);
  EXPECT_NEAR(std::sqrt(var), 0.02, 0.02 * 0.02);
}

TEST(RenderBurst, GyroTraceReproducesInterFrameRotations) {
  // Cross-module contract: integrating the simulator's own noise-free trace
  // recovers the exact relative rotations behind the true homographies.
  const SensorModel sensor = quiet_sensor();
  const CameraIntrinsics k = small_camera();
  const Image scene = make_test_scene(384, 384, 9);
  for (const auto preset : {MotionPreset::kOffset, MotionPreset::kInPlaneRotation,
                            MotionPreset::kOutOfPlaneRotation}) {
    const auto traj = make_preset_trajectory(preset, 8, sensor, 0.4);
    const auto burst = render_burst(scene, traj, sensor, k, 20.0, 10);
    const auto rots = interframe_rotations(burst.trace, burst.timings);
    const auto ref_pose = traj.pose_at(burst.timings[0].midpoint_ns());
    for (std::size_t i = 0; i < burst.timings.size(); ++i) {
      const auto pose = traj.pose_at(burst.timings[i].midpoint_ns());
      const RotationMatrix truth{pose.rotation.m * ref_pose.rotation.m.transpose()};
      EXPECT_LT(geodesic_distance(rots[i], truth), 1e-6)
          << "preset " << static_cast<int>(preset) << " frame " << i;
    }
  }
}

TEST(RenderBurst, ExcursionBeyondSceneThrows) {
  const SensorModel sensor = quiet_sensor();
  const auto traj = make_preset_trajectory(MotionPreset::kOffset, 16, sensor, 1.0);
  const Image scene = make_test_scene(200, 200, 11);  // no margin to spare
  EXPECT_THROW(render_burst(scene, traj, sensor, small_camera(), 20.0, 12),
               ExcursionTooLarge);
}

TEST(Psnr, SentinelAndClosedFormCases) {
  const Image a = Image::constant(32, 32, 0.5);
  EXPECT_DOUBLE_EQ(psnr(a, a), 99.0);
  const Image b = Image::constant(32, 32, 0.6);
  EXPECT_NEAR(psnr(b, a), 20.0, 1e-12);
  EXPECT_THROW(psnr(a, Image::constant(16, 16, 0.5)), DimensionMismatch);
}

TEST(Psnr, GaussianNoiseLandsNearForty) {
  const Image truth = Image::constant(256, 256, 0.5);
  const Image noisy = testutil::add_noise(truth, 0.01, 13);
  EXPECT_NEAR(psnr(noisy, truth), 40.0, 0.2);
}

TEST(HomographyError, ZeroTranslationAndOracleCases) {
  EXPECT_DOUBLE_EQ(
      homography_error(Homography::identity(), Homography::identity(), 256.0), 0.0);
  // estimate = shift-after-truth displaces every probe by exactly 1 px.
  const Homography truth = Homography::identity();
  const Homography est = Homography::translation(1.0, 0.0) * truth;
  EXPECT_NEAR(homography_error(est, truth, 256.0), 1.0, 1e-12);
}

TEST(HomographyError, MatchesIndependentFivePointComputation) {
  std::mt19937_64 rng(14);
  const Homography a = testutil::random_mild_homography(rng, 256.0);
  const Homography b = testutil::random_mild_homography(rng, 256.0);
  const double s = 255.0;
  const Vec2 pts[5] = {{0, 0}, {s, 0}, {0, s}, {s, s}, {s / 2, s / 2}};
  double expect = 0.0;
  for (const Vec2& p : pts) {
    expect += (apply_homography(a, p) - apply_homography(b, p)).norm();
  }
  expect /= 5.0;
  EXPECT_NEAR(homography_error(a, b, 256.0), expect, 1e-12);
}

TEST(MakeTestScene, DeterministicAndBounded) {
  const Image a = make_test_scene(128, 128, 21);
  const Image b = make_test_scene(128, 128, 21);
  ASSERT_EQ(a.data, b.data);
  for (double v : a.data) {
    EXPECT_GE(v, 0.15 - 1e-12);
    EXPECT_LE(v, 0.85 + 1e-12);
  }
}
