#include "burst/gyro.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace burst;

namespace {

GyroTrace constant_trace(const Vec3& omega, std::int64_t t0, std::int64_t t1,
                         std::int64_t interval) {
  GyroTrace trace;
  for (std::int64_t t = t0; t <= t1; t += interval) {
    trace.samples.push_back({t, omega});
  }
  if (trace.samples.back().t_ns != t1) trace.samples.push_back({t1, omega});
  return trace;
}

// Closed-form rotation for a constant rate about a fixed axis.
Mat3 rodrigues(const Vec3& omega, double seconds) {
  const double angle = omega.norm() * seconds;
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, omega.normalized()).toRotationMatrix();
}

}  // namespace

TEST(OmegaAt, SampleTimestampsReturnExactValues) {
  GyroTrace trace;
  trace.samples = {{0, Vec3(0, 0, 1)}, {10, Vec3(0, 0, 3)}, {30, Vec3(1, 0, 3)}};
  EXPECT_EQ(omega_at(trace, 0), Vec3(0, 0, 1));
  EXPECT_EQ(omega_at(trace, 10), Vec3(0, 0, 3));
  EXPECT_EQ(omega_at(trace, 30), Vec3(1, 0, 3));
}

TEST(OmegaAt, MidpointInterpolatesLinearly) {
  GyroTrace trace;
  trace.samples = {{0, Vec3(0, 0, 1)}, {10, Vec3(0, 0, 3)}};
  EXPECT_EQ(omega_at(trace, 5), Vec3(0, 0, 2));
}

TEST(OmegaAt, MatchesIndependentInterpolation) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 0.5);
  GyroTrace trace;
  std::int64_t t = 0;
  for (int i = 0; i < 40; ++i) {
    trace.samples.push_back({t, Vec3(g(rng), g(rng), g(rng))});
    t += 3'000'000 + static_cast<std::int64_t>(std::abs(g(rng)) * 1e6);
  }
  std::uniform_int_distribution<std::int64_t> pick(trace.start_ns(), trace.end_ns());
  for (int i = 0; i < 200; ++i) {
    const std::int64_t q = pick(rng);
    // Independent bracketing scan.
    std::size_t j = 0;
    while (trace.samples[j + 1].t_ns < q) ++j;
    const auto& lo = trace.samples[j];
    const auto& hi = trace.samples[j + 1];
    const double u = static_cast<double>(q - lo.t_ns) /
                     static_cast<double>(hi.t_ns - lo.t_ns);
    const Vec3 expect = (1.0 - u) * lo.omega + u * hi.omega;
    EXPECT_LT((omega_at(trace, q) - expect).norm(), 1e-12);
  }
}

TEST(OmegaAt, ThrowsOutsideSpan) {
  GyroTrace trace;
  trace.samples = {{0, Vec3::Zero()}, {10, Vec3::Zero()}};
  EXPECT_THROW(omega_at(trace, -1), OutOfRange);
  EXPECT_THROW(omega_at(trace, 11), OutOfRange);
}

TEST(IntegrateRotation, ZeroFieldGivesExactIdentity) {
  const GyroTrace trace = constant_trace(Vec3::Zero(), 0, 1'000'000'000, 5'000'000);
  const RotationMatrix r = integrate_rotation(trace, 0, 1'000'000'000, 1'000'000);
  EXPECT_TRUE(r.m == Mat3::Identity());
}

TEST(IntegrateRotation, ConstantRateMatchesClosedForm) {
  const Vec3 omega(0.0, 0.0, M_PI / 2.0);
  const GyroTrace trace = constant_trace(omega, 0, 1'000'000'000, 5'000'000);
  const RotationMatrix r = integrate_rotation(trace, 0, 1'000'000'000, 1'000'000);
  EXPECT_LT((r.m - rodrigues(omega, 1.0)).norm(), 1e-8);
  EXPECT_LT(r.orthonormality_error(), 1e-9);
}

TEST(IntegrateRotation, TimeVaryingFixedAxisMatchesAnalyticIntegral) {
  // omega(t) = (0, 0, sin t) -> rotation about z by 1 - cos(T).
  GyroTrace trace;
  for (std::int64_t t = 0; t <= 1'000'000'000; t += 1'000'000) {
    trace.samples.push_back({t, Vec3(0.0, 0.0, std::sin(t * 1e-9))});
  }
  const RotationMatrix r = integrate_rotation(trace, 0, 1'000'000'000, 1'000'000);
  const double angle = 1.0 - std::cos(1.0);
  EXPECT_LT((r.m - RotationMatrix::about_z(angle).m).norm(), 1e-6);
}

TEST(IntegrateRotation, FourthOrderStepConvergence) {
  // Base step chosen coarse enough to stay above the floating-point floor;
  // one halving must improve the error at least 8x (ideally ~16x).
  const Vec3 omega(0.0, 0.0, M_PI / 2.0);
  const GyroTrace trace = constant_trace(omega, 0, 1'000'000'000, 4'000'000);
  const Mat3 truth = rodrigues(omega, 1.0);
  const double e_coarse =
      (integrate_rotation(trace, 0, 1'000'000'000, 16'000'000).m - truth).norm();
  const double e_fine =
      (integrate_rotation(trace, 0, 1'000'000'000, 8'000'000).m - truth).norm();
  EXPECT_GT(e_coarse / e_fine, 8.0);
}

TEST(IntegrateRotation, BackwardIntervalInvertsForward) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.4);
  GyroTrace trace;
  for (std::int64_t t = 0; t <= 500'000'000; t += 5'000'000) {
    trace.samples.push_back({t, Vec3(g(rng), g(rng), g(rng))});
  }
  const RotationMatrix fwd = integrate_rotation(trace, 0, 500'000'000, 1'000'000);
  const RotationMatrix bwd = integrate_rotation(trace, 500'000'000, 0, 1'000'000);
  EXPECT_LT((fwd.m * bwd.m - Mat3::Identity()).norm(), 1e-7);
}

TEST(IntegrateRotation, CompositionConsistency) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.5);
  GyroTrace trace;
  for (std::int64_t t = 0; t <= 800'000'000; t += 4'000'000) {
    trace.samples.push_back({t, Vec3(g(rng), g(rng), g(rng))});
  }
  const std::int64_t t0 = 0, t1 = 350'000'000, t2 = 800'000'000;
  const RotationMatrix full = integrate_rotation(trace, t0, t2, 1'000'000);
  const RotationMatrix a = integrate_rotation(trace, t0, t1, 1'000'000);
  const RotationMatrix b = integrate_rotation(trace, t1, t2, 1'000'000);
  EXPECT_LT((full.m - (b * a).m).norm(), 1e-7);
}

TEST(IntegrateRotation, ThrowsOutsideSpan) {
  const GyroTrace trace = constant_trace(Vec3::Zero(), 0, 100, 10);
  EXPECT_THROW(integrate_rotation(trace, 0, 200, 10), OutOfRange);
}

TEST(InterframeRotations, SingleFrameIsIdentity) {
  const GyroTrace trace = constant_trace(Vec3(0.1, 0, 0), 0, 100'000'000, 5'000'000);
  const std::vector<FrameTiming> timings = {{10'000'000, 20'000'000}};
  const auto rots = interframe_rotations(trace, timings);
  ASSERT_EQ(rots.size(), 1u);
  EXPECT_TRUE(rots[0].m == Mat3::Identity());
}

TEST(InterframeRotations, ZeroGyroGivesAllIdentity) {
  const GyroTrace trace = constant_trace(Vec3::Zero(), 0, 200'000'000, 5'000'000);
  const std::vector<FrameTiming> timings = {{10'000'000, 20'000'000},
                                            {110'000'000, 120'000'000}};
  const auto rots = interframe_rotations(trace, timings);
  ASSERT_EQ(rots.size(), 2u);
  EXPECT_TRUE(rots[0].m == Mat3::Identity());
  EXPECT_TRUE(rots[1].m == Mat3::Identity());
}

TEST(InterframeRotations, ConstantRateAccumulatesLinearly) {
  const Vec3 omega(0.0, 0.0, 0.2);
  const GyroTrace trace = constant_trace(omega, 0, 1'000'000'000, 5'000'000);
  std::vector<FrameTiming> timings;
  for (int i = 0; i < 5; ++i) {
    timings.push_back({i * 200'000'000LL, i * 200'000'000LL + 10'000'000});
  }
  const auto rots = interframe_rotations(trace, timings);
  for (int i = 0; i < 5; ++i) {
    const Mat3 expect = rodrigues(omega, 0.2 * i);
    EXPECT_LT((rots[static_cast<std::size_t>(i)].m - expect).norm(), 1e-8);
    EXPECT_LT(rots[static_cast<std::size_t>(i)].orthonormality_error(), 1e-9);
  }
}

TEST(GyroTrace, ValidatesOrderingAndSanity) {
  GyroTrace one;
  one.samples = {{0, Vec3::Zero()}};
  EXPECT_THROW(one.validate(), InputFormat);
  GyroTrace dup;
  dup.samples = {{0, Vec3::Zero()}, {0, Vec3::Zero()}};
  EXPECT_THROW(dup.validate(), InputFormat);
  GyroTrace wild;
  wild.samples = {{0, Vec3(200.0, 0, 0)}, {10, Vec3::Zero()}};
  EXPECT_THROW(wild.validate(), InputFormat);
}
