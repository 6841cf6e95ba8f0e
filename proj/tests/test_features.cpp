#include "burst/features.hpp"

#include <gtest/gtest.h>

#include <random>

#include "burst/align.hpp"
#include "burst/homography_fit.hpp"
#include "burst/simulator.hpp"
#include "synthetic.hpp"

using namespace burst;

TEST(DetectCorners, UniformImageHasNoFeatures) {
  const Image img = Image::constant(64, 64, 0.5);
  EXPECT_THROW(detect_corners(img, 100, 5.0), TooFewFeatures);
}

TEST(DetectCorners, RejectsTinyImages) {
  const Image img = Image::constant(16, 16, 0.5);
  EXPECT_THROW(detect_corners(img, 100, 5.0), std::invalid_argument);
}

TEST(DetectCorners, CheckerboardCornersLandOnIntersections) {
  const int square = 16;
  const Image board = testutil::checkerboard(8, square);
  const auto corners = detect_corners(board, 100, 8.0);
  EXPECT_GE(corners.size(), 30u);
  for (const Vec2& c : corners) {
    // Nearest interior intersection; lattice points sit between pixels.
    const double gx = std::round((c.x() + 0.5) / square) * square - 0.5;
    const double gy = std::round((c.y() + 0.5) / square) * square - 0.5;
    EXPECT_LE((c - Vec2(gx, gy)).norm(), 1.0)
        << "corner (" << c.x() << "," << c.y() << ")";
  }
}

TEST(DetectCorners, Deterministic) {
  const Image scene = make_test_scene(128, 128, 5);
  const auto a = detect_corners(scene, 150, 6.0);
  const auto b = detect_corners(scene, 150, 6.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(DetectCorners, HonorsSpacingAndCount) {
  const Image scene = make_test_scene(256, 256, 9);
  const auto corners = detect_corners(scene, 40, 12.0);
  EXPECT_LE(corners.size(), 40u);
  for (std::size_t i = 0; i < corners.size(); ++i) {
    for (std::size_t j = i + 1; j < corners.size(); ++j) {
      EXPECT_GE((corners[i] - corners[j]).norm(), 12.0 - 1.0);
    }
  }
}

TEST(MatchCorners, SelfMatchIsExact) {
  const Image scene = make_test_scene(200, 200, 2);
  const auto corners = detect_corners(scene, 80, 8.0);
  const auto set = match_corners(scene, scene, corners, Homography::identity(), 6, 11);
  EXPECT_GE(set.pairs.size(), corners.size() * 8 / 10);
  for (const auto& m : set.pairs) {
    EXPECT_LT((m.x - m.x_prime).norm(), 1e-9);
    EXPECT_NEAR(m.score, 1.0, 1e-6);
  }
}

TEST(MatchCorners, RecoversIntegerShift) {
  const Image big = make_test_scene(300, 300, 3);
  Image ref = Image::constant(200, 200, 0.0);
  Image cur = Image::constant(200, 200, 0.0);
  // Content at x in ref appears at x + (5, 3) in cur.
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) {
      ref.at(x, y) = big.at(x + 40, y + 40);
      cur.at(x, y) = big.at(x + 40 - 5, y + 40 - 3);
    }
  }
  const auto corners = detect_corners(ref, 60, 10.0);
  const auto set = match_corners(ref, cur, corners, Homography::identity(), 8, 11);
  ASSERT_GE(set.pairs.size(), 4u);
  for (const auto& m : set.pairs) {
    EXPECT_LE((m.x_prime - m.x - Vec2(5.0, 3.0)).norm(), 0.5);
  }
}

TEST(MatchCorners, GuidedMatchOnWarpedFrame) {
  std::mt19937_64 rng(7);
  const Image ref = make_test_scene(256, 256, 4);
  const Homography h = testutil::random_mild_homography(rng, 256.0);
  // current(q) = ref(h^-1(q)) so that content at x maps to h(x).
  const Image cur = warp_frame(ref, h.inverse());
  const auto corners = detect_corners(ref, 120, 8.0);
  const auto set = match_corners(ref, cur, corners, h, 3, 11);
  ASSERT_GE(set.pairs.size(), 20u);
  int good = 0;
  for (const auto& m : set.pairs) {
    const double resid = (apply_homography(h, m.x) - m.x_prime).norm();
    good += resid < 0.5 ? 1 : 0;
  }
  EXPECT_GE(good * 10, static_cast<int>(set.pairs.size()) * 9);
}

TEST(MatchCorners, TooFewSurvivorsThrows) {
  const Image ref = make_test_scene(128, 128, 6);
  const Image unrelated = make_test_scene(128, 128, 99);
  const auto corners = detect_corners(ref, 60, 8.0);
  EXPECT_THROW(match_corners(ref, unrelated, corners, Homography::identity(), 4, 11),
               TooFewFeatures);
}

TEST(FitHomographyDlt, ExactPairsRecoverTruth) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 25; ++trial) {
    const Homography truth = testutil::random_mild_homography(rng, 256.0);
    const auto set = testutil::exact_correspondences(truth, 4, 256.0, rng);
    const Homography fit = fit_homography_dlt(set);
    EXPECT_LT((fit.h - truth.h).norm() / truth.h.norm(), 1e-9);
  }
}

TEST(FitHomographyDlt, IdentityMotionGivesIdentity) {
  std::mt19937_64 rng(9);
  auto set = testutil::exact_correspondences(Homography::identity(), 30, 256.0, rng);
  const Homography fit = fit_homography_dlt(set);
  EXPECT_LT((fit.h - Mat3::Identity()).norm(), 1e-10);
}

TEST(FitHomographyDlt, NoisyFitStaysNearTruth) {
  // Mean reprojection error over 100 noisy trials stays below 2 sigma.
  std::mt19937_64 rng(10);
  const double sigma = 0.5;
  double total = 0.0;
  int count = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Homography truth = testutil::random_mild_homography(rng, 256.0);
    const auto set = testutil::exact_correspondences(truth, 100, 256.0, rng, sigma);
    const Homography fit = fit_homography_dlt(set);
    for (const auto& m : set.pairs) {
      total += (apply_homography(fit, m.x) - apply_homography(truth, m.x)).norm();
      ++count;
    }
  }
  EXPECT_LE(total / count, 2.0 * sigma);
}

TEST(FitHomographyDlt, InvariantToSimilarityRenormalization) {
  std::mt19937_64 rng(11);
  const Homography truth = testutil::random_mild_homography(rng, 256.0);
  const auto set = testutil::exact_correspondences(truth, 40, 256.0, rng, 0.3);

  // Pre-transform both point sets by similarities and compensate afterwards.
  Mat3 s1, s2;
  s1 << 2.0, 0.0, -31.0, 0.0, 2.0, 17.0, 0.0, 0.0, 1.0;
  s2 << 0.5, 0.0, 11.0, 0.0, 0.5, -7.0, 0.0, 0.0, 1.0;
  CorrespondenceSet moved;
  for (const auto& m : set.pairs) {
    Correspondence t;
    t.x = apply_homography(Homography{s1}, m.x);
    t.x_prime = apply_homography(Homography{s2}, m.x_prime);
    moved.pairs.push_back(t);
  }
  const Homography direct = fit_homography_dlt(set);
  const Homography via = fit_homography_dlt(moved);
  const Mat3 compensated = s2.inverse() * via.h * s1;
  const Mat3 norm_comp = compensated / compensated(2, 2);
  EXPECT_LT((norm_comp - direct.h).norm() / direct.h.norm(), 1e-6);
}

TEST(FitHomographyDlt, CollinearPointsAreDegenerate) {
  CorrespondenceSet set;
  for (int i = 0; i < 8; ++i) {
    Correspondence m;
    m.x = Vec2(10.0 * i, 20.0 * i);  // all on one line
    m.x_prime = m.x;
    set.pairs.push_back(m);
  }
  EXPECT_THROW(fit_homography_dlt(set), DegenerateConfiguration);
}

TEST(FitHomographyRobust, AllInlierMatchesPlainDlt) {
  std::mt19937_64 rng(12);
  const Homography truth = testutil::random_mild_homography(rng, 256.0);
  const auto set = testutil::exact_correspondences(truth, 50, 256.0, rng);
  const Homography dlt = fit_homography_dlt(set);
  const RobustFit robust = fit_homography_robust(set, 2.0, 100, 42);
  EXPECT_LT((robust.h.h - dlt.h).norm(), 1e-6);
  EXPECT_EQ(std::count(robust.inliers.begin(), robust.inliers.end(), true), 50);
}

TEST(FitHomographyRobust, RejectsContamination) {
  std::mt19937_64 rng(13);
  const Homography truth = testutil::random_mild_homography(rng, 256.0);
  auto set = testutil::exact_correspondences(truth, 70, 256.0, rng, 0.2);
  std::uniform_real_distribution<double> u(0.0, 256.0);
  for (int i = 0; i < 30; ++i) {
    Correspondence m;
    m.x = Vec2(u(rng), u(rng));
    m.x_prime = Vec2(u(rng), u(rng));  // uniform outlier
    set.pairs.push_back(m);
  }
  const RobustFit fit = fit_homography_robust(set, 2.0, 300, 7);
  double err = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < 70; ++i) {  // score on the true inliers
    err += (apply_homography(fit.h, set.pairs[i].x) -
            apply_homography(truth, set.pairs[i].x))
               .norm();
    ++n;
  }
  EXPECT_LT(err / n, 1.0);
}

TEST(FitHomographyRobust, DeterministicForFixedSeed) {
  std::mt19937_64 rng(14);
  const Homography truth = testutil::random_mild_homography(rng, 256.0);
  const auto set = testutil::exact_correspondences(truth, 40, 256.0, rng, 0.4);
  const RobustFit a = fit_homography_robust(set, 2.0, 200, 1234);
  const RobustFit b = fit_homography_robust(set, 2.0, 200, 1234);
  EXPECT_TRUE(a.h.h == b.h.h);
  EXPECT_EQ(a.inliers, b.inliers);
}

TEST(FitHomographyRobust, RefitNeverWorseThanDltOnItsInliers) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const Homography truth = testutil::random_mild_homography(rng, 256.0);
    auto set = testutil::exact_correspondences(truth, 60, 256.0, rng, 0.5);
    const RobustFit fit = fit_homography_robust(set, 2.5, 200, trial);
    CorrespondenceSet inliers;
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
      if (fit.inliers[i]) inliers.pairs.push_back(set.pairs[i]);
    }
    const Homography dlt = fit_homography_dlt(inliers);
    double e_fit = 0.0, e_dlt = 0.0;
    for (const auto& m : inliers.pairs) {
      e_fit += (apply_homography(fit.h, m.x) - m.x_prime).norm();
      e_dlt += (apply_homography(dlt, m.x) - m.x_prime).norm();
    }
    EXPECT_LE(e_fit, e_dlt + 1e-9);
  }
}
