#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "burst/align.hpp"
#include "burst/features.hpp"
#include "burst/geometry.hpp"
#include "burst/gyro.hpp"
#include "burst/homography_fit.hpp"
#include "burst/merge.hpp"
#include "burst/simulator.hpp"
#include "burst/ukf.hpp"

namespace burst {

struct FeatureConfig {
  int max_corners = 200;
  double min_distance = 8.0;
  int patch = 11;
  int search_radius = 8;
  double zncc_threshold = 0.5;
  double point_noise_sigma = 0.5;
};

struct RansacConfig {
  double inlier_threshold = 2.0;  // px
  int max_iters = 200;
};

struct PipelineConfig {
  CameraIntrinsics intrinsics;
  UkfConfig ukf;
  MergeConfig merge;
  FeatureConfig features;
  RansacConfig ransac;
  std::int64_t rk4_step_ns = 0;  // 0 = min(native gyro interval, 1 ms)
  int fallback_levels = 3;
  int fallback_search = 4;
  int refine_max_iters = 12;
  double refine_tol_px = 1e-3;
  std::uint64_t seed = 1;
  bool auto_noise = true;  // estimate merge.noise_variance from the reference
};

/// Per-frame alignment diagnostics. valid reflects the selection outcome.
struct FrameReport {
  int frame_id = 0;
  RotationMatrix gyro_rotation;
  Homography initial_h;
  Homography refined_h;
  double steady_error = 0.0;
  Vec2 fallback_shift = Vec2::Zero();
  bool valid = true;
  int feature_count = 0;
};

namespace detail {

// Steady error of frames that yielded no usable pre-warp matches: re-acquire
// correspondences on the already-aligned frame (identity prediction, relaxed
// correlation threshold) and measure the residual. Frames whose content
// cannot be matched at all get a sentinel that selection will reject.
inline double post_warp_steady_error(const Image& ref, const Image& warped,
                                     const std::vector<Vec2>& corners,
                                     const FeatureConfig& fc, int search) {
  if (corners.empty()) {
    // Cornerless reference (deep low light): nothing to correlate against,
    // so trust the gyro-plus-translation alignment and report its residual.
    return pyramid_align(ref, warped, 3, std::max(2, search)).norm();
  }
  try {
    const CorrespondenceSet check =
        match_corners(ref, warped, corners, Homography::identity(),
                      std::max(2, search), fc.patch, 0.3);
    return steady_error(Homography::identity(), check);
  } catch (const TooFewFeatures&) {
    return 1e12;
  }
}

}  // namespace detail

/// Aligns every alternative to frame 0: gyro rotation -> guided matching ->
/// robust fit -> plane decomposition -> initial homography -> filter
/// refinement -> warp -> translational fallback. Per-frame feature failures
/// degrade to the gyro-only homography; only malformed inputs throw.
inline std::pair<std::vector<AlignedFrame>, std::vector<FrameReport>> align_burst(
    const std::vector<Image>& frames, const std::vector<FrameTiming>& timings,
    const GyroTrace& trace, const PipelineConfig& cfg) {
  if (frames.empty()) throw Error("empty burst");
  if (frames.size() != timings.size()) {
    throw DimensionMismatch("frame/timing count mismatch");
  }
  for (const auto& f : frames) {
    if (f.width != frames[0].width || f.height != frames[0].height) {
      throw DimensionMismatch("burst frames must share dimensions");
    }
  }

  const Image& ref = frames[0];
  const Mat3 kmat = cfg.intrinsics.matrix();
  const Mat3 kinv = cfg.intrinsics.inverse_matrix();

  std::vector<Vec2> corners;
  try {
    corners = detect_corners(ref, cfg.features.max_corners, cfg.features.min_distance);
  } catch (const TooFewFeatures&) {
    // Low-texture reference: every alternative takes the gyro-only path.
  }

  const std::vector<RotationMatrix> rotations =
      interframe_rotations(trace, timings, cfg.rk4_step_ns);

  std::vector<AlignedFrame> aligned;
  std::vector<FrameReport> reports;
  aligned.reserve(frames.size());
  reports.reserve(frames.size());

  AlignedFrame ref_frame;
  ref_frame.image = ref;
  ref_frame.homography = Homography::identity();
  ref_frame.steady_error = 0.0;
  ref_frame.valid = true;
  aligned.push_back(std::move(ref_frame));

  FrameReport ref_report;
  ref_report.frame_id = 0;
  ref_report.feature_count = static_cast<int>(corners.size());
  reports.push_back(ref_report);

  for (std::size_t i = 1; i < frames.size(); ++i) {
    FrameReport rep;
    rep.frame_id = static_cast<int>(i);
    rep.gyro_rotation = rotations[i];

    const Homography gyro_h = to_camera_frame(rotations[i], cfg.intrinsics);
    Homography h_refined = gyro_h;
    rep.initial_h = gyro_h;

    std::optional<CorrespondenceSet> steady_set;
    bool mechanical_failure = false;
    try {
      if (corners.empty()) throw TooFewFeatures("no reference corners");
      CorrespondenceSet matches =
          match_corners(ref, frames[i], corners, gyro_h, cfg.features.search_radius,
                        cfg.features.patch, cfg.features.zncc_threshold);
      matches.point_noise_sigma = cfg.features.point_noise_sigma;
      rep.feature_count = static_cast<int>(matches.size());

      const RobustFit fit = fit_homography_robust(
          matches, cfg.ransac.inlier_threshold, cfg.ransac.max_iters,
          cfg.seed ^ (0x517cc1b727220a95ULL + i));

      CorrespondenceSet inliers;
      inliers.point_noise_sigma = matches.point_noise_sigma;
      for (std::size_t j = 0; j < matches.pairs.size(); ++j) {
        if (fit.inliers[j]) inliers.pairs.push_back(matches.pairs[j]);
      }

      // Translation and plane normal come from the calibrated feature
      // homography; the rotation slot is the gyro's.
      const Homography h_cal{kinv * fit.h.h * kmat};
      Homography h0 = gyro_h;
      const PlaneDecomposition dec = decompose_homography(h_cal, rotations[i]);
      if (!dec.degenerate) {
        const Homography h0_cal = compose_initial_homography(
            Homography::from_rotation(rotations[i]), dec.t, dec.n);
        h0 = Homography{kmat * h0_cal.h * kinv};
      }
      rep.initial_h = h0;

      const RefineResult refined = refine_homography(
          h0, inliers, cfg.ukf, cfg.refine_max_iters, cfg.refine_tol_px);
      h_refined = refined.h;
      steady_set = std::move(inliers);
    } catch (const TooFewFeatures&) {
      rep.feature_count = 0;
    } catch (const DegenerateConfiguration&) {
    } catch (const CovarianceNotPsd&) {
    } catch (const PointAtInfinity&) {
    } catch (const NonFiniteResult&) {
      mechanical_failure = true;
    }

    AlignedFrame frame;
    try {
      Image warped = warp_frame(frames[i], h_refined);
      rep.fallback_shift =
          pyramid_align(ref, warped, cfg.fallback_levels, cfg.fallback_search);
      Homography h_final = h_refined;
      if (rep.fallback_shift.squaredNorm() > 0.0) {
        h_final = h_refined * Homography::translation(rep.fallback_shift.x(),
                                                      rep.fallback_shift.y());
        warped = warp_frame(frames[i], h_final);
      }
      rep.refined_h = h_final;
      rep.steady_error =
          steady_set ? steady_error(h_final, *steady_set)
                     : detail::post_warp_steady_error(ref, warped, corners,
                                                      cfg.features,
                                                      cfg.fallback_search);
      frame.image = std::move(warped);
      frame.homography = h_final;
      frame.steady_error = rep.steady_error;
      frame.valid = !mechanical_failure;
    } catch (const Error&) {
      mechanical_failure = true;
      frame.image = frames[i];
      frame.homography = h_refined;
      frame.steady_error = 1e12;
      frame.valid = false;
      rep.refined_h = h_refined;
      rep.steady_error = 1e12;
    }
    rep.valid = frame.valid;
    aligned.push_back(std::move(frame));
    reports.push_back(rep);
  }
  return {std::move(aligned), std::move(reports)};
}

struct PipelineResult {
  Image merged;
  std::vector<FrameReport> reports;
  int merged_frame_count = 0;   // reference + surviving alternatives
  double noise_sigma_used = 0.0;
};

/// Full chain: align, select by steady error, merge. Selection results are
/// folded back into the per-frame reports.
inline PipelineResult run_pipeline(const std::vector<Image>& frames,
                                   const std::vector<FrameTiming>& timings,
                                   const GyroTrace& trace, PipelineConfig cfg) {
  if (cfg.auto_noise) {
    const double sigma =
        frames.empty() || frames[0].width < 64 || frames[0].height < 64
            ? 0.0
            : estimate_noise_sigma(frames[0]);
    if (sigma > 0.0) cfg.merge.noise_variance = sigma * sigma;
  }

  auto [aligned, reports] = align_burst(frames, timings, trace, cfg);
  const std::vector<std::size_t> kept = select_frame_indices(aligned, cfg.merge);

  for (auto& rep : reports) rep.valid = false;
  std::vector<AlignedFrame> selected;
  selected.reserve(kept.size());
  for (const std::size_t i : kept) {
    reports[i].valid = true;
    selected.push_back(aligned[i]);
  }

  PipelineResult out;
  out.merged = merge_wiener(selected, cfg.merge);
  out.reports = std::move(reports);
  out.merged_frame_count = static_cast<int>(selected.size());
  out.noise_sigma_used = std::sqrt(cfg.merge.noise_variance);
  return out;
}

}  // namespace burst
