// Command-line front end: simulate ground-truth bursts, align and merge
// them, and score results against the recorded truth.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "burst/burst_io.hpp"
#include "burst/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitNoValidFrames = 3;

struct CliOptions {
  burst::PipelineConfig pipeline;
  double intrinsics_focal = 300.0;
  int frame_width = 256;
  int frame_height = 256;
  std::string config_path;

  // simulate
  std::string preset = "offset";
  int n_frames = 16;
  double strength = 1.0;
  double image_noise_sigma = 0.02;
  double gyro_noise_sigma = 0.0;
  double gyro_bias = 0.0;
  double gyro_rate_hz = 200.0;
  double frame_rate_hz = 30.0;
  double exposure_ms = 8.0;
  double plane_depth = 20.0;
  std::uint64_t seed = 1;
};

burst::MotionPreset parse_preset(const std::string& name) {
  if (name == "offset") return burst::MotionPreset::kOffset;
  if (name == "rotation") return burst::MotionPreset::kInPlaneRotation;
  if (name == "xrot") return burst::MotionPreset::kOutOfPlaneRotation;
  throw burst::InputFormat("unknown preset: " + name +
                           " (want offset|rotation|xrot)");
}

// `key = value` entries override the corresponding flags.
void apply_config_file(CliOptions& opt) {
  if (opt.config_path.empty()) return;
  const auto kv = burst::load_config_kv(opt.config_path);
  const auto get_d = [&](const std::string& key, double& slot) {
    auto it = kv.find(key);
    if (it != kv.end()) slot = std::stod(it->second);
  };
  const auto get_i = [&](const std::string& key, int& slot) {
    auto it = kv.find(key);
    if (it != kv.end()) slot = std::stoi(it->second);
  };
  auto& p = opt.pipeline;
  get_d("intrinsics.fx", p.intrinsics.fx);
  get_d("intrinsics.fy", p.intrinsics.fy);
  get_d("intrinsics.cx", p.intrinsics.cx);
  get_d("intrinsics.cy", p.intrinsics.cy);
  get_d("ukf.alpha", p.ukf.alpha);
  get_d("ukf.beta", p.ukf.beta);
  get_d("ukf.process_noise_sigma", p.ukf.process_noise_sigma);
  get_d("ukf.measurement_noise_sigma", p.ukf.measurement_noise_sigma);
  get_i("merge.tile", p.merge.tile);
  get_i("merge.overlap", p.merge.overlap);
  get_d("merge.noise_variance", p.merge.noise_variance);
  get_i("merge.max_frames", p.merge.max_frames);
  get_d("merge.steady_error_threshold", p.merge.steady_error_threshold);
  get_d("merge.shrink_c", p.merge.shrink_c);
  get_i("features.max_corners", p.features.max_corners);
  get_d("features.min_distance", p.features.min_distance);
  get_i("features.patch", p.features.patch);
  get_i("features.search_radius", p.features.search_radius);
  get_d("features.zncc_threshold", p.features.zncc_threshold);
  get_d("features.point_noise_sigma", p.features.point_noise_sigma);
  get_d("ransac.inlier_threshold", p.ransac.inlier_threshold);
  get_i("ransac.max_iters", p.ransac.max_iters);
  get_i("fallback_levels", p.fallback_levels);
  get_i("fallback_search", p.fallback_search);
  get_i("refine_max_iters", p.refine_max_iters);
  get_d("refine_tol_px", p.refine_tol_px);
  if (auto it = kv.find("rk4_step_ns"); it != kv.end()) {
    p.rk4_step_ns = std::stoll(it->second);
  }
  if (auto it = kv.find("seed"); it != kv.end()) {
    opt.seed = std::stoull(it->second);
  }
  if (auto it = kv.find("merge.noise_variance"); it != kv.end()) {
    p.auto_noise = false;
  }
}

json report_to_json(const std::vector<burst::FrameReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json gyro = json::array();
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) gyro.push_back(r.gyro_rotation.m(i, j));
    }
    arr.push_back({{"frame_id", r.frame_id},
                   {"gyro_rotation", gyro},
                   {"initial_h", burst::homography_to_json(r.initial_h)},
                   {"refined_h", burst::homography_to_json(r.refined_h)},
                   {"steady_error", r.steady_error},
                   {"fallback_shift", {r.fallback_shift.x(), r.fallback_shift.y()}},
                   {"valid", r.valid},
                   {"feature_count", r.feature_count}});
  }
  return arr;
}

int run_simulate(const CliOptions& opt, const std::string& out_dir) {
  burst::SensorModel sensor;
  sensor.gyro_rate_hz = opt.gyro_rate_hz;
  sensor.gyro_noise_sigma = opt.gyro_noise_sigma;
  sensor.gyro_bias = burst::Vec3::Constant(opt.gyro_bias);
  sensor.frame_rate_hz = opt.frame_rate_hz;
  sensor.exposure_ns = static_cast<std::int64_t>(opt.exposure_ms * 1e6);
  sensor.image_noise_sigma = opt.image_noise_sigma;

  burst::CameraIntrinsics k{opt.intrinsics_focal, opt.intrinsics_focal,
                            opt.frame_width / 2.0, opt.frame_height / 2.0};

  const auto traj = burst::make_preset_trajectory(parse_preset(opt.preset),
                                                  opt.n_frames, sensor, opt.strength);

  // Scene extent covers the worst-case excursion with margin.
  const int margin = std::max(64, std::max(opt.frame_width, opt.frame_height) / 2);
  const burst::Image scene = burst::make_test_scene(
      opt.frame_width + 2 * margin, opt.frame_height + 2 * margin, opt.seed);

  const auto burst_data =
      burst::render_burst(scene, traj, sensor, k, opt.plane_depth, opt.seed);
  burst::save_burst_dir(burst_data, out_dir);
  std::cout << "wrote " << burst_data.frames.size() << " frames to " << out_dir
            << "\n";
  return kExitOk;
}

int run_align(const CliOptions& opt, const std::string& burst_dir,
              const std::string& out_image, const std::string& out_report) {
  const burst::LoadedBurst loaded = burst::load_burst_dir(burst_dir);
  burst::PipelineConfig cfg = opt.pipeline;
  cfg.seed = opt.seed;
  if (loaded.truth) {
    cfg.intrinsics = loaded.truth->intrinsics;
    if (loaded.truth->image_noise_sigma > 0.0) {
      cfg.merge.noise_variance =
          loaded.truth->image_noise_sigma * loaded.truth->image_noise_sigma;
      cfg.auto_noise = false;
    }
  }

  const burst::PipelineResult result =
      burst::run_pipeline(loaded.frames, loaded.timings, loaded.trace, cfg);
  burst::save_image(result.merged, out_image);

  json rep;
  rep["frames"] = report_to_json(result.reports);
  rep["merged_frame_count"] = result.merged_frame_count;
  rep["noise_sigma_used"] = result.noise_sigma_used;

  if (loaded.truth && loaded.clean_reference) {
    rep["metrics"]["merged_psnr_db"] = burst::psnr(result.merged, *loaded.clean_reference);
    rep["metrics"]["single_frame_psnr_db"] =
        burst::psnr(loaded.frames[0], *loaded.clean_reference);
  }
  if (loaded.truth) {
    json errs = json::array();
    const double fsz = std::max(result.merged.width, result.merged.height);
    for (std::size_t i = 0; i < result.reports.size() &&
                            i < loaded.truth->homographies.size();
         ++i) {
      errs.push_back(burst::homography_error(result.reports[i].refined_h,
                                             loaded.truth->homographies[i], fsz));
    }
    rep["metrics"]["homography_error_px"] = errs;
  }

  if (!out_report.empty()) {
    std::ofstream out(out_report);
    if (!out) throw burst::InputFormat("cannot open for writing: " + out_report);
    out << rep.dump(2) << "\n";
  }
  std::cout << "merged " << result.merged_frame_count << " of "
            << loaded.frames.size() << " frames -> " << out_image << "\n";

  if (loaded.frames.size() > 1 && result.merged_frame_count <= 1) {
    std::cerr << "no alternative frame survived selection\n";
    return kExitNoValidFrames;
  }
  return kExitOk;
}

int run_evaluate(const std::string& burst_dir, const std::string& merged_path,
                 const std::string& report_path, const std::string& out_path) {
  const burst::LoadedBurst loaded = burst::load_burst_dir(burst_dir);
  if (!loaded.truth) {
    throw burst::InputFormat(burst_dir + ": truth.json required for evaluation");
  }
  const burst::Image merged = burst::load_image(merged_path);

  json metrics;
  if (loaded.clean_reference) {
    metrics["merged_psnr_db"] = burst::psnr(merged, *loaded.clean_reference);
    metrics["single_frame_psnr_db"] =
        burst::psnr(loaded.frames[0], *loaded.clean_reference);
  }
  if (!report_path.empty()) {
    std::ifstream in(report_path);
    if (!in) throw burst::InputFormat("cannot open: " + report_path);
    json rep;
    in >> rep;
    json errs = json::array();
    const double fsz = std::max(merged.width, merged.height);
    int valid = 0;
    for (const auto& fr : rep.at("frames")) {
      const auto est = burst::homography_from_json(fr.at("refined_h"));
      const std::size_t id = fr.at("frame_id").get<std::size_t>();
      if (id < loaded.truth->homographies.size()) {
        errs.push_back(
            burst::homography_error(est, loaded.truth->homographies[id], fsz));
      }
      valid += fr.at("valid").get<bool>() ? 1 : 0;
    }
    metrics["homography_error_px"] = errs;
    metrics["valid_frames"] = valid;
  }

  std::ofstream out(out_path);
  if (!out) throw burst::InputFormat("cannot open for writing: " + out_path);
  out << metrics.dump(2) << "\n";
  std::cout << metrics.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gyro-aided burst alignment and merge"};
  app.require_subcommand(1);

  CliOptions opt;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path,
                    "key = value file; entries override flags");
    cmd->add_option("--seed", opt.seed, "RNG seed");
    cmd->add_option("--focal", opt.intrinsics_focal, "focal length, px");
    cmd->add_option("--width", opt.frame_width, "frame width, px");
    cmd->add_option("--height", opt.frame_height, "frame height, px");
  };
  const auto add_pipeline = [&](CLI::App* cmd) {
    auto& p = opt.pipeline;
    cmd->add_option("--max-corners", p.features.max_corners);
    cmd->add_option("--patch", p.features.patch);
    cmd->add_option("--search-radius", p.features.search_radius);
    cmd->add_option("--zncc-threshold", p.features.zncc_threshold);
    cmd->add_option("--ukf-alpha", p.ukf.alpha);
    cmd->add_option("--ukf-beta", p.ukf.beta);
    cmd->add_option("--process-noise", p.ukf.process_noise_sigma);
    cmd->add_option("--measurement-noise", p.ukf.measurement_noise_sigma);
    cmd->add_option("--tile", p.merge.tile);
    cmd->add_option("--overlap", p.merge.overlap);
    cmd->add_option("--max-frames", p.merge.max_frames);
    cmd->add_option("--steady-threshold", p.merge.steady_error_threshold);
    cmd->add_option("--noise-variance", p.merge.noise_variance)
        ->each([&](const std::string&) { p.auto_noise = false; });
    cmd->add_option("--rk4-step-ns", p.rk4_step_ns);
    cmd->add_option("--fallback-levels", p.fallback_levels);
    cmd->add_option("--fallback-search", p.fallback_search);
    cmd->add_option("--refine-iters", p.refine_max_iters);
    cmd->add_option("--refine-tol", p.refine_tol_px);
  };

  std::string out_dir = "burst_out";
  std::string burst_dir;
  std::string merged_path = "merged.png";
  std::string report_path = "report.json";
  std::string metrics_path = "metrics.json";

  CLI::App* sim = app.add_subcommand("simulate", "render a ground-truth burst");
  sim->add_option("--out", out_dir, "output burst directory")->required();
  sim->add_option("--preset", opt.preset, "offset|rotation|xrot");
  sim->add_option("--frames", opt.n_frames, "number of frames");
  sim->add_option("--strength", opt.strength,
                  "motion per frame: scene units (offset) or degrees (rotations)");
  sim->add_option("--sigma", opt.image_noise_sigma, "image noise std");
  sim->add_option("--gyro-noise", opt.gyro_noise_sigma, "gyro noise std, rad/s");
  sim->add_option("--gyro-bias", opt.gyro_bias, "per-axis gyro bias, rad/s");
  sim->add_option("--gyro-rate", opt.gyro_rate_hz, "gyro sample rate, Hz");
  sim->add_option("--frame-rate", opt.frame_rate_hz, "frame rate, Hz");
  sim->add_option("--exposure-ms", opt.exposure_ms, "exposure, ms");
  sim->add_option("--depth", opt.plane_depth, "plane depth, scene units");
  add_common(sim);

  CLI::App* align = app.add_subcommand("align", "align and merge a burst directory");
  align->add_option("--burst", burst_dir, "burst directory")->required();
  align->add_option("--out", merged_path, "merged output image");
  align->add_option("--report", report_path, "per-frame JSON report");
  add_common(align);
  add_pipeline(align);

  CLI::App* eval = app.add_subcommand("evaluate", "score a merged image against truth");
  eval->add_option("--burst", burst_dir, "burst directory with truth.json")->required();
  eval->add_option("--merged", merged_path, "merged image")->required();
  eval->add_option("--report", report_path, "alignment report (optional)");
  eval->add_option("--out", metrics_path, "metrics JSON output");
  add_common(eval);

  CLI::App* demo = app.add_subcommand("demo", "simulate, align, evaluate in one run");
  demo->add_option("--workdir", out_dir, "working directory");
  demo->add_option("--preset", opt.preset, "offset|rotation|xrot");
  demo->add_option("--frames", opt.n_frames, "number of frames");
  demo->add_option("--strength", opt.strength, "motion per frame");
  demo->add_option("--sigma", opt.image_noise_sigma, "image noise std");
  demo->add_option("--gyro-noise", opt.gyro_noise_sigma, "gyro noise std, rad/s");
  demo->add_option("--gyro-bias", opt.gyro_bias, "per-axis gyro bias, rad/s");
  add_common(demo);
  add_pipeline(demo);

  try {
    app.parse(argc, argv);
    apply_config_file(opt);
    opt.pipeline.seed = opt.seed;

    if (sim->parsed()) return run_simulate(opt, out_dir);
    if (align->parsed()) return run_align(opt, burst_dir, merged_path, report_path);
    if (eval->parsed()) {
      return run_evaluate(burst_dir, merged_path,
                          eval->count("--report") ? report_path : "", metrics_path);
    }
    if (demo->parsed()) {
      const std::string dir = out_dir;
      int rc = run_simulate(opt, dir);
      if (rc != kExitOk) return rc;
      const std::string merged = (fs::path(dir) / "merged.png").string();
      const std::string report = (fs::path(dir) / "report.json").string();
      rc = run_align(opt, dir, merged, report);
      if (rc != kExitOk) return rc;
      return run_evaluate(dir, merged, report,
                          (fs::path(dir) / "metrics.json").string());
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const burst::InputFormat& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const burst::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
