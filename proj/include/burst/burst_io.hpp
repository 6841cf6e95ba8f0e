#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "burst/features.hpp"
#include "burst/geometry.hpp"
#include "burst/gyro.hpp"
#include "burst/image_io.hpp"
#include "burst/simulator.hpp"

namespace burst {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Gyro CSV: header `t_ns,omega_x,omega_y,omega_z`, one sample per row,
/// omega in rad/s, t in integer nanoseconds.
inline void save_gyro_csv(const GyroTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputFormat("cannot open for writing: " + path);
  out << "t_ns,omega_x,omega_y,omega_z\n";
  out.precision(17);
  for (const auto& s : trace.samples) {
    out << s.t_ns << "," << s.omega.x() << "," << s.omega.y() << ","
        << s.omega.z() << "\n";
  }
}

inline GyroTrace load_gyro_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputFormat("cannot open: " + path);
  GyroTrace trace;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line.rfind("t_ns", 0) != 0) {
        throw InputFormat(path + ":1: expected header t_ns,omega_x,omega_y,omega_z");
      }
      continue;
    }
    GyroSample s;
    char c1, c2, c3;
    std::istringstream ss(line);
    if (!(ss >> s.t_ns >> c1 >> s.omega.x() >> c2 >> s.omega.y() >> c3 >>
          s.omega.z()) ||
        c1 != ',' || c2 != ',' || c3 != ',') {
      throw InputFormat(path + ":" + std::to_string(line_no) + ": bad gyro row");
    }
    trace.samples.push_back(s);
  }
  trace.validate();
  return trace;
}

/// Frame timing JSON: array of {frame_id, exposure_start_ns, exposure_end_ns}.
inline void save_timing_json(const std::vector<FrameTiming>& timings,
                             const std::string& path) {
  json arr = json::array();
  for (std::size_t i = 0; i < timings.size(); ++i) {
    arr.push_back({{"frame_id", i},
                   {"exposure_start_ns", timings[i].exposure_start_ns},
                   {"exposure_end_ns", timings[i].exposure_end_ns}});
  }
  std::ofstream out(path);
  if (!out) throw InputFormat("cannot open for writing: " + path);
  out << arr.dump(2) << "\n";
}

inline std::vector<FrameTiming> load_timing_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputFormat("cannot open: " + path);
  json arr;
  try {
    in >> arr;
  } catch (const json::exception& e) {
    throw InputFormat(path + ": " + e.what());
  }
  if (!arr.is_array()) throw InputFormat(path + ": expected a JSON array");
  std::vector<FrameTiming> timings(arr.size());
  for (const auto& item : arr) {
    try {
      const std::size_t id = item.at("frame_id").get<std::size_t>();
      if (id >= timings.size()) throw InputFormat(path + ": frame_id out of range");
      timings[id] = {item.at("exposure_start_ns").get<std::int64_t>(),
                     item.at("exposure_end_ns").get<std::int64_t>()};
    } catch (const json::exception& e) {
      throw InputFormat(path + ": " + e.what());
    }
  }
  for (const auto& t : timings) {
    if (t.exposure_end_ns <= t.exposure_start_ns) {
      throw InputFormat(path + ": exposure_end_ns must exceed exposure_start_ns");
    }
  }
  return timings;
}

inline json homography_to_json(const Homography& h) {
  json row = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) row.push_back(h.h(r, c));
  }
  return row;
}

inline Homography homography_from_json(const json& row) {
  if (!row.is_array() || row.size() != 9) {
    throw InputFormat("homography must be a 9-element row-major array");
  }
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = row[3 * r + c].get<double>();
  }
  return {m};
}

struct BurstTruth {
  std::vector<Homography> homographies;
  CameraIntrinsics intrinsics;
  std::uint64_t seed = 0;
  double image_noise_sigma = 0.0;
  double plane_depth = 0.0;
};

inline void save_truth_json(const BurstTruth& truth, const std::string& path) {
  json j;
  j["seed"] = truth.seed;
  j["intrinsics"] = {{"fx", truth.intrinsics.fx},
                     {"fy", truth.intrinsics.fy},
                     {"cx", truth.intrinsics.cx},
                     {"cy", truth.intrinsics.cy}};
  j["image_noise_sigma"] = truth.image_noise_sigma;
  j["plane_depth"] = truth.plane_depth;
  json arr = json::array();
  for (const auto& h : truth.homographies) arr.push_back(homography_to_json(h));
  j["homographies"] = arr;
  std::ofstream out(path);
  if (!out) throw InputFormat("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

inline BurstTruth load_truth_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputFormat("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputFormat(path + ": " + e.what());
  }
  BurstTruth truth;
  try {
    truth.seed = j.at("seed").get<std::uint64_t>();
    const auto& k = j.at("intrinsics");
    truth.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                        k.at("cx").get<double>(), k.at("cy").get<double>()};
    truth.image_noise_sigma = j.value("image_noise_sigma", 0.0);
    truth.plane_depth = j.value("plane_depth", 0.0);
    for (const auto& row : j.at("homographies")) {
      truth.homographies.push_back(homography_from_json(row));
    }
  } catch (const json::exception& e) {
    throw InputFormat(path + ": " + e.what());
  }
  return truth;
}

/// Correspondence dump: header then `x,y,x_prime,y_prime,score` rows.
inline void save_correspondences_csv(const CorrespondenceSet& set,
                                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputFormat("cannot open for writing: " + path);
  out << "x,y,x_prime,y_prime,score\n";
  out.precision(17);
  for (const auto& m : set.pairs) {
    out << m.x.x() << "," << m.x.y() << "," << m.x_prime.x() << ","
        << m.x_prime.y() << "," << m.score << "\n";
  }
}

inline CorrespondenceSet load_correspondences_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputFormat("cannot open: " + path);
  CorrespondenceSet set;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("x,", 0) == 0) continue;
    Correspondence m;
    char c1, c2, c3, c4;
    std::istringstream ss(line);
    if (!(ss >> m.x.x() >> c1 >> m.x.y() >> c2 >> m.x_prime.x() >> c3 >>
          m.x_prime.y() >> c4 >> m.score) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',') {
      throw InputFormat(path + ":" + std::to_string(line_no) +
                        ": bad correspondence row");
    }
    set.pairs.push_back(m);
  }
  return set;
}

/// Burst directory layout: frame_%04d.png, gyro.csv, timing.json,
/// truth.json (when ground truth exists), clean_reference.png.
inline void save_burst_dir(const GroundTruthBurst& burst, const std::string& dir) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < burst.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%04zu.png", i);
    save_png16(burst.frames[i], (fs::path(dir) / name).string());
  }
  save_gyro_csv(burst.trace, (fs::path(dir) / "gyro.csv").string());
  save_timing_json(burst.timings, (fs::path(dir) / "timing.json").string());
  BurstTruth truth{burst.true_homographies, burst.intrinsics, burst.seed,
                   burst.image_noise_sigma, burst.plane_depth};
  save_truth_json(truth, (fs::path(dir) / "truth.json").string());
  if (!burst.clean_reference.empty()) {
    save_png16(burst.clean_reference, (fs::path(dir) / "clean_reference.png").string());
  }
}

struct LoadedBurst {
  std::vector<Image> frames;
  std::vector<FrameTiming> timings;
  GyroTrace trace;
  std::optional<BurstTruth> truth;
  std::optional<Image> clean_reference;
};

inline LoadedBurst load_burst_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) throw InputFormat("not a directory: " + dir);
  LoadedBurst burst;
  char name[32];
  for (std::size_t i = 0;; ++i) {
    std::snprintf(name, sizeof(name), "frame_%04zu", i);
    const fs::path png = fs::path(dir) / (std::string(name) + ".png");
    const fs::path pgm = fs::path(dir) / (std::string(name) + ".pgm");
    if (fs::exists(png)) {
      burst.frames.push_back(load_image(png.string()));
    } else if (fs::exists(pgm)) {
      burst.frames.push_back(load_image(pgm.string()));
    } else {
      break;
    }
  }
  if (burst.frames.empty()) {
    throw InputFormat(dir + ": no frame_0000.png / frame_0000.pgm found");
  }
  burst.trace = load_gyro_csv((fs::path(dir) / "gyro.csv").string());
  burst.timings = load_timing_json((fs::path(dir) / "timing.json").string());
  if (burst.timings.size() != burst.frames.size()) {
    throw InputFormat(dir + ": timing.json entries do not match frame count");
  }
  const fs::path truth_path = fs::path(dir) / "truth.json";
  if (fs::exists(truth_path)) {
    burst.truth = load_truth_json(truth_path.string());
  }
  const fs::path clean_path = fs::path(dir) / "clean_reference.png";
  if (fs::exists(clean_path)) {
    burst.clean_reference = load_image(clean_path.string());
  }
  return burst;
}

/// `key = value` configuration lines; '#' starts a comment. Returns the flat
/// key/value map; interpretation belongs to the caller.
inline std::map<std::string, std::string> load_config_kv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputFormat("cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InputFormat(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InputFormat(path + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    kv[key] = value;
  }
  return kv;
}

}  // namespace burst
