#pragma once

// On-disk layouts shared by the command-line tools.
//
// Frame group directory:
//   group.json              params, frame times, black times, seed, noise, file names
//   frame_XX_left.hsc       I^1..I^M (XX = 01..M) and frame_black_left.hsc for I^B,
//   frame_XX_right.hsc      RGB (N=3), invalid pixels stored as NaN
//   black_K.hsc             left black frames around the group, oldest first
//   oracle_flow_K.hsc       ground-truth black flows (simulated data only)
//   truth_cube.hsc, truth_depth.hsc, targets.json   (simulated data only)
//
// Calibration capture directory:
//   geometry.json           cameras and grid of the rig (bundle layout)
//   initial_tables.json     radiometric tables before refinement
//   scanlines.json + scanline_profiles.hsc   (profiles: width = scans, one row per (d, band, site))
//   eta_band_XX.hsc + eta_rois.hsc           (rois: plane 0 zero order, plane 1 first order)
//   refinement.json

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddsl/calib/captures.hpp"
#include "ddsl/core/frames.hpp"
#include "ddsl/core/io.hpp"
#include "ddsl/eval/metrics.hpp"
#include "ddsl/optics/bundle.hpp"
#include "ddsl/simulator/scene.hpp"

namespace ddsl {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PatternParams, line_offset, line_shift, line_width, count, proj_width,
                                                proj_height)

namespace eval {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Target, name, x0, y0, x1, y1)
}

namespace calib {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CalibrationPoint, x, y, z, reflectance)
}

}  // namespace ddsl

namespace ddsl::cli {

using nlohmann::json;

/// Fails with FormatError on keys `T` does not define, then converts.
template <class T>
T strict_from_json(const json& j, const std::string& what) {
  if (!j.is_object()) throw FormatError(what + " must be a JSON object");
  const json known = T{};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw FormatError("unknown " + what + " key: " + it.key());
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw FormatError(what + ": " + e.what());
  }
}

inline PatternParams pattern_params_from_json(const json& j) {
  const auto p = strict_from_json<PatternParams>(j, "pattern");
  p.validate();
  return p;
}

inline json vec2_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

inline Eigen::Vector2d vec2_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw FormatError(std::string(what) + " must be a [x, y] number pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

/// {"velocity": [x, y], "acceleration": [x, y], "jerk": [x, y]}, px per frame^k.
inline json motion_to_json(const sim::Motion& m) {
  return {{"velocity", vec2_json(m.velocity)}, {"acceleration", vec2_json(m.acceleration)}, {"jerk", vec2_json(m.jerk)}};
}

inline sim::Motion motion_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("motion must be a JSON object");
  sim::Motion m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "velocity") m.velocity = vec2_from(*it, "velocity");
    else if (it.key() == "acceleration") m.acceleration = vec2_from(*it, "acceleration");
    else if (it.key() == "jerk") m.jerk = vec2_from(*it, "jerk");
    else throw FormatError("unknown motion key: " + it.key());
  }
  if (!m.finite()) throw FormatError("motion must be finite");
  return m;
}

inline std::vector<eval::Target> targets_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("targets must be a JSON array");
  std::vector<eval::Target> out;
  for (const auto& t : j) out.push_back(strict_from_json<eval::Target>(t, "target"));
  return out;
}

// ---- masked RGB frames -------------------------------------------------

inline void write_masked(const std::filesystem::path& p, const RgbImage& img, const Mask& valid) {
  Image out = img;
  if (!valid.empty())
    for (int c = 0; c < out.channels(); ++c)
      for (std::size_t i = 0; i < valid.size(); ++i)
        if (!valid[i]) out.plane(c)[i] = std::numeric_limits<float>::quiet_NaN();
  io::write_image(p, out);
}

inline RgbImage read_masked(const std::filesystem::path& p, Mask& valid) {
  RgbImage img = io::read_image(p, 3);
  valid.assign(img.pixel_count(), 1);
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
      if (!std::isfinite(img.plane(c)[i])) {
        valid[i] = 0;
        img.plane(c)[i] = 0.0f;
      }
  return img;
}

// ---- frame groups ------------------------------------------------------

inline std::string frame_name(int i, int M, const char* side) {
  char buf[64];
  if (i > M) std::snprintf(buf, sizeof buf, "frame_black_%s.hsc", side);
  else std::snprintf(buf, sizeof buf, "frame_%02d_%s.hsc", i, side);
  return buf;
}

/// Writes every file of the group layout; returns the names written.
inline std::vector<std::string> save_group(const std::filesystem::path& dir, const FrameGroup& g,
                                           const std::vector<eval::Target>& targets = {}) {
  std::filesystem::create_directories(dir);
  const int M = g.pattern_count();
  if (static_cast<int>(g.frames.size()) != M + 1) throw ParamError("frame group must hold M pattern frames and I^B");
  std::vector<std::string> files;
  json j;
  j["format"] = "ddsl-group-1";
  j["patterns"] = g.params;
  j["frame_times"] = g.frame_times;
  j["black_times"] = g.black_times;
  j["reference_black"] = g.reference_black;
  j["seed"] = g.seed;
  j["noise_sigma"] = g.noise_sigma;
  j["frames"] = json::array();
  for (int i = 1; i <= M + 1; ++i) {
    const StereoFrame& f = g.frames[static_cast<std::size_t>(i - 1)];
    const std::string l = frame_name(i, M, "left"), r = frame_name(i, M, "right");
    write_masked(dir / l, f.left, f.left_valid);
    write_masked(dir / r, f.right, f.right_valid);
    j["frames"].push_back({{"left", l}, {"right", r}});
    files.push_back(l);
    files.push_back(r);
  }
  j["black_context"] = json::array();
  for (std::size_t k = 0; k < g.black_context.size(); ++k) {
    const std::string n = "black_" + std::to_string(k) + ".hsc";
    io::write_image(dir / n, g.black_context[k]);
    j["black_context"].push_back(n);
    files.push_back(n);
  }
  if (!g.oracle_black_flows.empty()) {
    j["oracle_black_flows"] = json::array();
    for (std::size_t k = 0; k < g.oracle_black_flows.size(); ++k) {
      const std::string n = "oracle_flow_" + std::to_string(k) + ".hsc";
      io::write_flow(dir / n, g.oracle_black_flows[k]);
      j["oracle_black_flows"].push_back(n);
      files.push_back(n);
    }
  }
  if (g.truth_cube) {
    io::write_cube(dir / "truth_cube.hsc", *g.truth_cube);
    j["truth_cube"] = "truth_cube.hsc";
    files.push_back("truth_cube.hsc");
  }
  if (g.truth_depth) {
    io::write_depth(dir / "truth_depth.hsc", *g.truth_depth);
    j["truth_depth"] = "truth_depth.hsc";
    files.push_back("truth_depth.hsc");
  }
  if (!targets.empty()) {
    write_json(dir / "targets.json", json(targets));
    files.push_back("targets.json");
  }
  write_json(dir / "group.json", j);
  files.push_back("group.json");
  return files;
}

inline FrameGroup load_group(const std::filesystem::path& dir) {
  const json j = read_json(dir / "group.json");
  FrameGroup g;
  try {
    if (j.value("format", "") != "ddsl-group-1") throw FormatError("group.json: unsupported format");
    g.params = pattern_params_from_json(j.at("patterns"));
    g.frame_times = j.at("frame_times").get<std::vector<double>>();
    g.black_times = j.at("black_times").get<std::vector<double>>();
    g.reference_black = j.at("reference_black").get<std::size_t>();
    g.seed = j.value("seed", std::uint64_t{0});
    g.noise_sigma = j.value("noise_sigma", 0.0);
    for (const auto& f : j.at("frames")) {
      StereoFrame s;
      s.left = read_masked(dir / f.at("left").get<std::string>(), s.left_valid);
      s.right = read_masked(dir / f.at("right").get<std::string>(), s.right_valid);
      g.frames.push_back(std::move(s));
    }
    for (const auto& n : j.at("black_context")) g.black_context.push_back(io::read_image(dir / n.get<std::string>(), 3));
    if (j.contains("oracle_black_flows"))
      for (const auto& n : j["oracle_black_flows"]) g.oracle_black_flows.push_back(io::read_flow(dir / n.get<std::string>()));
    if (j.contains("truth_cube")) g.truth_cube = io::read_cube(dir / j["truth_cube"].get<std::string>());
    if (j.contains("truth_depth")) g.truth_depth = io::read_depth(dir / j["truth_depth"].get<std::string>());
  } catch (const json::exception& e) {
    throw FormatError(std::string("group.json: ") + e.what());
  }
  const int M = g.pattern_count();
  if (static_cast<int>(g.frames.size()) != M + 1 || g.frame_times.size() != g.frames.size())
    throw FormatError("group.json: expected " + std::to_string(M + 1) + " frames and frame times");
  if (g.black_times.size() != g.black_context.size() || g.reference_black >= g.black_context.size())
    throw FormatError("group.json: black frames and times disagree");
  const int W = g.frames[0].left.width(), H = g.frames[0].left.height();
  for (const auto& f : g.frames)
    if (f.left.width() != W || f.left.height() != H || !f.right.same_shape(f.left))
      throw FormatError("frame sizes differ within the group");
  for (const auto& b : g.black_context)
    if (b.width() != W || b.height() != H) throw FormatError("black frame size differs from the group");
  return g;
}

// ---- calibration captures -----------------------------------------------

struct CalibrationCaptures {
  CalibrationBundle geometry;  // cameras; tables and dispersion are placeholders
  RadiometricTables initial;
  calib::ScanlineCaptureSet scanlines;
  calib::EtaCaptureSet eta;
  calib::RefinementCaptures refinement;
};

inline std::vector<std::string> save_calibration_captures(const std::filesystem::path& dir,
                                                          const CalibrationCaptures& c) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  json geo;
  geo["grid"] = grid_to_json(c.geometry.tables.grid);
  geo["cameras"]["left"] = detail::camera_to_json(c.geometry.left);
  geo["cameras"]["right"] = detail::camera_to_json(c.geometry.right);
  geo["cameras"]["projector"] = detail::camera_to_json(c.geometry.projector);
  write_json(dir / "geometry.json", geo);
  write_json(dir / "initial_tables.json", tables_to_json(c.initial));

  const auto& s = c.scanlines;
  write_json(dir / "scanlines.json", {{"grid", grid_to_json(s.grid)},
                                      {"site_x", s.site_x},
                                      {"site_y", s.site_y},
                                      {"depths", s.depths},
                                      {"site_depth", s.site_depth},
                                      {"scan_columns", s.scan_columns}});
  const int rows = static_cast<int>(s.depths.size() * s.grid.size() * s.sites());
  Image prof(static_cast<int>(s.scans()), rows, 1);
  if (prof.data().size() != s.profiles.size()) throw ParamError("scanline profile count mismatch");
  prof.data() = s.profiles;
  io::write_image(dir / "scanline_profiles.hsc", prof);

  for (std::size_t j = 0; j < c.eta.images.size(); ++j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "eta_band_%02zu.hsc", j);
    io::write_image(dir / buf, c.eta.images[j]);
    files.push_back(buf);
  }
  if (!c.eta.images.empty()) {
    Image rois(c.eta.images[0].width(), c.eta.images[0].height(), 2);
    for (std::size_t i = 0; i < rois.pixel_count(); ++i) {
      rois.plane(0)[i] = c.eta.zero_roi[i] ? 1.0f : 0.0f;
      rois.plane(1)[i] = c.eta.first_roi[i] ? 1.0f : 0.0f;
    }
    io::write_image(dir / "eta_rois.hsc", rois);
  }
  write_json(dir / "refinement.json", {{"points", c.refinement.points},
                                       {"scan_columns", c.refinement.scan_columns},
                                       {"intensities", c.refinement.intensities}});
  for (const char* f : {"geometry.json", "initial_tables.json", "scanlines.json", "scanline_profiles.hsc",
                        "eta_rois.hsc", "refinement.json"})
    files.push_back(f);
  return files;
}

inline CalibrationCaptures load_calibration_captures(const std::filesystem::path& dir) {
  CalibrationCaptures c;
  try {
    const json geo = read_json(dir / "geometry.json");
    const WavelengthGrid grid = grid_from_json(geo.at("grid"));
    c.geometry.left = detail::camera_from_json(geo.at("cameras").at("left"));
    c.geometry.right = detail::camera_from_json(geo.at("cameras").at("right"));
    c.geometry.projector = detail::camera_from_json(geo.at("cameras").at("projector"));
    c.geometry.tables = RadiometricTables(grid);
    c.initial = tables_from_json(read_json(dir / "initial_tables.json"), grid);

    const json sj = read_json(dir / "scanlines.json");
    auto& s = c.scanlines;
    s.grid = grid_from_json(sj.at("grid"));
    s.site_x = sj.at("site_x").get<std::vector<double>>();
    s.site_y = sj.at("site_y").get<std::vector<double>>();
    s.depths = sj.at("depths").get<std::vector<double>>();
    s.site_depth = sj.at("site_depth").get<std::vector<double>>();
    s.scan_columns = sj.at("scan_columns").get<std::vector<int>>();
    const Image prof = io::read_image(dir / "scanline_profiles.hsc", 1);
    if (static_cast<std::size_t>(prof.width()) != s.scans() ||
        static_cast<std::size_t>(prof.height()) != s.depths.size() * s.grid.size() * s.sites())
      throw FormatError("scanline profiles do not match scanlines.json");
    if (s.site_depth.size() != s.depths.size() * s.sites()) throw FormatError("scanlines.json: site_depth size");
    s.profiles = prof.data();

    for (std::size_t j = 0; j < grid.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "eta_band_%02zu.hsc", j);
      c.eta.images.push_back(io::read_image(dir / buf, 3));
    }
    const Image rois = io::read_image(dir / "eta_rois.hsc", 2);
    for (const auto& img : c.eta.images)
      if (!img.same_shape(c.eta.images[0]) || img.width() != rois.width() || img.height() != rois.height())
        throw FormatError("eta captures differ in size");
    c.eta.zero_roi.resize(rois.pixel_count());
    c.eta.first_roi.resize(rois.pixel_count());
    for (std::size_t i = 0; i < rois.pixel_count(); ++i) {
      c.eta.zero_roi[i] = rois.plane(0)[i] > 0.5f;
      c.eta.first_roi[i] = rois.plane(1)[i] > 0.5f;
    }

    const json rj = read_json(dir / "refinement.json");
    for (const auto& p : rj.at("points")) c.refinement.points.push_back(strict_from_json<calib::CalibrationPoint>(p, "point"));
    c.refinement.scan_columns = rj.at("scan_columns").get<std::vector<int>>();
    c.refinement.intensities = rj.at("intensities").get<std::vector<double>>();
    if (c.refinement.intensities.size() != c.refinement.points.size() * c.refinement.scans() * 3)
      throw FormatError("refinement.json: intensity count mismatch");
  } catch (const json::exception& e) {
    throw FormatError(std::string("calibration captures: ") + e.what());
  }
  return c;
}

}  // namespace ddsl::cli
