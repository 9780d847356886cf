#pragma once

// Calibration bundle JSON:
// {
//   "grid":       {"lambda_min": 440, "step": 10, "count": 23},
//   "cameras":    {"left"|"right"|"projector": {"K": [9 row-major], "E": [16 row-major],
//                                              "width": w, "height": h}},
//   "radiometry": {"camera": {"R": [N], "G": [N], "B": [N]},
//                  "projector": {"R": [N], "G": [N], "B": [N]}, "eta": [N]},
//   "dispersion": {"site_x": [...], "site_y": [...], "depth_min": m, "depth_max": m,
//                  "lattice": [band][row][column] -> [alpha, beta, gamma]}
// }

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "ddsl/core/error.hpp"
#include "ddsl/optics/camera.hpp"
#include "ddsl/optics/dispersion.hpp"
#include "ddsl/optics/radiometry.hpp"

namespace ddsl {

struct CalibrationBundle {
  PinholeCamera left;
  PinholeCamera right;
  PinholeCamera projector;
  RadiometricTables tables;
  DispersionModel dispersion;
};

namespace detail {

inline constexpr const char* kChannelNames[3] = {"R", "G", "B"};

inline nlohmann::json camera_to_json(const PinholeCamera& cam) {
  nlohmann::json j;
  std::vector<double> K, E;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) K.push_back(cam.K(r, c));
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) E.push_back(cam.E(r, c));
  j["K"] = K;
  j["E"] = E;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

inline PinholeCamera camera_from_json(const nlohmann::json& j) {
  PinholeCamera cam;
  const auto K = j.at("K").get<std::vector<double>>();
  const auto E = j.at("E").get<std::vector<double>>();
  if (K.size() != 9 || E.size() != 16) throw FormatError("camera matrices must have 9 and 16 entries");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.K(r, c) = K[r * 3 + c];
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) cam.E(r, c) = E[r * 4 + c];
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  return cam;
}

}  // namespace detail

inline nlohmann::json grid_to_json(const WavelengthGrid& g) {
  return {{"lambda_min", g.lambda_min()}, {"step", g.step()}, {"count", g.size()}};
}

inline WavelengthGrid grid_from_json(const nlohmann::json& j) {
  return WavelengthGrid(j.at("lambda_min").get<double>(), j.at("step").get<double>(),
                        j.at("count").get<std::size_t>());
}

inline nlohmann::json tables_to_json(const RadiometricTables& t) {
  nlohmann::json j;
  for (int c = 0; c < 3; ++c) {
    j["camera"][detail::kChannelNames[c]] = t.cam[c];
    j["projector"][detail::kChannelNames[c]] = t.proj[c];
  }
  j["eta"] = t.eta;
  return j;
}

inline RadiometricTables tables_from_json(const nlohmann::json& j, const WavelengthGrid& grid) {
  RadiometricTables t(grid);
  for (int c = 0; c < 3; ++c) {
    t.cam[c] = j.at("camera").at(detail::kChannelNames[c]).get<std::vector<double>>();
    t.proj[c] = j.at("projector").at(detail::kChannelNames[c]).get<std::vector<double>>();
  }
  t.eta = j.at("eta").get<std::vector<double>>();
  try {
    t.validate();
  } catch (const ParamError& e) {
    throw FormatError(std::string("radiometry: ") + e.what());
  }
  return t;
}

inline nlohmann::json dispersion_to_json(const DispersionModel& m) {
  nlohmann::json j;
  j["site_x"] = m.site_x();
  j["site_y"] = m.site_y();
  j["depth_min"] = m.depth_min();
  j["depth_max"] = m.depth_max();
  nlohmann::json lattice = nlohmann::json::array();
  for (std::size_t b = 0; b < m.grid().size(); ++b) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t iy = 0; iy < m.site_y().size(); ++iy) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t ix = 0; ix < m.site_x().size(); ++ix) {
        const PowerLaw& p = m.coeff(b, iy, ix);
        row.push_back({p.alpha, p.beta, p.gamma});
      }
      rows.push_back(std::move(row));
    }
    lattice.push_back(std::move(rows));
  }
  j["lattice"] = std::move(lattice);
  return j;
}

inline DispersionModel dispersion_from_json(const nlohmann::json& j, const WavelengthGrid& grid) {
  auto sx = j.at("site_x").get<std::vector<double>>();
  auto sy = j.at("site_y").get<std::vector<double>>();
  const auto& lattice = j.at("lattice");
  if (lattice.size() != grid.size()) throw FormatError("dispersion lattice band count mismatch");
  std::vector<PowerLaw> coeffs;
  for (const auto& rows : lattice) {
    if (rows.size() != sy.size()) throw FormatError("dispersion lattice row count mismatch");
    for (const auto& row : rows) {
      if (row.size() != sx.size()) throw FormatError("dispersion lattice column count mismatch");
      for (const auto& abc : row) {
        if (abc.size() != 3) throw FormatError("dispersion entries must be [alpha, beta, gamma]");
        coeffs.push_back({abc[0].get<double>(), abc[1].get<double>(), abc[2].get<double>()});
      }
    }
  }
  try {
    return DispersionModel(grid, std::move(sx), std::move(sy), std::move(coeffs), j.at("depth_min").get<double>(),
                           j.at("depth_max").get<double>());
  } catch (const ParamError& e) {
    throw FormatError(std::string("dispersion: ") + e.what());
  }
}

inline nlohmann::json bundle_to_json(const CalibrationBundle& b) {
  nlohmann::json j;
  j["grid"] = grid_to_json(b.tables.grid);
  j["cameras"]["left"] = detail::camera_to_json(b.left);
  j["cameras"]["right"] = detail::camera_to_json(b.right);
  j["cameras"]["projector"] = detail::camera_to_json(b.projector);
  j["radiometry"] = tables_to_json(b.tables);
  j["dispersion"] = dispersion_to_json(b.dispersion);
  return j;
}

inline CalibrationBundle bundle_from_json(const nlohmann::json& j) {
  try {
    CalibrationBundle b;
    const WavelengthGrid grid = grid_from_json(j.at("grid"));
    b.left = detail::camera_from_json(j.at("cameras").at("left"));
    b.right = detail::camera_from_json(j.at("cameras").at("right"));
    b.projector = detail::camera_from_json(j.at("cameras").at("projector"));
    b.tables = tables_from_json(j.at("radiometry"), grid);
    b.dispersion = dispersion_from_json(j.at("dispersion"), grid);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("calibration bundle: ") + e.what());
  } catch (const GridError& e) {
    throw FormatError(std::string("calibration bundle: ") + e.what());
  }
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed for " + path.string());
}

inline void save_bundle(const std::filesystem::path& path, const CalibrationBundle& b) {
  write_json(path, bundle_to_json(b));
}

inline CalibrationBundle load_bundle(const std::filesystem::path& path) {
  return bundle_from_json(read_json(path));
}

}  // namespace ddsl
