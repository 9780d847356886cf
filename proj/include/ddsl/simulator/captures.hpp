#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ddsl/calib/captures.hpp"
#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/setup.hpp"

namespace ddsl::sim {

using calib::CalibrationPoint;
using calib::EtaCaptureSet;
using calib::RefinementCaptures;
using calib::ScanlineCaptureSet;

struct ScanlineCaptureOptions {
  std::vector<double> depths = {0.5, 0.65, 0.8, 0.95, 1.1};
  double target_reflectance = 0.99;
  double noise_sigma = 0.0;        // on every profile sample
  double depth_noise_sigma = 0.0;  // on triangulated depths, metres
  std::uint64_t seed = 0;
  RenderOptions render;
};

/// White projector column `k` as a column-constant light.
inline ProjectedLight scanline_light(const PinholeCamera& projector, int column, std::span<const double> kernel) {
  std::vector<float> cols(projector.width, 0.0f);
  cols[column] = 1.0f;
  return ProjectedLight(cols, projector.height, kernel);
}

inline ScanlineCaptureSet simulate_scanline_captures(const CalibrationBundle& rig,
                                                     const ScanlineCaptureOptions& o = {}) {
  if (o.depths.empty()) throw ParamError("scanline captures need at least one depth");
  ScanlineCaptureSet set;
  set.grid = rig.tables.grid;
  set.site_x = rig.dispersion.site_x();
  set.site_y = rig.dispersion.site_y();
  set.depths = o.depths;
  const std::size_t N = set.grid.size();

  // Scan every projector column that any site sees at any depth and band.
  double qmin = 1e300, qmax = -1e300;
  for (double z : o.depths)
    for (double y : set.site_y)
      for (double x : set.site_x)
        for (std::size_t j = 0; j < N; ++j) {
          const double q = rig.dispersion.at_band(x, y, z, j).q;
          qmin = std::min(qmin, q);
          qmax = std::max(qmax, q);
        }
  const int r = o.render.projector_blur ? o.render.blur_size / 2 + 2 : 2;
  for (int k = std::max(0, static_cast<int>(std::floor(qmin)) - r);
       k <= std::min(rig.projector.width - 1, static_cast<int>(std::ceil(qmax)) + r); ++k)
    set.scan_columns.push_back(k);

  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  set.profiles.assign(o.depths.size() * N * set.sites() * set.scans(), 0.0f);
  const std::vector<double> kernel =
      o.render.projector_blur ? gaussian_kernel(o.render.blur_size, o.render.blur_sigma) : std::vector<double>{};
  for (std::size_t d = 0; d < o.depths.size(); ++d) {
    SceneSpec target;
    target.reflectance =
        HyperspectralCube(rig.left.width, rig.left.height, set.grid, static_cast<float>(o.target_reflectance));
    target.depth = plane_depth(rig.left.width, rig.left.height, o.depths[d]);
    const Renderer renderer(target, rig, o.render);
    parallel_for(0, static_cast<int>(set.scans()), [&](int k) {
      const ProjectedLight light = scanline_light(rig.projector, set.scan_columns[k], kernel);
      double rgb[3];
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t iy = 0; iy < set.site_y.size(); ++iy)
          for (std::size_t ix = 0; ix < set.site_x.size(); ++ix) {
            const std::size_t s = iy * set.site_x.size() + ix;
            if (!renderer.shade(set.site_x[ix], set.site_y[iy], 0.0, light, rgb, static_cast<int>(j)))
              throw ParamError("calibration target not covered by the dispersion model");
            set.profiles[set.offset(d, j, s) + k] = static_cast<float>(rgb[0] + rgb[1] + rgb[2]);
          }
    });
    for (std::size_t s = 0; s < set.sites(); ++s)
      set.site_depth.push_back(o.depths[d] + o.depth_noise_sigma * n01(rng));
  }
  if (o.noise_sigma > 0.0)
    for (float& v : set.profiles) v += static_cast<float>(o.noise_sigma * n01(rng));
  return set;
}

/// Both orders land on the target at the same distance; the left half of
/// the image is the zero order.
inline EtaCaptureSet simulate_eta_captures(const CalibrationBundle& rig, double depth = 0.8,
                                           double noise_sigma = 0.0, std::uint64_t seed = 0,
                                           double target_reflectance = 0.99) {
  const int W = rig.left.width, H = rig.left.height;
  EtaCaptureSet set;
  set.zero_roi.assign(static_cast<std::size_t>(W) * H, 0);
  set.first_roi.assign(static_cast<std::size_t>(W) * H, 0);
  for (int y = H / 4; y < 3 * H / 4; ++y)
    for (int x = 0; x < W; ++x) {
      if (x >= W / 16 && x < 7 * W / 16) set.zero_roi[y * W + x] = 1;
      if (x >= 9 * W / 16 && x < 15 * W / 16) set.first_roi[y * W + x] = 1;
    }
  const Eigen::Vector3d X = rig.left.unproject(0.5 * (W - 1), 0.5 * (H - 1), depth);
  const double d2 = (X - rig.projector.center()).squaredNorm();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0 ? noise_sigma : 1.0);
  const RadiometricTables& t = rig.tables;
  for (std::size_t j = 0; j < t.bands(); ++j) {
    RgbImage img = make_rgb(W, H);
    for (int c = 0; c < 3; ++c) {
      const double zero = t.cam[c][j] * target_reflectance * t.white_emission(j) / d2;
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double v = x < W / 2 ? zero : zero * t.eta[j];
          if (noise_sigma > 0) v += noise(rng);
          img(x, y, c) = static_cast<float>(v);
        }
    }
    set.images.push_back(std::move(img));
  }
  return set;
}

/// Patch centres of the colour chart at `depth`, all 24 patches, under
/// every `scan_step`-th white scanline column that lights any of them.
inline RefinementCaptures simulate_refinement_captures(const CalibrationBundle& rig, double depth = 0.8,
                                                       int scan_step = 1, double noise_sigma = 0.0,
                                                       std::uint64_t seed = 0, const RenderOptions& render = {}) {
  const int W = rig.left.width, H = rig.left.height;
  const SceneSpec chart = colorchecker_scene(W, H, depth, rig.tables.grid);
  RefinementCaptures cap;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 6; ++col) {
      CalibrationPoint p;
      p.x = std::floor((col + 0.5) * W / 6.0);
      p.y = std::floor((row + 0.5) * H / 4.0);
      p.z = chart.depth.z(static_cast<int>(p.x), static_cast<int>(p.y));  // as stored, float
      p.reflectance = chart.reflectance.spectrum(static_cast<int>(p.x), static_cast<int>(p.y));
      cap.points.push_back(std::move(p));
    }
  double qmin = 1e300, qmax = -1e300;
  for (const auto& p : cap.points)
    for (std::size_t j = 0; j < rig.tables.bands(); ++j) {
      const double q = rig.dispersion.at_band(p.x, p.y, p.z, j).q;
      qmin = std::min(qmin, q);
      qmax = std::max(qmax, q);
    }
  const int r = render.projector_blur ? render.blur_size / 2 + 2 : 2;
  for (int k = std::max(0, static_cast<int>(std::floor(qmin)) - r);
       k <= std::min(rig.projector.width - 1, static_cast<int>(std::ceil(qmax)) + r); k += scan_step)
    cap.scan_columns.push_back(k);

  const Renderer renderer(chart, rig, render);
  const std::vector<double> kernel =
      render.projector_blur ? gaussian_kernel(render.blur_size, render.blur_sigma) : std::vector<double>{};
  cap.intensities.assign(cap.points.size() * cap.scans() * 3, 0.0);
  parallel_for(0, static_cast<int>(cap.scans()), [&](int k) {
    const ProjectedLight light = scanline_light(rig.projector, cap.scan_columns[k], kernel);
    double rgb[3];
    for (std::size_t p = 0; p < cap.points.size(); ++p) {
      if (!renderer.shade(cap.points[p].x, cap.points[p].y, 0.0, light, rgb))
        throw ParamError("calibration point not covered by the dispersion model");
      for (int c = 0; c < 3; ++c) cap.intensities[(p * cap.scans() + k) * 3 + c] = rgb[c];
    }
  });
  if (noise_sigma > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& v : cap.intensities) v += noise(rng);
  }
  return cap;
}

}  // namespace ddsl::sim
