#pragma once

#include <cmath>
#include <vector>

#include "ddsl/optics/bundle.hpp"
#include "ddsl/patterns.hpp"

namespace ddsl::sim {

/// Geometry of the synthetic desk-scale rig. The cameras and the projector
/// share orientation and sit on a horizontal baseline, so the geometric
/// correspondence along a camera ray is exactly q_x = alpha / z + gamma. The
/// grating adds a constant column shift per wavelength.
struct DeskRigOptions {
  int width = 64;
  int height = 64;
  double focal_per_64px = 100.0;     // camera focal length for a 64-px-wide image
  double baseline = 0.10;            // right camera centre, metres along +x
  double projector_offset = -0.06;   // projector centre, metres along x
  double projector_focal_ratio = 2.0;
  double dispersion_px_per_nm = 0.5; // five projector columns per 10 nm band
  double reference_nm = 550.0;       // wavelength with zero dispersion shift
  double depth_min = 0.4;
  double depth_max = 1.2;
  int lattice_stride = 16;
};

inline double gaussian_curve(double x, double mu, double sigma) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / (sigma * sigma));
}

/// Smooth camera/projector/grating curves of plausible shape. Intensities
/// come out in 8-bit sensor units for a white target at desk distance.
inline RadiometricTables default_tables(const WavelengthGrid& grid = WavelengthGrid::standard()) {
  RadiometricTables t(grid);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double l = grid.wavelength(j);
    t.cam[0][j] = gaussian_curve(l, 605, 30) + 0.02;
    t.cam[1][j] = gaussian_curve(l, 535, 32) + 0.02;
    t.cam[2][j] = gaussian_curve(l, 460, 25) + 0.02;
    t.proj[0][j] = 120.0 * gaussian_curve(l, 620, 20) + 4.0;
    t.proj[1][j] = 100.0 * gaussian_curve(l, 540, 28) + 4.0;
    t.proj[2][j] = 150.0 * gaussian_curve(l, 455, 15) + 4.0;
    t.eta[j] = 0.35 + 0.25 * gaussian_curve(l, 500, 60);
  }
  return t;
}

/// Lattice coordinates every `stride` pixels, always including the last pixel.
inline std::vector<double> lattice_sites(int extent, int stride) {
  std::vector<double> s;
  for (int v = 0; v < extent - 1; v += stride) s.push_back(v);
  s.push_back(extent - 1);
  return s;
}

inline int projector_width_for(int width) { return 3 * width + 140; }
inline int projector_height_for(int height) { return 2 * height + 60; }

/// Exact calibration bundle of the synthetic rig.
inline CalibrationBundle make_desk_rig(const DeskRigOptions& o = {},
                                       const RadiometricTables& tables = default_tables()) {
  CalibrationBundle b;
  const double f = o.focal_per_64px * o.width / 64.0;
  const double cx = 0.5 * (o.width - 1);
  const double cy = 0.5 * (o.height - 1);
  const Eigen::Matrix3d I3 = Eigen::Matrix3d::Identity();

  b.left.K = make_intrinsics(f, f, cx, cy);
  b.left.E = Eigen::Matrix4d::Identity();
  b.left.width = o.width;
  b.left.height = o.height;

  b.right = b.left;
  b.right.E = extrinsics_at(I3, {o.baseline, 0.0, 0.0});

  const double fp = f * o.projector_focal_ratio;
  const int pw = projector_width_for(o.width);
  const int ph = projector_height_for(o.height);
  const double pcx = o.width + 70.0;
  const double pcy = 0.5 * (ph - 1);
  b.projector.K = make_intrinsics(fp, fp, pcx, pcy);
  b.projector.E = extrinsics_at(I3, {o.projector_offset, 0.0, 0.0});
  b.projector.width = pw;
  b.projector.height = ph;

  b.tables = tables;
  const WavelengthGrid& grid = tables.grid;
  auto sx = lattice_sites(o.width, o.lattice_stride);
  auto sy = lattice_sites(o.height, o.lattice_stride);
  std::vector<PowerLaw> coeffs;
  coeffs.reserve(grid.size() * sx.size() * sy.size());
  const double alpha = -fp * o.projector_offset;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double shift = -o.dispersion_px_per_nm * (grid.wavelength(j) - o.reference_nm);
    for (std::size_t iy = 0; iy < sy.size(); ++iy)
      for (double x : sx) coeffs.push_back({alpha, -1.0, fp * (x - cx) / f + pcx + shift});
  }
  b.dispersion = DispersionModel(grid, std::move(sx), std::move(sy), std::move(coeffs), o.depth_min, o.depth_max);
  return b;
}

/// Pattern parameters at their defaults, sized to the rig's projector.
inline PatternParams pattern_params_for(const CalibrationBundle& b, PatternParams p = {}) {
  p.proj_width = b.projector.width;
  p.proj_height = b.projector.height;
  return p;
}

}  // namespace ddsl::sim
