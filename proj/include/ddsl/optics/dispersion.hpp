#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/grid.hpp"

namespace ddsl {

/// q = alpha * z^beta + gamma, depth z in metres, q in projector columns.
struct PowerLaw {
  double alpha = 0.0;
  double beta = -1.0;
  double gamma = 0.0;

  double operator()(double z) const noexcept {
    return (beta == -1.0 ? alpha / z : alpha * std::pow(z, beta)) + gamma;
  }
};

/// Backward model psi: (camera pixel, depth, wavelength) -> projector column
/// lit at that wavelength. Power laws are stored on a lattice of camera pixels
/// for every grid band and blended bilinearly across the lattice and linearly
/// across wavelength.
class DispersionModel {
 public:
  struct Lookup {
    double q = 0.0;
    bool covered = false;       // pixel and wavelength inside the lattice
    bool extrapolated = false;  // depth outside the calibrated range
  };

  DispersionModel() = default;

  /// `coeffs` is indexed [band][row][column] with rows along site_y.
  DispersionModel(WavelengthGrid grid, std::vector<double> site_x, std::vector<double> site_y,
                  std::vector<PowerLaw> coeffs, double depth_min, double depth_max)
      : grid_(grid),
        site_x_(std::move(site_x)),
        site_y_(std::move(site_y)),
        coeffs_(std::move(coeffs)),
        depth_min_(depth_min),
        depth_max_(depth_max) {
    if (site_x_.empty() || site_y_.empty()) throw ParamError("dispersion lattice is empty");
    if (!std::is_sorted(site_x_.begin(), site_x_.end()) || !std::is_sorted(site_y_.begin(), site_y_.end()) ||
        std::adjacent_find(site_x_.begin(), site_x_.end()) != site_x_.end() ||
        std::adjacent_find(site_y_.begin(), site_y_.end()) != site_y_.end())
      throw ParamError("dispersion lattice sites must be strictly increasing");
    if (coeffs_.size() != grid_.size() * site_x_.size() * site_y_.size())
      throw ParamError("dispersion coefficient count does not match lattice");
    if (!(depth_min_ > 0.0) || !(depth_max_ >= depth_min_)) throw ParamError("invalid dispersion depth range");
  }

  const WavelengthGrid& grid() const noexcept { return grid_; }
  const std::vector<double>& site_x() const noexcept { return site_x_; }
  const std::vector<double>& site_y() const noexcept { return site_y_; }
  const std::vector<PowerLaw>& coefficients() const noexcept { return coeffs_; }
  double depth_min() const noexcept { return depth_min_; }
  double depth_max() const noexcept { return depth_max_; }

  const PowerLaw& coeff(std::size_t band, std::size_t iy, std::size_t ix) const noexcept {
    return coeffs_[(band * site_y_.size() + iy) * site_x_.size() + ix];
  }

  bool covers(double px, double py) const noexcept {
    return px >= site_x_.front() - 1e-9 && px <= site_x_.back() + 1e-9 && py >= site_y_.front() - 1e-9 &&
           py <= site_y_.back() + 1e-9;
  }

  /// psi at a grid band.
  Lookup at_band(double px, double py, double z, std::size_t band) const noexcept {
    Lookup out;
    Cell cx, cy;
    if (band >= grid_.size() || !locate(site_x_, px, cx) || !locate(site_y_, py, cy)) return out;
    const PowerLaw& c00 = coeff(band, cy.i0, cx.i0);
    const PowerLaw& c01 = coeff(band, cy.i0, cx.i1);
    const PowerLaw& c10 = coeff(band, cy.i1, cx.i0);
    const PowerLaw& c11 = coeff(band, cy.i1, cx.i1);
    const double top = (1.0 - cx.t) * c00(z) + cx.t * c01(z);
    const double bottom = (1.0 - cx.t) * c10(z) + cx.t * c11(z);
    out.q = (1.0 - cy.t) * top + cy.t * bottom;
    out.covered = std::isfinite(out.q);
    out.extrapolated = z < depth_min_ || z > depth_max_;
    return out;
  }

  /// psi at an arbitrary wavelength inside the grid span.
  Lookup backward_map(double px, double py, double z, double lambda) const noexcept {
    const double pos = grid_.band_position(lambda);
    if (!(pos >= -1e-9) || pos > static_cast<double>(grid_.size() - 1) + 1e-9) return {};
    const std::size_t j0 = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos))), grid_.size() - 1);
    const double t = std::clamp(pos - static_cast<double>(j0), 0.0, 1.0);
    Lookup a = at_band(px, py, z, j0);
    if (!a.covered || t == 0.0 || j0 + 1 >= grid_.size()) return a;
    const Lookup b = at_band(px, py, z, j0 + 1);
    if (!b.covered) return b;
    a.q = (1.0 - t) * a.q + t * b.q;
    return a;
  }

 private:
  struct Cell {
    std::size_t i0 = 0, i1 = 0;
    double t = 0.0;
  };

  static bool locate(const std::vector<double>& sites, double v, Cell& cell) noexcept {
    if (!(v >= sites.front() - 1e-9) || v > sites.back() + 1e-9) return false;
    if (sites.size() == 1) {
      cell = {0, 0, 0.0};
      return true;
    }
    auto it = std::upper_bound(sites.begin(), sites.end(), v);
    std::size_t i1 = static_cast<std::size_t>(std::distance(sites.begin(), it));
    i1 = std::clamp<std::size_t>(i1, 1, sites.size() - 1);
    const std::size_t i0 = i1 - 1;
    cell.i0 = i0;
    cell.i1 = i1;
    cell.t = std::clamp((v - sites[i0]) / (sites[i1] - sites[i0]), 0.0, 1.0);
    return true;
  }

  WavelengthGrid grid_;
  std::vector<double> site_x_;
  std::vector<double> site_y_;
  std::vector<PowerLaw> coeffs_;
  double depth_min_ = 0.1;
  double depth_max_ = 10.0;
};

}  // namespace ddsl
