#pragma once

#include <span>
#include <vector>

#include "ddsl/core/grid.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl::calib {

/// Bandpass-filtered captures of a white target under single-column white
/// scanlines. Only the intensity profiles at the dispersion lattice pixels
/// are kept: profile(d, j, s)[k] is the summed RGB value at site s, depth
/// position d, band j, while scanline column scan_columns[k] is lit.
struct ScanlineCaptureSet {
  WavelengthGrid grid;
  std::vector<double> site_x, site_y;  // lattice pixels, row-major sites
  std::vector<double> depths;          // target depth positions
  std::vector<double> site_depth;      // triangulated depth per (d, site)
  std::vector<int> scan_columns;
  std::vector<float> profiles;

  std::size_t sites() const noexcept { return site_x.size() * site_y.size(); }
  std::size_t scans() const noexcept { return scan_columns.size(); }
  std::size_t offset(std::size_t d, std::size_t band, std::size_t site) const noexcept {
    return ((d * grid.size() + band) * sites() + site) * scans();
  }
  std::span<const float> profile(std::size_t d, std::size_t band, std::size_t site) const {
    return {profiles.data() + offset(d, band, site), scans()};
  }
};

/// Bandpass captures of a white target showing the zero-order and the
/// first-order light, one image per band, with a region of interest for each.
struct EtaCaptureSet {
  std::vector<RgbImage> images;  // one per band
  Mask zero_roi;
  Mask first_roi;
};

/// Known-reflectance points observed under white scanlines, for the
/// radiometric refinement.
struct CalibrationPoint {
  double x = 0, y = 0, z = 0;
  std::vector<double> reflectance;
};

struct RefinementCaptures {
  std::vector<CalibrationPoint> points;
  std::vector<int> scan_columns;
  std::vector<double> intensities;  // [(point * scans + k) * 3 + c]

  std::size_t scans() const noexcept { return scan_columns.size(); }
  double at(std::size_t p, std::size_t k, int c) const noexcept { return intensities[(p * scans() + k) * 3 + c]; }
};

}  // namespace ddsl::calib
