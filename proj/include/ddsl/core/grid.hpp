#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>

#include "ddsl/core/error.hpp"

namespace ddsl {

/// Uniform wavelength sampling in nanometres. lambda_max is derived as
/// lambda_min + (count - 1) * step, so the end point is always on the grid.
class WavelengthGrid {
 public:
  WavelengthGrid() : WavelengthGrid(440.0, 10.0, 23) {}

  WavelengthGrid(double lambda_min, double step, std::size_t count)
      : lambda_min_(lambda_min), step_(step), count_(count) {
    if (count == 0 || !(step > 0.0) || !std::isfinite(lambda_min) || !std::isfinite(step)) {
      throw GridError("wavelength grid needs count >= 1 and a positive finite step");
    }
  }

  /// 440-660 nm in 10 nm steps (23 bands).
  static WavelengthGrid standard() { return {}; }

  double lambda_min() const noexcept { return lambda_min_; }
  double lambda_max() const noexcept { return wavelength(count_ - 1); }
  double step() const noexcept { return step_; }
  std::size_t size() const noexcept { return count_; }

  double wavelength(std::size_t band) const noexcept {
    return lambda_min_ + static_cast<double>(band) * step_;
  }

  /// Index of the band centred exactly at `lambda` (within `tolerance` nm).
  std::size_t band_index(double lambda, double tolerance = 1e-9) const {
    const double position = (lambda - lambda_min_) / step_;
    const double nearest = std::round(position);
    if (!std::isfinite(position) || nearest < 0.0 || nearest > static_cast<double>(count_ - 1) ||
        std::abs(wavelength(static_cast<std::size_t>(nearest)) - lambda) > tolerance) {
      std::ostringstream msg;
      msg << "wavelength " << lambda << " nm is not on the grid [" << lambda_min_ << ", "
          << lambda_max() << "] step " << step_;
      throw GridError(msg.str());
    }
    return static_cast<std::size_t>(nearest);
  }

  /// Continuous band coordinate; 0 at lambda_min, size()-1 at lambda_max.
  double band_position(double lambda) const noexcept { return (lambda - lambda_min_) / step_; }

  bool contains(double lambda) const noexcept {
    return lambda >= lambda_min_ - 1e-9 && lambda <= lambda_max() + 1e-9;
  }

  friend bool operator==(const WavelengthGrid& a, const WavelengthGrid& b) noexcept {
    return a.count_ == b.count_ && a.lambda_min_ == b.lambda_min_ && a.step_ == b.step_;
  }

 private:
  double lambda_min_;
  double step_;
  std::size_t count_;
};

/// Free-function form of WavelengthGrid::band_index.
inline std::size_t band_index(const WavelengthGrid& grid, double lambda) {
  return grid.band_index(lambda);
}

}  // namespace ddsl
