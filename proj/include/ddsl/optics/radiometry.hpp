#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/grid.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl {

/// Spectral tables of the projector-camera system, one entry per band.
/// `eta` is the first-order diffraction efficiency as a first/zero-order
/// intensity ratio.
struct RadiometricTables {
  WavelengthGrid grid;
  std::array<std::vector<double>, 3> cam;   // camera sensitivity [channel][band]
  std::array<std::vector<double>, 3> proj;  // projector emission [channel][band]
  std::vector<double> eta;

  explicit RadiometricTables(WavelengthGrid g = WavelengthGrid::standard()) : grid(g) {
    for (auto& v : cam) v.assign(grid.size(), 0.0);
    for (auto& v : proj) v.assign(grid.size(), 0.0);
    eta.assign(grid.size(), 0.0);
  }

  std::size_t bands() const noexcept { return grid.size(); }

  /// Emission of a white (all channels on) projector pixel.
  double white_emission(std::size_t band) const noexcept {
    return proj[0][band] + proj[1][band] + proj[2][band];
  }

  void validate() const {
    auto check = [&](const std::vector<double>& v, const char* name) {
      if (v.size() != grid.size()) throw ParamError(std::string(name) + " table size mismatch");
      for (double x : v)
        if (!std::isfinite(x) || x < 0.0) throw ParamError(std::string(name) + " entries must be finite and >= 0");
    };
    for (const auto& v : cam) check(v, "camera response");
    for (const auto& v : proj) check(v, "projector emission");
    check(eta, "diffraction efficiency");
  }
};

/// Emitted spectral light of every projector pixel:
/// L(q, lambda) = sum_c proj[c][lambda] * P(q, c).
inline HyperspectralCube project_light(const Image& pattern, const RadiometricTables& tables) {
  if (pattern.channels() != 3) throw ParamError("projector image must have 3 channels");
  HyperspectralCube out(pattern.width(), pattern.height(), tables.grid);
  for (std::size_t j = 0; j < tables.bands(); ++j) {
    auto dst = out.values().plane(static_cast<int>(j));
    for (int c = 0; c < 3; ++c) {
      const auto src = pattern.plane(c);
      const double w = tables.proj[c][j];
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<float>(w * src[i]);
    }
  }
  return out;
}

/// Normalised 1D Gaussian taps, `size` odd.
inline std::vector<double> gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ParamError("blur kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw ParamError("blur sigma must be positive");
  std::vector<double> k(size);
  const int r = size / 2;
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

/// A projector image blurred along the column axis, sampled at fractional
/// projector coordinates. Columns outside the projector emit nothing.
class ProjectedLight {
 public:
  ProjectedLight() = default;

  /// `kernel` empty means no blur.
  ProjectedLight(const Image& pattern, std::span<const double> kernel) {
    if (pattern.channels() != 3) throw ParamError("projector image must have 3 channels");
    width_ = pattern.width();
    height_ = pattern.height();
    column_constant_ = true;
    for (int c = 0; c < 3 && column_constant_; ++c)
      for (int y = 1; y < height_ && column_constant_; ++y)
        for (int x = 0; x < width_; ++x)
          if (pattern(x, y, c) != pattern(x, 0, c)) {
            column_constant_ = false;
            break;
          }
    const int rows = column_constant_ ? 1 : height_;
    blurred_ = Image(width_, rows, 3);
    const int r = static_cast<int>(kernel.size()) / 2;
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < width_; ++x) {
          if (kernel.empty()) {
            blurred_(x, y, c) = pattern(x, y, c);
            continue;
          }
          double acc = 0.0;
          for (int k = -r; k <= r; ++k) {
            const int xs = x - k;
            if (xs >= 0 && xs < width_) acc += kernel[k + r] * pattern(xs, y, c);
          }
          blurred_(x, y, c) = static_cast<float>(acc);
        }
  }

  /// Column-constant white pattern of the given height, one value per column.
  ProjectedLight(std::span<const float> columns, int height, std::span<const double> kernel) {
    Image row(static_cast<int>(columns.size()), 1, 3);
    for (int c = 0; c < 3; ++c)
      for (std::size_t x = 0; x < columns.size(); ++x) row(static_cast<int>(x), 0, c) = columns[x];
    *this = ProjectedLight(row, kernel);
    height_ = height;
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  /// Blurred channel value at fractional column qx, row qy (linear in x,
  /// nearest row in y).
  double channel(int c, double qx, double qy) const noexcept {
    int row = 0;
    if (!column_constant_) {
      row = static_cast<int>(std::lround(qy));
      if (row < 0 || row >= height_) return 0.0;
    } else if (qy < -0.5 || qy > height_ - 0.5) {
      return 0.0;
    }
    const double fx = std::floor(qx);
    const int x0 = static_cast<int>(fx);
    const double t = qx - fx;
    auto at = [&](int x) -> double { return (x >= 0 && x < width_) ? blurred_(x, row, c) : 0.0; };
    return (1.0 - t) * at(x0) + t * at(x0 + 1);
  }

  /// Spectral light L(q, lambda_band) after blur.
  double spectral(const RadiometricTables& tables, std::size_t band, double qx, double qy) const noexcept {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double e = tables.proj[c][band];
      if (e != 0.0) acc += e * channel(c, qx, qy);
    }
    return acc;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  bool column_constant_ = true;
  Image blurred_;
};

}  // namespace ddsl
