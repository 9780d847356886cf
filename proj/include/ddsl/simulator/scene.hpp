#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl::sim {

/// Parametric image-space motion of the whole scene, in left-camera pixels:
/// disp(t) = v t + a t^2 + j t^3, with t counted in frames.
struct Motion {
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  Eigen::Vector2d acceleration = Eigen::Vector2d::Zero();
  Eigen::Vector2d jerk = Eigen::Vector2d::Zero();

  Eigen::Vector2d displacement(double t) const { return velocity * t + acceleration * t * t + jerk * t * t * t; }
  bool is_static() const { return velocity.isZero() && acceleration.isZero() && jerk.isZero(); }
  bool finite() const { return velocity.allFinite() && acceleration.allFinite() && jerk.allFinite(); }
};

/// Scene content at time 0 in the left-camera frame. A point shown at pixel
/// p at time 0 is shown at p + motion.displacement(t) at time t.
struct SceneSpec {
  HyperspectralCube reflectance;
  DepthMap depth;
  Motion motion;
  std::vector<double> ambient;  // leakage spectrum under the black pattern, per band; empty = none

  void validate() const {
    if (reflectance.width() != depth.width() || reflectance.height() != depth.height())
      throw ParamError("scene reflectance and depth differ in size");
    for (float v : reflectance.values().data())
      if (!(v >= 0.0f && v <= 1.0f)) throw ParamError("scene reflectance must lie in [0, 1]");
    if (!motion.finite()) throw ParamError("scene motion must be finite");
    if (!ambient.empty() && ambient.size() != reflectance.bands())
      throw ParamError("ambient spectrum size does not match the grid");
  }

  /// Reflectance and depth of the content seen at (x, y) at time t. Content
  /// coordinates are clamped to the texture, so moving edges extend.
  bool lookup(double x, double y, double t, std::span<double> spectrum, double& z) const {
    const Eigen::Vector2d d = motion.displacement(t);
    const double sx = std::clamp(x - d.x(), 0.0, static_cast<double>(depth.width() - 1));
    const double sy = std::clamp(y - d.y(), 0.0, static_cast<double>(depth.height() - 1));
    if (!depth.sample(sx, sy, z)) return false;
    const Image& v = reflectance.values();
    for (std::size_t j = 0; j < spectrum.size(); ++j) spectrum[j] = v.sample_inside(sx, sy, static_cast<int>(j));
    return true;
  }

  bool depth_at(double x, double y, double t, double& z) const {
    const Eigen::Vector2d d = motion.displacement(t);
    const double sx = std::clamp(x - d.x(), 0.0, static_cast<double>(depth.width() - 1));
    const double sy = std::clamp(y - d.y(), 0.0, static_cast<double>(depth.height() - 1));
    return depth.sample(sx, sy, z);
  }

  /// Scene content rendered at time t: reflectance cube and depth map.
  SceneSpec at_time(double t) const {
    SceneSpec out;
    out.reflectance = HyperspectralCube(reflectance.width(), reflectance.height(), reflectance.grid());
    out.depth = DepthMap(depth.width(), depth.height());
    out.ambient = ambient;
    std::vector<double> s(reflectance.bands());
    for (int y = 0; y < depth.height(); ++y)
      for (int x = 0; x < depth.width(); ++x) {
        double z = 0.0;
        if (lookup(x, y, t, s, z)) {
          out.reflectance.set_spectrum(x, y, s);
          out.depth.set(x, y, z);
        }
      }
    return out;
  }
};

/// 24 smooth reflectance spectra in the spirit of a colour checker chart:
/// neutrals, skin tones, primaries and pastels, all within [0.03, 0.92].
inline std::vector<std::vector<double>> colorchecker_spectra(const WavelengthGrid& grid) {
  struct Recipe {
    double base, a1, mu1, s1, a2, mu2, s2;
  };
  static constexpr Recipe kRecipes[24] = {
      {0.10, 0.20, 640, 60, 0.00, 500, 40},  {0.20, 0.45, 640, 70, 0.10, 540, 50},
      {0.12, 0.30, 460, 40, 0.05, 560, 50},  {0.06, 0.25, 550, 35, 0.00, 500, 40},
      {0.15, 0.35, 470, 45, 0.15, 650, 30},  {0.10, 0.55, 500, 45, 0.00, 500, 40},
      {0.05, 0.80, 640, 50, 0.05, 460, 30},  {0.08, 0.40, 450, 35, 0.00, 500, 40},
      {0.08, 0.65, 650, 40, 0.10, 450, 25},  {0.05, 0.25, 440, 30, 0.15, 650, 35},
      {0.08, 0.60, 550, 40, 0.00, 500, 40},  {0.05, 0.75, 600, 50, 0.00, 500, 40},
      {0.05, 0.50, 450, 30, 0.00, 500, 40},  {0.05, 0.45, 530, 30, 0.00, 500, 40},
      {0.04, 0.75, 660, 35, 0.00, 500, 40},  {0.05, 0.85, 600, 60, 0.00, 500, 40},
      {0.10, 0.60, 660, 45, 0.35, 450, 30},  {0.06, 0.50, 480, 35, 0.00, 500, 40},
      {0.90, 0.00, 550, 50, 0.00, 500, 40},  {0.59, 0.00, 550, 50, 0.00, 500, 40},
      {0.36, 0.00, 550, 50, 0.00, 500, 40},  {0.19, 0.00, 550, 50, 0.00, 500, 40},
      {0.09, 0.00, 550, 50, 0.00, 500, 40},  {0.03, 0.00, 550, 50, 0.00, 500, 40},
  };
  std::vector<std::vector<double>> out;
  for (const Recipe& r : kRecipes) {
    std::vector<double> s(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const double l = grid.wavelength(j);
      const double v = r.base + r.a1 * std::exp(-0.5 * std::pow((l - r.mu1) / r.s1, 2)) +
                       r.a2 * std::exp(-0.5 * std::pow((l - r.mu2) / r.s2, 2));
      s[j] = std::clamp(v, 0.03, 0.92);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline DepthMap plane_depth(int width, int height, double z0, double slope_x = 0.0) {
  DepthMap d(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) d.set(x, y, z0 + slope_x * (x - 0.5 * (width - 1)));
  return d;
}

/// 6x4 chart of piecewise-constant patches on a dark frame, fronto-parallel.
inline SceneSpec colorchecker_scene(int width = 64, int height = 64, double depth = 0.8,
                                    const WavelengthGrid& grid = WavelengthGrid::standard()) {
  SceneSpec s;
  s.reflectance = HyperspectralCube(width, height, grid);
  s.depth = plane_depth(width, height, depth);
  const auto spectra = colorchecker_spectra(grid);
  const std::vector<double> frame(grid.size(), 0.05);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int col = x * 6 / width;
      const int row = y * 4 / height;
      const int x0 = col * width / 6, x1 = (col + 1) * width / 6;
      const int y0 = row * height / 4, y1 = (row + 1) * height / 4;
      const bool border = x == x0 || x == x1 - 1 || y == y0 || y == y1 - 1;
      s.reflectance.set_spectrum(x, y, border ? frame : spectra[row * 6 + col]);
    }
  return s;
}

/// Narrowband reflector: Gaussian of the given FWHM peaking at `peak`.
inline std::vector<double> narrowband_spectrum(const WavelengthGrid& grid, double center, double fwhm,
                                               double peak = 0.9) {
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  std::vector<double> s(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j)
    s[j] = peak * std::exp(-0.5 * std::pow((grid.wavelength(j) - center) / sigma, 2));
  return s;
}

/// 3x3 grid of narrowband reflectors on a black background.
inline SceneSpec narrowband_scene(int width, int height, const std::vector<double>& centers, double fwhm = 10.0,
                                  double depth = 0.8, const WavelengthGrid& grid = WavelengthGrid::standard()) {
  if (centers.size() > 9) throw ParamError("at most nine narrowband targets");
  SceneSpec s;
  s.reflectance = HyperspectralCube(width, height, grid);
  s.depth = plane_depth(width, height, depth);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto spec = narrowband_spectrum(grid, centers[k], fwhm);
    const int col = static_cast<int>(k % 3), row = static_cast<int>(k / 3);
    for (int y = row * height / 3 + 2; y < (row + 1) * height / 3 - 2; ++y)
      for (int x = col * width / 3 + 2; x < (col + 1) * width / 3 - 2; ++x) s.reflectance.set_spectrum(x, y, spec);
  }
  return s;
}

/// Pixel rectangle of narrowband target k in narrowband_scene.
struct Roi {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

inline Roi narrowband_roi(int width, int height, std::size_t k, int inset = 4) {
  const int col = static_cast<int>(k % 3), row = static_cast<int>(k / 3);
  return {col * width / 3 + inset, row * height / 3 + inset, (col + 1) * width / 3 - inset,
          (row + 1) * height / 3 - inset};
}

/// Smooth random texture in [lo, hi]: sum of random low-frequency sinusoids.
inline Image smooth_texture(int width, int height, std::uint64_t seed, double lo = 0.2, double hi = 0.9,
                            double max_frequency = 0.25, int terms = 12) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uf(-max_frequency, max_frequency), uph(0.0, 6.283185307179586);
  std::vector<std::array<double, 3>> waves(terms);
  for (auto& w : waves) w = {uf(rng), uf(rng), uph(rng)};
  Image t(width, height, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double v = 0.0;
      for (const auto& w : waves) v += std::sin(w[0] * x + w[1] * y + w[2]);
      t(x, y) = static_cast<float>(lo + (hi - lo) * (0.5 + 0.5 * std::tanh(v / std::sqrt(terms))));
    }
  return t;
}

/// Staircase receding in x: `steps` vertical bands between z_near and z_far,
/// covered with a smooth random texture tinted by a slowly varying spectrum.
inline SceneSpec stair_scene(int width, int height, int steps = 4, double z_near = 0.6, double z_far = 0.9,
                             std::uint64_t seed = 7, const WavelengthGrid& grid = WavelengthGrid::standard()) {
  if (steps < 1) throw ParamError("stair scene needs at least one step");
  SceneSpec s;
  s.reflectance = HyperspectralCube(width, height, grid);
  s.depth = DepthMap(width, height);
  const Image tex = smooth_texture(width, height, seed, 0.15, 0.95, 0.9, 16);
  const Image tint = smooth_texture(width, height, seed + 1, 0.0, 1.0, 0.12, 6);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const int k = std::min(steps - 1, x * steps / width);
      const double z = steps == 1 ? z_near : z_near + (z_far - z_near) * k / (steps - 1);
      s.depth.set(x, y, z);
      const double mu = 470.0 + 160.0 * tint(x, y);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double shape = 0.45 + 0.55 * std::exp(-0.5 * std::pow((grid.wavelength(j) - mu) / 70.0, 2));
        s.reflectance(x, y, j) = static_cast<float>(tex(x, y) * shape);
      }
    }
  return s;
}

/// Smooth textured plane, used by motion tests.
inline SceneSpec smooth_scene(int width, int height, double depth = 0.8, std::uint64_t seed = 11,
                              const WavelengthGrid& grid = WavelengthGrid::standard()) {
  SceneSpec s;
  s.reflectance = HyperspectralCube(width, height, grid);
  s.depth = plane_depth(width, height, depth);
  const Image a = smooth_texture(width, height, seed, 0.1, 0.9, 0.15, 8);
  const Image b = smooth_texture(width, height, seed + 5, 0.1, 0.9, 0.15, 8);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const double w = static_cast<double>(j) / (grid.size() - 1);
        s.reflectance(x, y, j) = static_cast<float>((1.0 - w) * a(x, y) + w * b(x, y));
      }
  return s;
}

}  // namespace ddsl::sim
