#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/grid.hpp"

namespace ddsl {

using Mask = std::vector<std::uint8_t>;

/// Planar float image: plane-major, each plane row-major.
/// Index of (x, y, c) is (c * height + y) * width + x.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, float fill = 0.0f)
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 0) throw ParamError("negative image dimension");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const noexcept { return data_.empty(); }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  float& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  float operator()(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }

  std::span<float> plane(int c) noexcept {
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(), pixel_count()};
  }
  std::span<const float> plane(int c) const noexcept {
    return {data_.data() + static_cast<std::size_t>(c) * pixel_count(), pixel_count()};
  }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool inside(double x, double y) const noexcept {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1 && y <= height_ - 1;
  }

  /// Bilinear sample with edge clamping.
  float sample_clamped(double x, double y, int c) const noexcept {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    return sample_inside(x, y, c);
  }

  /// Bilinear sample; caller guarantees inside(x, y).
  float sample_inside(double x, double y, int c) const noexcept {
    const int x0 = std::min(static_cast<int>(x), width_ - 1);
    const int y0 = std::min(static_cast<int>(y), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * (*this)(x0, y0, c) + fx * (*this)(x1, y0, c);
    const double bottom = (1.0 - fx) * (*this)(x0, y1, c) + fx * (*this)(x1, y1, c);
    return static_cast<float>((1.0 - fy) * top + fy * bottom);
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Linear RGB image, channels R, G, B.
using RgbImage = Image;

inline RgbImage make_rgb(int width, int height, float fill = 0.0f) {
  return Image(width, height, 3, fill);
}

/// Spectral cube on a wavelength grid; one plane per band (band-major).
class HyperspectralCube {
 public:
  HyperspectralCube() = default;
  HyperspectralCube(int width, int height, WavelengthGrid grid, float fill = 0.0f)
      : grid_(grid), values_(width, height, static_cast<int>(grid.size()), fill) {}

  int width() const noexcept { return values_.width(); }
  int height() const noexcept { return values_.height(); }
  std::size_t bands() const noexcept { return grid_.size(); }
  const WavelengthGrid& grid() const noexcept { return grid_; }

  float& operator()(int x, int y, std::size_t band) noexcept {
    return values_(x, y, static_cast<int>(band));
  }
  float operator()(int x, int y, std::size_t band) const noexcept {
    return values_(x, y, static_cast<int>(band));
  }

  std::vector<double> spectrum(int x, int y) const {
    std::vector<double> s(bands());
    for (std::size_t j = 0; j < bands(); ++j) s[j] = (*this)(x, y, j);
    return s;
  }
  void set_spectrum(int x, int y, std::span<const double> s) {
    assert(s.size() == bands());
    for (std::size_t j = 0; j < bands(); ++j) (*this)(x, y, j) = static_cast<float>(s[j]);
  }

  Image& values() noexcept { return values_; }
  const Image& values() const noexcept { return values_; }

  /// Per-pixel validity; empty means every pixel is valid.
  Mask& valid() noexcept { return valid_; }
  const Mask& valid() const noexcept { return valid_; }
  bool is_valid(int x, int y) const noexcept {
    return valid_.empty() || valid_[static_cast<std::size_t>(y) * width() + x] != 0;
  }

 private:
  WavelengthGrid grid_;
  Image values_;
  Mask valid_;
};

/// Metric depth along the camera z axis, metres.
class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int width, int height, float fill = 0.0f)
      : z_(width, height, 1, fill),
        valid_(static_cast<std::size_t>(width) * height, fill > 0.0f && std::isfinite(fill)) {}

  int width() const noexcept { return z_.width(); }
  int height() const noexcept { return z_.height(); }

  float& z(int x, int y) noexcept { return z_(x, y, 0); }
  float z(int x, int y) const noexcept { return z_(x, y, 0); }

  bool is_valid(int x, int y) const noexcept {
    return valid_[static_cast<std::size_t>(y) * width() + x] != 0;
  }
  void set(int x, int y, double depth) {
    const bool ok = std::isfinite(depth) && depth > 0.0;
    z_(x, y, 0) = ok ? static_cast<float>(depth) : 0.0f;
    valid_[static_cast<std::size_t>(y) * width() + x] = ok ? 1 : 0;
  }
  void invalidate(int x, int y) {
    z_(x, y, 0) = 0.0f;
    valid_[static_cast<std::size_t>(y) * width() + x] = 0;
  }

  /// Bilinear depth at a fractional position; fails when any contributing
  /// neighbour is invalid.
  bool sample(double x, double y, double& out) const noexcept {
    if (!z_.inside(x, y)) return false;
    const int x0 = std::min(static_cast<int>(x), width() - 1);
    const int y0 = std::min(static_cast<int>(y), height() - 1);
    const int x1 = std::min(x0 + 1, width() - 1);
    const int y1 = std::min(y0 + 1, height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x1, x0, x1};
    const int ys[4] = {y0, y0, y1, y1};
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (w[k] <= 0.0) continue;
      if (!is_valid(xs[k], ys[k])) return false;
      acc += w[k] * z(xs[k], ys[k]);
    }
    out = acc;
    return true;
  }

  Image& plane() noexcept { return z_; }
  const Image& plane() const noexcept { return z_; }
  Mask& valid() noexcept { return valid_; }
  const Mask& valid() const noexcept { return valid_; }

 private:
  Image z_;
  Mask valid_;
};

/// Dense displacement field: point p in the source frame sits at
/// p + (dx, dy) in the target frame.
class FlowField {
 public:
  FlowField() = default;
  FlowField(int width, int height, float dx = 0.0f, float dy = 0.0f)
      : d_(width, height, 2), valid_(static_cast<std::size_t>(width) * height, 1) {
    std::fill(d_.plane(0).begin(), d_.plane(0).end(), dx);
    std::fill(d_.plane(1).begin(), d_.plane(1).end(), dy);
  }

  int width() const noexcept { return d_.width(); }
  int height() const noexcept { return d_.height(); }

  float& dx(int x, int y) noexcept { return d_(x, y, 0); }
  float& dy(int x, int y) noexcept { return d_(x, y, 1); }
  float dx(int x, int y) const noexcept { return d_(x, y, 0); }
  float dy(int x, int y) const noexcept { return d_(x, y, 1); }

  bool is_valid(int x, int y) const noexcept {
    return valid_[static_cast<std::size_t>(y) * width() + x] != 0;
  }
  void set_valid(int x, int y, bool v) noexcept {
    valid_[static_cast<std::size_t>(y) * width() + x] = v ? 1 : 0;
  }

  Image& planes() noexcept { return d_; }
  const Image& planes() const noexcept { return d_; }
  Mask& valid() noexcept { return valid_; }
  const Mask& valid() const noexcept { return valid_; }

 private:
  Image d_;
  Mask valid_;
};

}  // namespace ddsl
