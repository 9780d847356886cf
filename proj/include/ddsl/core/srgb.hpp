#pragma once

#include <array>

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl {

namespace detail {

// CIE 1931 2-degree colour matching functions, 440-660 nm at 10 nm.
inline constexpr std::array<std::array<double, 3>, 23> kCmf1931 = {{
    {0.3483, 0.0230, 1.7471}, {0.3362, 0.0380, 1.7721}, {0.2908, 0.0600, 1.6692},
    {0.1954, 0.0910, 1.2876}, {0.0956, 0.1390, 0.8130}, {0.0320, 0.2080, 0.4652},
    {0.0049, 0.3230, 0.2720}, {0.0093, 0.5030, 0.1582}, {0.0633, 0.7100, 0.0782},
    {0.1655, 0.8620, 0.0422}, {0.2904, 0.9540, 0.0203}, {0.4334, 0.9950, 0.0087},
    {0.5945, 0.9950, 0.0039}, {0.7621, 0.9520, 0.0021}, {0.9163, 0.8700, 0.0017},
    {1.0263, 0.7570, 0.0011}, {1.0622, 0.6310, 0.0008}, {1.0026, 0.5030, 0.0003},
    {0.8544, 0.3810, 0.0002}, {0.6424, 0.2650, 0.0000}, {0.4479, 0.1750, 0.0000},
    {0.2835, 0.1070, 0.0000}, {0.1649, 0.0610, 0.0000},
}};

// XYZ -> linear sRGB (D65 primaries).
inline constexpr std::array<std::array<double, 3>, 3> kXyzToRgb = {{
    {3.2406, -1.5372, -0.4986},
    {-0.9689, 1.8758, 0.0415},
    {0.0557, -0.2040, 1.0570},
}};

/// Per-band linear RGB weights, white-balanced so that a flat unit spectrum
/// renders as (1, 1, 1).
inline std::array<std::array<double, 3>, 23> srgb_band_weights() {
  std::array<std::array<double, 3>, 23> w{};
  std::array<double, 3> white{};
  for (std::size_t j = 0; j < 23; ++j) {
    for (int c = 0; c < 3; ++c) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += kXyzToRgb[c][k] * kCmf1931[j][k];
      w[j][c] = v;
      white[c] += v;
    }
  }
  for (auto& row : w)
    for (int c = 0; c < 3; ++c) row[c] /= white[c];
  return w;
}

}  // namespace detail

/// Linear RGB rendering of a cube on the standard grid, without clamping.
inline RgbImage cube_to_linear_rgb(const HyperspectralCube& cube) {
  if (!(cube.grid() == WavelengthGrid::standard()))
    throw GridError("sRGB rendering requires the standard 440-660 nm / 10 nm grid");
  static const auto weights = detail::srgb_band_weights();
  RgbImage out = make_rgb(cube.width(), cube.height());
  for (std::size_t j = 0; j < cube.bands(); ++j) {
    const auto band = cube.values().plane(static_cast<int>(j));
    for (int c = 0; c < 3; ++c) {
      auto dst = out.plane(c);
      const double w = weights[j][c];
      for (std::size_t i = 0; i < band.size(); ++i) dst[i] += static_cast<float>(w * band[i]);
    }
  }
  return out;
}

/// Linear RGB rendering clamped to [0, 1]. Gamma is applied only at PNG export.
inline RgbImage cube_to_srgb(const HyperspectralCube& cube) {
  RgbImage out = cube_to_linear_rgb(cube);
  for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace ddsl
