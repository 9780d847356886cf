#pragma once

// File formats:
//   .hsc  "HSC1" magic, u32 width, u32 height, u32 N, f64 lambda_min, f64 step,
//         then width*height*N f32 values, band-major, all little-endian.
//         Invalid cube pixels are NaN in every band (and only those). Depth maps use N=1 and
//         flow fields N=2 (invalid samples stored as NaN);
//         RGB frames use N=3 with lambda_min=0, step=1.
//   .png  8-bit grayscale or RGB via libpng.
//   .csv  spectra: header row, one row per wavelength.

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl::io {

struct HscHeader {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t count = 0;
  double lambda_min = 0.0;
  double step = 1.0;
};

namespace detail {

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  os.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

inline constexpr std::size_t kHeaderBytes = 4 + 3 * 4 + 2 * 8;

}  // namespace detail

inline void write_hsc(const std::filesystem::path& path, const HscHeader& header,
                      std::span<const float> values) {
  const std::size_t expected = static_cast<std::size_t>(header.width) * header.height * header.count;
  if (values.size() != expected) throw FormatError("hsc payload size does not match header");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write("HSC1", 4);
  detail::put_le(os, header.width);
  detail::put_le(os, header.height);
  detail::put_le(os, header.count);
  detail::put_le(os, header.lambda_min);
  detail::put_le(os, header.step);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) detail::put_le(os, v);
  }
  if (!os) throw IoError("write failed for " + path.string());
}

inline HscHeader read_hsc(const std::filesystem::path& path, std::vector<float>& values) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < detail::kHeaderBytes) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(bytes.data(), "HSC1", 4) != 0) throw FormatError(path.string() + ": bad magic");
  const unsigned char* p = bytes.data() + 4;
  HscHeader h;
  h.width = detail::get_le<std::uint32_t>(p);
  h.height = detail::get_le<std::uint32_t>(p + 4);
  h.count = detail::get_le<std::uint32_t>(p + 8);
  h.lambda_min = detail::get_le<double>(p + 12);
  h.step = detail::get_le<double>(p + 20);
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * h.count;
  const std::size_t payload = bytes.size() - detail::kHeaderBytes;
  if (payload < n * sizeof(float)) throw FormatError(path.string() + ": truncated payload");
  if (payload > n * sizeof(float)) throw FormatError(path.string() + ": dimension mismatch (trailing data)");
  values.resize(n);
  const unsigned char* src = bytes.data() + detail::kHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) values[i] = detail::get_le<float>(src + 4 * i);
  return h;
}

inline void write_cube(const std::filesystem::path& path, const HyperspectralCube& cube) {
  HscHeader h{static_cast<std::uint32_t>(cube.width()), static_cast<std::uint32_t>(cube.height()),
              static_cast<std::uint32_t>(cube.bands()), cube.grid().lambda_min(), cube.grid().step()};
  if (cube.valid().empty()) return write_hsc(path, h, cube.values().data());
  Image out = cube.values();
  for (int y = 0; y < cube.height(); ++y)
    for (int x = 0; x < cube.width(); ++x)
      if (!cube.is_valid(x, y))
        for (int j = 0; j < out.channels(); ++j)
          if (!std::isnan(out(x, y, j))) out(x, y, j) = std::numeric_limits<float>::quiet_NaN();
  write_hsc(path, h, out.data());
}

inline HyperspectralCube read_cube(const std::filesystem::path& path) {
  std::vector<float> values;
  const HscHeader h = read_hsc(path, values);
  if (h.count == 0) throw FormatError(path.string() + ": zero bands");
  HyperspectralCube cube;
  try {
    cube = HyperspectralCube(static_cast<int>(h.width), static_cast<int>(h.height),
                             WavelengthGrid(h.lambda_min, h.step, h.count));
  } catch (const GridError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  cube.values().data() = std::move(values);
  // All-NaN pixels are invalid; the mask stays empty when every pixel is valid.
  Mask valid(static_cast<std::size_t>(cube.width()) * cube.height(), 1);
  bool any_invalid = false;
  for (int y = 0; y < cube.height(); ++y)
    for (int x = 0; x < cube.width(); ++x) {
      bool all_nan = true;
      for (std::size_t j = 0; j < cube.bands() && all_nan; ++j) all_nan = std::isnan(cube(x, y, j));
      if (all_nan) valid[static_cast<std::size_t>(y) * cube.width() + x] = 0, any_invalid = true;
    }
  if (any_invalid) cube.valid() = std::move(valid);
  return cube;
}

inline void write_image(const std::filesystem::path& path, const Image& image) {
  HscHeader h{static_cast<std::uint32_t>(image.width()), static_cast<std::uint32_t>(image.height()),
              static_cast<std::uint32_t>(image.channels()), 0.0, 1.0};
  write_hsc(path, h, image.data());
}

inline Image read_image(const std::filesystem::path& path, int expected_channels = -1) {
  std::vector<float> values;
  const HscHeader h = read_hsc(path, values);
  if (expected_channels >= 0 && static_cast<int>(h.count) != expected_channels) {
    throw FormatError(path.string() + ": expected " + std::to_string(expected_channels) + " planes");
  }
  Image img(static_cast<int>(h.width), static_cast<int>(h.height), static_cast<int>(h.count));
  img.data() = std::move(values);
  return img;
}

inline void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  Image plane = depth.plane();
  for (int y = 0; y < depth.height(); ++y)
    for (int x = 0; x < depth.width(); ++x)
      if (!depth.is_valid(x, y)) plane(x, y, 0) = std::numeric_limits<float>::quiet_NaN();
  write_image(path, plane);
}

inline DepthMap read_depth(const std::filesystem::path& path) {
  const Image plane = read_image(path, 1);
  DepthMap depth(plane.width(), plane.height());
  for (int y = 0; y < plane.height(); ++y)
    for (int x = 0; x < plane.width(); ++x) depth.set(x, y, plane(x, y, 0));
  return depth;
}

inline void write_flow(const std::filesystem::path& path, const FlowField& flow) {
  Image planes = flow.planes();
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x)
      if (!flow.is_valid(x, y)) {
        planes(x, y, 0) = std::numeric_limits<float>::quiet_NaN();
        planes(x, y, 1) = std::numeric_limits<float>::quiet_NaN();
      }
  write_image(path, planes);
}

inline FlowField read_flow(const std::filesystem::path& path) {
  const Image planes = read_image(path, 2);
  FlowField flow(planes.width(), planes.height());
  for (int y = 0; y < planes.height(); ++y)
    for (int x = 0; x < planes.width(); ++x) {
      const bool ok = std::isfinite(planes(x, y, 0)) && std::isfinite(planes(x, y, 1));
      flow.dx(x, y) = ok ? planes(x, y, 0) : 0.0f;
      flow.dy(x, y) = ok ? planes(x, y, 1) : 0.0f;
      flow.set_valid(x, y, ok);
    }
  return flow;
}

/// 8-bit PNG, `channels` 1 (gray) or 3 (RGB), interleaved row-major bytes.
inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      std::span<const std::uint8_t> pixels) {
  if (channels != 1 && channels != 3) throw FormatError("png export supports 1 or 3 channels");
  if (pixels.size() != static_cast<std::size_t>(width) * height * channels)
    throw FormatError("png buffer size mismatch");
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

inline double srgb_encode(double linear) {
  linear = std::clamp(linear, 0.0, 1.0);
  return linear <= 0.0031308 ? 12.92 * linear : 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

/// Writes a planar image (1 or 3 channels) as PNG after multiplying by
/// `scale`; `gamma` applies the sRGB transfer curve.
inline void write_png(const std::filesystem::path& path, const Image& image, double scale = 1.0,
                      bool gamma = false) {
  const int ch = image.channels();
  std::vector<std::uint8_t> bytes(image.pixel_count() * ch);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < ch; ++c) {
        double v = std::clamp(static_cast<double>(image(x, y, c)) * scale, 0.0, 1.0);
        if (gamma) v = srgb_encode(v);
        bytes[(static_cast<std::size_t>(y) * image.width() + x) * ch + c] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  write_png(path, image.width(), image.height(), ch, bytes);
}

/// Spectra CSV: first column wavelength_nm, then one column per series.
inline void write_spectra_csv(const std::filesystem::path& path, const WavelengthGrid& grid,
                              const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& series) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "wavelength_nm";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  os << std::setprecision(9);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    os << grid.wavelength(j);
    for (const auto& s : series) os << ',' << (j < s.size() ? s[j] : 0.0);
    os << '\n';
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace ddsl::io
