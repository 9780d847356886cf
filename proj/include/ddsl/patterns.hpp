#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl {

/// Design parameters of the dense dispersed line patterns, all in projector pixels.
struct PatternParams {
  int line_offset = 40;  // spacing between lines within one pattern
  int line_shift = 5;    // shift between consecutive patterns
  int line_width = 5;
  int count = 8;         // number of line patterns M (the black pattern is extra)
  int proj_width = 1920;
  int proj_height = 1080;

  void validate() const {
    if (line_width < 1) throw ParamError("line_width must be >= 1");
    if (line_offset <= line_width) throw ParamError("line_offset must exceed line_width");
    if (line_shift < 1) throw ParamError("line_shift must be >= 1");
    if (count < 1) throw ParamError("pattern count must be >= 1");
    if (proj_width < 1 || proj_height < 1) throw ParamError("projector size must be positive");
  }

  friend bool operator==(const PatternParams&, const PatternParams&) = default;
};

/// Value of pattern `index` (1-based) at projector column `qx`.
///
/// A column is lit when its distance to the nearest line centre
/// index*line_shift + k*line_offset is at most line_width/2. The comparison is
/// done in integers (2*distance <= line_width), so there is no rounding.
inline bool pattern_lit(const PatternParams& p, int index, int qx) noexcept {
  const long long raw = static_cast<long long>(qx) - static_cast<long long>(index) * p.line_shift;
  long long r = raw % p.line_offset;
  if (r < 0) r += p.line_offset;
  const long long distance = std::min<long long>(r, p.line_offset - r);
  return 2 * distance <= p.line_width;
}

/// Vertical-line projector pattern, identical in every row and channel.
class Pattern {
 public:
  Pattern() = default;
  Pattern(std::vector<std::uint8_t> columns, int height) : columns_(std::move(columns)), height_(height) {}

  int width() const noexcept { return static_cast<int>(columns_.size()); }
  int height() const noexcept { return height_; }
  bool lit(int qx) const noexcept { return qx >= 0 && qx < width() && columns_[qx] != 0; }
  const std::vector<std::uint8_t>& columns() const noexcept { return columns_; }

  /// Broadcast to a 3-channel projector image with values in {0, 1}.
  Image to_image() const {
    Image img(width(), height_, 3);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width(); ++x) img(x, y, c) = columns_[x] ? 1.0f : 0.0f;
    return img;
  }

 private:
  std::vector<std::uint8_t> columns_;
  int height_ = 0;
};

struct PatternSet {
  PatternParams params;
  std::vector<Pattern> patterns;  // P_1..P_M
  Pattern black;                  // P_B
};

inline PatternSet generate_patterns(const PatternParams& params) {
  params.validate();
  PatternSet set;
  set.params = params;
  for (int i = 1; i <= params.count; ++i) {
    std::vector<std::uint8_t> cols(params.proj_width);
    for (int q = 0; q < params.proj_width; ++q) cols[q] = pattern_lit(params, i, q) ? 1 : 0;
    set.patterns.emplace_back(std::move(cols), params.proj_height);
  }
  set.black = Pattern(std::vector<std::uint8_t>(params.proj_width, 0), params.proj_height);
  return set;
}

/// Fraction of lit columns over one full period of a pattern.
inline double duty_cycle(const PatternParams& params) {
  params.validate();
  int lit = 0;
  for (int q = 0; q < params.line_offset; ++q) lit += pattern_lit(params, 1, q) ? 1 : 0;
  return static_cast<double>(lit) / params.line_offset;
}

}  // namespace ddsl
