#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "ddsl/core/image.hpp"
#include "ddsl/patterns.hpp"

namespace ddsl {

struct StereoFrame {
  RgbImage left;
  RgbImage right;
  Mask left_valid;
  Mask right_valid;
};

/// Captures of one DDSL group, the black frames around it and, for
/// simulated data, the ground truth needed by tests.
///
/// Timing: the black frame preceding the group is at t = 0, DDSL frame i at
/// t = i (i = 1..M) and the group's own black frame at t = M + 1. Black
/// frames repeat every M + 1 frames.
struct FrameGroup {
  PatternParams params;
  std::vector<StereoFrame> frames;          // I^1..I^M, I^B
  std::vector<double> frame_times;          // 1..M, M+1
  std::vector<RgbImage> black_context;      // left-camera black frames, oldest first
  std::vector<double> black_times;          // times of black_context
  std::size_t reference_black = 1;          // black_context entry at t = 0
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;

  std::vector<FlowField> oracle_black_flows;  // black_context[k] -> black_context[k+1]
  std::optional<HyperspectralCube> truth_cube;  // scene at the centre frame
  std::optional<DepthMap> truth_depth;

  int pattern_count() const noexcept { return params.count; }
  /// Centre frame index c (1-based) used as the alignment target.
  int center_index() const noexcept { return std::max(1, params.count / 2); }
};

}  // namespace ddsl
