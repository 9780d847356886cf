#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/frames.hpp"
#include "ddsl/core/image.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/flow/estimate.hpp"

namespace ddsl::flow {

/// Value at t of the polynomial through the `min(4, n)` samples nearest to t
/// (cubic Lagrange; linear with two samples, constant with one).
inline double interpolate_trajectory(std::span<const double> times, std::span<const double> values, double t) {
  const std::size_t n = times.size();
  if (n == 0 || values.size() != n) throw ParamError("trajectory needs matching, non-empty samples");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t m = std::min<std::size_t>(n, n >= 4 ? 4 : 2);
  std::partial_sort(idx.begin(), idx.begin() + m, idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(times[a] - t) < std::abs(times[b] - t);
  });
  double out = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    double w = 1.0;
    for (std::size_t b = 0; b < m; ++b)
      if (b != a) w *= (t - times[idx[b]]) / (times[idx[a]] - times[idx[b]]);
    out += w * values[idx[a]];
  }
  return out;
}

namespace detail {

inline bool sample_flow(const FlowField& f, double x, double y, double& dx, double& dy) {
  const int W = f.width(), H = f.height();
  const bool inside = x >= 0.0 && y >= 0.0 && x <= W - 1 && y <= H - 1;
  x = std::clamp(x, 0.0, W - 1.0);
  y = std::clamp(y, 0.0, H - 1.0);
  const int x0 = std::min(static_cast<int>(x), W - 1), y0 = std::min(static_cast<int>(y), H - 1);
  const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
  const double tx = x - x0, ty = y - y0;
  auto lerp2 = [&](auto get) {
    return (1 - ty) * ((1 - tx) * get(x0, y0) + tx * get(x1, y0)) + ty * ((1 - tx) * get(x0, y1) + tx * get(x1, y1));
  };
  dx = lerp2([&](int a, int b) { return static_cast<double>(f.dx(a, b)); });
  dy = lerp2([&](int a, int b) { return static_cast<double>(f.dy(a, b)); });
  return inside;
}

}  // namespace detail

/// Flows from the reference black frame to each frame time.
///
/// `black_flows[k]` maps black frame k to black frame k+1. Each pixel's
/// trajectory through the black frames is chained from the reference frame
/// (forward by sampling each flow at the advected point, backward by
/// fixed-point inversion), then interpolated per pixel over the `window`
/// black frames nearest the group. Outside the image the edge flow is
/// extended. Flow confidence is advisory: low-confidence samples (textureless
/// black frames) keep their coarse estimate and the results stay valid; the
/// warp alone decides validity.
inline std::vector<FlowField> interpolate_group_flows(const std::vector<FlowField>& black_flows,
                                                      std::span<const double> black_times, std::size_t reference,
                                                      std::span<const double> frame_times, int window = 4) {
  const std::size_t K = black_times.size();
  if (K < 2 || black_flows.size() + 1 != K) throw ParamError("need one black flow per consecutive black-frame pair");
  if (reference >= K) throw ParamError("reference black frame outside the black context");
  if (window < 2) throw ParamError("flow window needs at least 2 black frames");
  for (std::size_t k = 1; k < K; ++k)
    if (!(black_times[k] > black_times[k - 1])) throw ParamError("black times must increase");
  const int W = black_flows[0].width(), H = black_flows[0].height();
  for (const auto& f : black_flows)
    if (f.width() != W || f.height() != H) throw ParamError("black flows differ in size");

  // Black frames used: the `window` nearest to the centre of the frame times.
  const double mid = frame_times.empty()
                         ? black_times[reference]
                         : 0.5 * (*std::min_element(frame_times.begin(), frame_times.end()) +
                                  *std::max_element(frame_times.begin(), frame_times.end()));
  std::vector<std::size_t> used(K);
  std::iota(used.begin(), used.end(), 0);
  std::sort(used.begin(), used.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(black_times[a] - mid) < std::abs(black_times[b] - mid);
  });
  used.resize(std::min<std::size_t>(K, static_cast<std::size_t>(window)));
  std::sort(used.begin(), used.end());

  std::vector<FlowField> out(frame_times.size(), FlowField(W, H));
  parallel_for(0, H, [&](int y) {
    std::vector<double> px(K), py(K), ts, vx, vy;
    for (int x = 0; x < W; ++x) {
      px[reference] = py[reference] = 0.0;
      for (std::size_t k = reference; k + 1 < K; ++k) {
        double dx, dy;
        detail::sample_flow(black_flows[k], x + px[k], y + py[k], dx, dy);
        px[k + 1] = px[k] + dx;
        py[k + 1] = py[k] + dy;
      }
      for (std::size_t k = reference; k-- > 0;) {
        // Solve P_k + f_k(p + P_k) = P_{k+1}.
        double qx = px[k + 1], qy = py[k + 1];
        for (int it = 0; it < 5; ++it) {
          double dx, dy;
          detail::sample_flow(black_flows[k], x + qx, y + qy, dx, dy);
          qx = px[k + 1] - dx;
          qy = py[k + 1] - dy;
        }
        px[k] = qx;
        py[k] = qy;
      }
      ts.clear(), vx.clear(), vy.clear();
      for (std::size_t k : used) ts.push_back(black_times[k]), vx.push_back(px[k]), vy.push_back(py[k]);
      for (std::size_t i = 0; i < frame_times.size(); ++i) {
        out[i].dx(x, y) = static_cast<float>(interpolate_trajectory(ts, vx, frame_times[i]));
        out[i].dy(x, y) = static_cast<float>(interpolate_trajectory(ts, vy, frame_times[i]));
      }
    }
  });
  return out;
}

/// Flows from the centre frame to every frame of the group:
/// flows[i] = to_frame[i] - to_frame[center]. The centre entry is zero.
struct FlowStack {
  std::size_t center = 0;  // 0-based index into flows
  std::vector<FlowField> flows;
};

inline FlowStack compose_to_center(const std::vector<FlowField>& to_frame, std::size_t center) {
  if (center >= to_frame.size()) throw ParamError("centre frame outside the flow list");
  const FlowField& c = to_frame[center];
  FlowStack s{center, {}};
  for (std::size_t i = 0; i < to_frame.size(); ++i) {
    const FlowField& f = to_frame[i];
    if (f.width() != c.width() || f.height() != c.height()) throw ParamError("flows differ in size");
    FlowField d(f.width(), f.height());
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x) {
        d.dx(x, y) = i == center ? 0.0f : f.dx(x, y) - c.dx(x, y);
        d.dy(x, y) = i == center ? 0.0f : f.dy(x, y) - c.dy(x, y);
        d.set_valid(x, y, f.is_valid(x, y) && c.is_valid(x, y));
      }
    s.flows.push_back(std::move(d));
  }
  return s;
}

/// Backward bilinear warp: out(p) = img(p + flow(p)). A sample is invalid when
/// it falls outside the image or touches an invalid source pixel.
inline RgbImage warp_image(const RgbImage& img, const Mask& valid, const FlowField& flow, Mask& out_valid) {
  const int W = img.width(), H = img.height();
  if (flow.width() != W || flow.height() != H) throw ParamError("flow does not match the frame size");
  if (valid.size() != img.pixel_count()) throw ParamError("validity mask does not match the frame size");
  RgbImage out(W, H, img.channels());
  out_valid.assign(img.pixel_count(), 0);
  parallel_for(0, H, [&](int y) {
    for (int x = 0; x < W; ++x) {
      const double sx = x + static_cast<double>(flow.dx(x, y)), sy = y + static_cast<double>(flow.dy(x, y));
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= W - 1 && sy <= H - 1)) continue;
      const int x0 = std::min(static_cast<int>(sx), W - 1), y0 = std::min(static_cast<int>(sy), H - 1);
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      const double tx = sx - x0, ty = sy - y0;
      const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
      const int xs[4] = {x0, x1, x0, x1}, ys[4] = {y0, y0, y1, y1};
      bool ok = true;
      for (int k = 0; k < 4; ++k)
        if (w[k] > 0.0 && !valid[static_cast<std::size_t>(ys[k]) * W + xs[k]]) ok = false;
      if (!ok) continue;
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k)
          if (w[k] > 0.0) acc += w[k] * img(xs[k], ys[k], c);
        out(x, y, c) = static_cast<float>(acc);
      }
      out_valid[static_cast<std::size_t>(y) * W + x] = 1;
    }
  });
  return out;
}

/// Left-camera frames of a group aligned to its centre frame.
struct AlignedFrames {
  std::vector<RgbImage> images;  // same order as FrameGroup::frames
  std::vector<Mask> valid;
};

inline AlignedFrames warp_to_center(const FrameGroup& g, const FlowStack& s) {
  if (s.flows.size() != g.frames.size()) throw ParamError("flow stack does not match the frame group");
  AlignedFrames a;
  for (std::size_t i = 0; i < g.frames.size(); ++i) {
    Mask m;
    a.images.push_back(warp_image(g.frames[i].left, g.frames[i].left_valid, s.flows[i], m));
    a.valid.push_back(std::move(m));
  }
  return a;
}

struct MotionOptions {
  bool oracle = false;  // use the group's ground-truth black flows
  int window = 4;       // black frames in the trajectory fit
  FlowOptions estimator;
};

/// Black flows (estimated or injected), interpolated to every frame time and
/// composed to the centre frame.
inline FlowStack group_flow_stack(const FrameGroup& g, const MotionOptions& o = {}) {
  if (g.black_context.size() < 2) throw ParamError("frame group has fewer than 2 black frames");
  std::vector<FlowField> black;
  if (o.oracle) {
    if (g.oracle_black_flows.size() + 1 != g.black_context.size())
      throw ParamError("frame group carries no ground-truth black flows");
    for (const auto& f : g.oracle_black_flows) black.push_back(oracle_black_flow(f));
  } else {
    for (std::size_t k = 0; k + 1 < g.black_context.size(); ++k)
      black.push_back(estimate_black_flow(g.black_context[k], g.black_context[k + 1], o.estimator));
  }
  const auto to_frame = interpolate_group_flows(black, g.black_times, g.reference_black, g.frame_times, o.window);
  return compose_to_center(to_frame, static_cast<std::size_t>(g.center_index() - 1));
}

}  // namespace ddsl::flow
