#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/frames.hpp"
#include "ddsl/core/image.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/optics/camera.hpp"

namespace ddsl::depth {

/// Rectified stereo geometry. Homographies map original pixels to rectified
/// pixels; both rectified views share K and the rotation R (world to
/// rectified camera), the right one sits `baseline` metres along +x.
struct RectificationPair {
  Eigen::Matrix3d H_left = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d H_right = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d left_center = Eigen::Vector3d::Zero();
  Eigen::Matrix3d left_rotation = Eigen::Matrix3d::Identity();  // original left camera
  double baseline = 0.0;
  double focal = 0.0;
  int width = 0, height = 0;

  Eigen::Vector2d left_to_rect(double x, double y) const { return apply(H_left, x, y); }
  Eigen::Vector2d right_to_rect(double x, double y) const { return apply(H_right, x, y); }
  static Eigen::Vector2d apply(const Eigen::Matrix3d& H, double x, double y) {
    const Eigen::Vector3d p = H * Eigen::Vector3d(x, y, 1.0);
    return p.head<2>() / p.z();
  }
};

/// Epipolar rectification after Fusiello et al.: the new x axis follows the
/// baseline, y is orthogonal to it and the old left optical axis. The left
/// intrinsics are kept, so a rig that is already rectified gets identity
/// homographies.
inline RectificationPair compute_rectification(const PinholeCamera& left, const PinholeCamera& right) {
  left.validate();
  right.validate();
  if (left.width != right.width || left.height != right.height) throw RigError("stereo cameras differ in size");
  const Eigen::Vector3d c1 = left.center(), c2 = right.center();
  const Eigen::Vector3d base = c2 - c1;
  const double b = base.norm();
  if (!(b > 1e-12)) throw RigError("stereo baseline is zero");
  const Eigen::Vector3d x = base / b;
  const Eigen::Vector3d z_old = left.rotation().row(2).transpose();
  Eigen::Vector3d y = z_old.cross(x);
  if (!(y.norm() > 1e-9)) throw RigError("baseline is parallel to the optical axis");
  y.normalize();
  const Eigen::Vector3d z = x.cross(y);

  RectificationPair r;
  r.R.row(0) = x.transpose();
  r.R.row(1) = y.transpose();
  r.R.row(2) = z.transpose();
  r.K = left.K;
  r.K(0, 1) = 0.0;
  r.H_left = r.K * r.R * left.rotation().transpose() * left.K.inverse();
  r.H_right = r.K * r.R * right.rotation().transpose() * right.K.inverse();
  r.left_center = c1;
  r.left_rotation = left.rotation();
  r.baseline = b;
  r.focal = r.K(0, 0);
  r.width = left.width;
  r.height = left.height;
  return r;
}

/// Resamples an image into rectified space: out(p) = img(H^-1 p), bilinear,
/// invalid where the source is outside or invalid.
inline RgbImage rectify_image(const RgbImage& img, const Mask& valid, const Eigen::Matrix3d& H, Mask& out_valid) {
  const int W = img.width(), Ht = img.height();
  if (valid.size() != img.pixel_count()) throw ParamError("validity mask does not match the image");
  const Eigen::Matrix3d Hi = H.inverse();
  RgbImage out(W, Ht, img.channels());
  out_valid.assign(img.pixel_count(), 0);
  parallel_for(0, Ht, [&](int y) {
    for (int x = 0; x < W; ++x) {
      const Eigen::Vector2d s = RectificationPair::apply(Hi, x, y);
      if (!(s.x() >= 0.0 && s.y() >= 0.0 && s.x() <= W - 1 && s.y() <= Ht - 1)) continue;
      const int x0 = std::min(static_cast<int>(s.x()), W - 1), y0 = std::min(static_cast<int>(s.y()), Ht - 1);
      const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, Ht - 1);
      const double tx = s.x() - x0, ty = s.y() - y0;
      const double w[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
      const int xs[4] = {x0, x1, x0, x1}, ys[4] = {y0, y0, y1, y1};
      bool ok = true;
      for (int k = 0; k < 4; ++k)
        if (w[k] > 1e-12 && !valid[static_cast<std::size_t>(ys[k]) * W + xs[k]]) ok = false;
      if (!ok) continue;
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k)
          if (w[k] > 1e-12) acc += w[k] * img(xs[k], ys[k], c);
        out(x, y, c) = static_cast<float>(acc);
      }
      out_valid[static_cast<std::size_t>(y) * W + x] = 1;
    }
  });
  return out;
}

struct RectifiedPair {
  RgbImage left, right;
  Mask left_valid, right_valid;
  RectificationPair geometry;
};

inline RectifiedPair rectify(const StereoFrame& f, const PinholeCamera& left, const PinholeCamera& right) {
  RectifiedPair r;
  r.geometry = compute_rectification(left, right);
  if (f.left.width() != left.width || f.left.height() != left.height || f.right.width() != right.width ||
      f.right.height() != right.height)
    throw ParamError("stereo frame does not match the camera sizes");
  r.left = rectify_image(f.left, f.left_valid, r.geometry.H_left, r.left_valid);
  r.right = rectify_image(f.right, f.right_valid, r.geometry.H_right, r.right_valid);
  return r;
}

/// Rectified-space disparity x_left - x_right, pixels.
struct DisparityMap {
  int width = 0, height = 0;
  std::vector<float> d;
  Mask valid;

  DisparityMap() = default;
  DisparityMap(int w, int h) : width(w), height(h), d(static_cast<std::size_t>(w) * h, 0.0f), valid(d.size(), 0) {}
  float& at(int x, int y) { return d[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return d[static_cast<std::size_t>(y) * width + x]; }
};

struct BlockMatchingOptions {
  int radius = 4;             // SAD window half-size
  int min_disparity = 0;
  int max_disparity = 32;
  double lr_tolerance = 1.0;  // pixels, left-right consistency
  double min_texture = 1e-4;  // window luminance variance floor
  double uniqueness = 0.1;    // reject when a non-adjacent cost is within (1 + u) of the best

  void validate() const {
    if (radius < 1) throw ParamError("block-matching radius must be >= 1");
    if (min_disparity < 0 || max_disparity < min_disparity + 2)
      throw ParamError("disparity range must span at least 3 values, from >= 0");
    if (!(lr_tolerance >= 0.0)) throw ParamError("left-right tolerance must be >= 0");
    if (!(uniqueness >= 0.0)) throw ParamError("uniqueness ratio must be >= 0");
  }
};

namespace detail {

/// Per-pixel box sum over a (2r+1)^2 window, clamped at the borders, and
/// the count of contributing pixels.
inline void box_sum(const std::vector<double>& v, int W, int H, int r, std::vector<double>& out) {
  std::vector<double> ii(static_cast<std::size_t>(W + 1) * (H + 1), 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      ii[(y + 1) * (W + 1) + x + 1] = v[static_cast<std::size_t>(y) * W + x] + ii[y * (W + 1) + x + 1] +
                                      ii[(y + 1) * (W + 1) + x] - ii[y * (W + 1) + x];
  out.resize(v.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(W, x + r + 1);
      const int y0 = std::max(0, y - r), y1 = std::min(H, y + r + 1);
      out[static_cast<std::size_t>(y) * W + x] =
          ii[y1 * (W + 1) + x1] - ii[y0 * (W + 1) + x1] - ii[y1 * (W + 1) + x0] + ii[y0 * (W + 1) + x0];
    }
}

inline std::vector<double> luminance(const RgbImage& img) {
  std::vector<double> v(img.pixel_count(), 0.0);
  for (int c = 0; c < img.channels(); ++c) {
    const auto p = img.plane(c);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += p[i];
  }
  return v;
}

/// SAD cost volume; cost[d][i] is +inf where the window leaves the valid
/// region of either view. `sign` = +1 matches left pixels (x - d in the
/// right view), -1 matches right pixels (x + d in the left view).
inline std::vector<std::vector<double>> sad_volume(const std::vector<double>& ref, const Mask& ref_valid,
                                                   const std::vector<double>& other, const Mask& other_valid, int W,
                                                   int H, const BlockMatchingOptions& o, int sign) {
  const int D = o.max_disparity - o.min_disparity + 1;
  std::vector<std::vector<double>> cost(D);
  const double inf = std::numeric_limits<double>::infinity();
  parallel_for(0, D, [&](int k) {
    const int d = o.min_disparity + k;
    std::vector<double> diff(ref.size()), bad(ref.size());
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        const int xo = x - sign * d;
        const bool ok = xo >= 0 && xo < W && ref_valid[i] && other_valid[static_cast<std::size_t>(y) * W + xo];
        diff[i] = ok ? std::abs(ref[i] - other[static_cast<std::size_t>(y) * W + xo]) : 0.0;
        bad[i] = ok ? 0.0 : 1.0;
      }
    std::vector<double> s, nb;
    box_sum(diff, W, H, o.radius, s);
    box_sum(bad, W, H, o.radius, nb);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (nb[i] > 0.0) s[i] = inf;
    cost[k] = std::move(s);
  });
  return cost;
}

/// Winner-take-all with 3-point parabola refinement. Winners on the range
/// border cannot be refined and are rejected.
inline DisparityMap winner_take_all(const std::vector<std::vector<double>>& cost, int W, int H, int dmin,
                                    double uniqueness = 0.0) {
  DisparityMap out(W, H);
  const int D = static_cast<int>(cost.size());
  for (std::size_t i = 0; i < out.d.size(); ++i) {
    int best = -1;
    double bc = std::numeric_limits<double>::infinity();
    for (int k = 0; k < D; ++k)
      if (cost[k][i] < bc) bc = cost[k][i], best = k;
    if (best <= 0 || best >= D - 1) continue;
    bool unique = true;
    for (int k = 0; k < D && uniqueness > 0.0; ++k)
      if (std::abs(k - best) > 1 && cost[k][i] <= (1.0 + uniqueness) * bc) unique = false;
    if (!unique) continue;
    const double cm = cost[best - 1][i], cp = cost[best + 1][i];
    if (!std::isfinite(cm) || !std::isfinite(cp)) continue;
    const double denom = cm - 2.0 * bc + cp;
    const double off = denom > 0.0 ? 0.5 * (cm - cp) / denom : 0.0;
    out.d[i] = static_cast<float>(dmin + best + off);
    out.valid[i] = 1;
  }
  return out;
}

}  // namespace detail

/// Winner-take-all SAD block matching on channel-summed intensity, with a
/// left-right consistency check and parabola sub-pixel refinement.
/// Disparity 0 is a legal match; depth conversion rejects it.
inline DisparityMap block_matching(const RectifiedPair& p, const BlockMatchingOptions& o = {}) {
  o.validate();
  const int W = p.left.width(), H = p.left.height();
  if (p.right.width() != W || p.right.height() != H) throw ParamError("rectified views differ in size");
  const auto L = detail::luminance(p.left), R = detail::luminance(p.right);
  const int lo = o.min_disparity == 0 ? 0 : o.min_disparity - 1;
  BlockMatchingOptions wide = o;
  wide.min_disparity = lo;  // one extra step so the range's lower end can be refined
  auto left_cost = detail::sad_volume(L, p.left_valid, R, p.right_valid, W, H, wide, +1);
  auto right_cost = detail::sad_volume(R, p.right_valid, L, p.left_valid, W, H, wide, -1);
  if (o.min_disparity == 0) {
    // Mirror d = 1 to d = -1 so that d = 0 can be refined too.
    left_cost.insert(left_cost.begin(), left_cost[1]);
    right_cost.insert(right_cost.begin(), right_cost[1]);
  }
  const int dmin = o.min_disparity - 1;
  DisparityMap dl = detail::winner_take_all(left_cost, W, H, dmin, o.uniqueness);
  const DisparityMap dr = detail::winner_take_all(right_cost, W, H, dmin, o.uniqueness);

  // Texture floor on the left window.
  std::vector<double> sq(L.size()), s1, s2, n;
  for (std::size_t i = 0; i < L.size(); ++i) sq[i] = L[i] * L[i];
  detail::box_sum(L, W, H, o.radius, s1);
  detail::box_sum(sq, W, H, o.radius, s2);
  detail::box_sum(std::vector<double>(L.size(), 1.0), W, H, o.radius, n);

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      if (!dl.valid[i]) continue;
      const double mean = s1[i] / n[i], var = s2[i] / n[i] - mean * mean;
      bool ok = var > o.min_texture && dl.d[i] >= o.min_disparity && dl.d[i] <= o.max_disparity;
      const int xr = static_cast<int>(std::lround(x - dl.d[i]));
      ok = ok && xr >= 0 && xr < W && dr.valid[static_cast<std::size_t>(y) * W + xr] &&
           std::abs(dr.at(xr, y) - dl.d[i]) <= o.lr_tolerance;
      if (!ok) dl.valid[i] = 0, dl.d[i] = 0.0f;
    }
  return dl;
}

/// Disparity a perfect matcher would return: ground-truth depth in the
/// original left view, re-expressed in rectified space.
inline DisparityMap oracle_disparity(const DepthMap& truth, const PinholeCamera& left, const RectificationPair& r) {
  if (truth.width() != left.width || truth.height() != left.height)
    throw ParamError("ground-truth depth does not match the left camera");
  DisparityMap out(r.width, r.height);
  const Eigen::Matrix3d Hi = r.H_left.inverse();
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const Eigen::Vector2d s = RectificationPair::apply(Hi, x, y);
      double z = 0.0;
      if (!truth.sample(s.x(), s.y(), z)) continue;
      const Eigen::Vector3d Xr = r.R * (left.unproject(s.x(), s.y(), z) - r.left_center);
      if (!(Xr.z() > 0.0)) continue;
      out.at(x, y) = static_cast<float>(r.focal * r.baseline / Xr.z());
      out.valid[static_cast<std::size_t>(y) * r.width + x] = 1;
    }
  return out;
}

/// Rectified-space depth z = f b / d; d <= 0 is invalid.
inline DepthMap disparity_to_depth(const DisparityMap& disp, const RectificationPair& r) {
  DepthMap z(disp.width, disp.height);
  for (int y = 0; y < disp.height; ++y)
    for (int x = 0; x < disp.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * disp.width + x;
      if (disp.valid[i] && disp.d[i] > 0.0f) z.set(x, y, r.focal * r.baseline / disp.d[i]);
    }
  return z;
}

/// Depth in the original left view: each original pixel is mapped into
/// rectified space, the rectified depth sampled there, and the 3D point
/// re-expressed in the original camera frame.
inline DepthMap unrectify(const DepthMap& rect_depth, const RectificationPair& r, const PinholeCamera& left) {
  DepthMap out(left.width, left.height);
  const Eigen::Matrix3d Kinv = r.K.inverse();
  for (int y = 0; y < left.height; ++y)
    for (int x = 0; x < left.width; ++x) {
      const Eigen::Vector2d p = r.left_to_rect(x, y);
      double zr = 0.0;
      if (!rect_depth.sample(p.x(), p.y(), zr)) continue;
      const Eigen::Vector3d Xr = zr * (Kinv * Eigen::Vector3d(p.x(), p.y(), 1.0));
      const Eigen::Vector3d Xc = r.left_rotation * (r.R.transpose() * Xr);
      out.set(x, y, Xc.z());
    }
  return out;
}

enum class DisparitySource { block_matching, oracle };

struct DepthOptions {
  DisparitySource source = DisparitySource::block_matching;
  BlockMatchingOptions matching;
  bool auto_range = true;  // derive the disparity range from the calibrated depth range
};

/// Depth of one stereo frame in the original left view. `truth` is required
/// for the oracle source.
inline DepthMap estimate_depth(const StereoFrame& f, const PinholeCamera& left, const PinholeCamera& right,
                               double z_min, double z_max, const DepthOptions& o = {},
                               const DepthMap* truth = nullptr) {
  const RectifiedPair p = rectify(f, left, right);
  DisparityMap disp;
  if (o.source == DisparitySource::oracle) {
    if (!truth) throw ParamError("oracle disparity needs ground-truth depth");
    disp = oracle_disparity(*truth, left, p.geometry);
  } else {
    BlockMatchingOptions m = o.matching;
    if (o.auto_range && z_min > 0.0 && z_max > z_min) {
      const double fb = p.geometry.focal * p.geometry.baseline;
      m.min_disparity = std::max(0, static_cast<int>(std::floor(fb / z_max)) - 2);
      m.max_disparity = std::max(m.min_disparity + 2, static_cast<int>(std::ceil(fb / z_min)) + 2);
    }
    disp = block_matching(p, m);
  }
  return unrectify(disparity_to_depth(disp, p.geometry), p.geometry, left);
}

}  // namespace ddsl::depth
