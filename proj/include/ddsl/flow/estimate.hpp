#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"
#include "ddsl/core/parallel.hpp"

namespace ddsl::flow {

struct FlowOptions {
  double gain = 3.0;       // intensity multiplier applied to both black frames
  int levels = 4;          // pyramid levels, coarsest first in the solve
  int radius = 4;          // LK window half-size
  int iterations = 6;      // LK refinements per level
  double min_eigen = 1e-3; // structure-tensor confidence floor, per window pixel

  void validate() const {
    if (!(gain > 0.0) || !std::isfinite(gain)) throw ParamError("flow gain must be positive");
    if (levels < 1 || radius < 1 || iterations < 1) throw ParamError("flow levels, radius and iterations must be >= 1");
    if (!(min_eigen >= 0.0)) throw ParamError("flow confidence floor must be >= 0");
  }
};

namespace detail {

/// Single-channel plane, row-major.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  double at(int x, int y) const noexcept {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return v[static_cast<std::size_t>(y) * w + x];
  }
  double bilinear(double x, double y) const noexcept {
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double tx = x - fx, ty = y - fy;
    return (1 - ty) * ((1 - tx) * at(x0, y0) + tx * at(x0 + 1, y0)) +
           ty * ((1 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1));
  }
};

inline Plane luminance(const RgbImage& img, double gain) {
  Plane p{img.width(), img.height(), std::vector<double>(img.pixel_count(), 0.0)};
  for (int c = 0; c < img.channels(); ++c) {
    const auto src = img.plane(c);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] += gain * src[i] / img.channels();
  }
  return p;
}

/// [1 2 1]/4 smoothing then 2x decimation.
inline Plane downsample(const Plane& in) {
  Plane out{std::max(1, (in.w + 1) / 2), std::max(1, (in.h + 1) / 2), {}};
  out.v.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          acc += (dx == 0 ? 2.0 : 1.0) * (dy == 0 ? 2.0 : 1.0) * in.at(2 * x + dx, 2 * y + dy);
      out.v[static_cast<std::size_t>(y) * out.w + x] = acc / 16.0;
    }
  return out;
}

}  // namespace detail

/// Dense pyramidal Lucas-Kanade flow from `prev` to `next`: the content at p
/// in `prev` sits at p + flow(p) in `next`. Pixels whose window lacks
/// texture (small structure-tensor eigenvalue) keep the coarser estimate and
/// are marked invalid.
inline FlowField estimate_black_flow(const RgbImage& prev, const RgbImage& next, const FlowOptions& o = {}) {
  o.validate();
  if (prev.width() != next.width() || prev.height() != next.height() || prev.channels() != next.channels())
    throw ParamError("black frames differ in size");
  std::vector<detail::Plane> A{detail::luminance(prev, o.gain)}, B{detail::luminance(next, o.gain)};
  for (int l = 1; l < o.levels && std::min(A.back().w, A.back().h) >= 2 * (2 * o.radius + 1); ++l) {
    A.push_back(detail::downsample(A.back()));
    B.push_back(detail::downsample(B.back()));
  }

  std::vector<double> u, v;  // flow at the current level
  std::vector<std::uint8_t> ok;
  for (int l = static_cast<int>(A.size()) - 1; l >= 0; --l) {
    const detail::Plane &a = A[l], &b = B[l];
    const std::size_t n = static_cast<std::size_t>(a.w) * a.h;
    std::vector<double> nu(n, 0.0), nv(n, 0.0);
    if (!u.empty()) {
      const detail::Plane& up = A[l + 1];
      for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * a.w + x;
          const std::size_t j = static_cast<std::size_t>(std::min(y / 2, up.h - 1)) * up.w + std::min(x / 2, up.w - 1);
          nu[i] = 2.0 * u[j];
          nv[i] = 2.0 * v[j];
        }
    }
    // Central-difference gradients of the reference image.
    std::vector<double> gx(n), gy(n);
    for (int y = 0; y < a.h; ++y)
      for (int x = 0; x < a.w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * a.w + x;
        gx[i] = 0.5 * (a.at(x + 1, y) - a.at(x - 1, y));
        gy[i] = 0.5 * (a.at(x, y + 1) - a.at(x, y - 1));
      }
    std::vector<std::uint8_t> conf(n, 0);
    const double area = static_cast<double>((2 * o.radius + 1) * (2 * o.radius + 1));
    parallel_for(0, a.h, [&](int y) {
      for (int x = 0; x < a.w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * a.w + x;
        Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
        for (int dy = -o.radius; dy <= o.radius; ++dy)
          for (int dx = -o.radius; dx <= o.radius; ++dx) {
            const int xs = std::clamp(x + dx, 0, a.w - 1), ys = std::clamp(y + dy, 0, a.h - 1);
            const std::size_t k = static_cast<std::size_t>(ys) * a.w + xs;
            G(0, 0) += gx[k] * gx[k];
            G(0, 1) += gx[k] * gy[k];
            G(1, 1) += gy[k] * gy[k];
          }
        G(1, 0) = G(0, 1);
        const double tr = G.trace(), det = G.determinant();
        const double lmin = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
        if (!(lmin > o.min_eigen * area)) continue;
        conf[i] = 1;
        const Eigen::Matrix2d Ginv = G.inverse();
        for (int it = 0; it < o.iterations; ++it) {
          Eigen::Vector2d bvec = Eigen::Vector2d::Zero();
          for (int dy = -o.radius; dy <= o.radius; ++dy)
            for (int dx = -o.radius; dx <= o.radius; ++dx) {
              const int xs = std::clamp(x + dx, 0, a.w - 1), ys = std::clamp(y + dy, 0, a.h - 1);
              const std::size_t k = static_cast<std::size_t>(ys) * a.w + xs;
              const double diff = a.v[k] - b.bilinear(xs + nu[i], ys + nv[i]);
              bvec += Eigen::Vector2d(gx[k], gy[k]) * diff;
            }
          const Eigen::Vector2d step = Ginv * bvec;
          nu[i] += step.x();
          nv[i] += step.y();
          if (step.squaredNorm() < 1e-6) break;
        }
      }
    });
    u = std::move(nu);
    v = std::move(nv);
    ok = std::move(conf);
  }

  FlowField out(prev.width(), prev.height());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * out.width() + x;
      out.dx(x, y) = static_cast<float>(u[i]);
      out.dy(x, y) = static_cast<float>(v[i]);
      out.valid()[i] = ok[i] && std::isfinite(u[i]) && std::isfinite(v[i]);
    }
  return out;
}

/// Ground-truth injection: the supplied field, unchanged.
inline FlowField oracle_black_flow(const FlowField& truth) { return truth; }

}  // namespace ddsl::flow
