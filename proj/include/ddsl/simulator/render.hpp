#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ddsl/core/frames.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/optics/bundle.hpp"
#include "ddsl/patterns.hpp"
#include "ddsl/simulator/scene.hpp"

namespace ddsl::sim {

struct RenderOptions {
  double noise_sigma = 0.0;   // additive Gaussian, linear intensity units
  bool projector_blur = true;  // column blur G applied to the emitted pattern
  int blur_size = 7;
  double blur_sigma = 3.0;
  int supersample = 1;  // sub-wavelength samples per band; 1 = plain Riemann sum over the grid
};

/// Captured intensity of one pixel for one band:
/// cam[c] * H * (eta * L + ambient) / d^2, accumulated into rgb.
inline void accumulate_band(const RadiometricTables& t, std::size_t band, double reflectance, double d2,
                            double light, double ambient, double rgb[3]) {
  const double e = reflectance * (t.eta[band] * light + ambient) / d2;
  for (int c = 0; c < 3; ++c) rgb[c] += t.cam[c][band] * e;
}

/// Forward renderer of one scene through one calibrated rig.
class Renderer {
 public:
  Renderer(const SceneSpec& scene, const CalibrationBundle& rig, RenderOptions options = {})
      : scene_(scene), rig_(rig), opt_(options) {
    scene_.validate();
    if (scene_.reflectance.grid() != rig_.tables.grid) throw GridError("scene grid differs from calibration grid");
    if (scene_.depth.width() != rig_.left.width || scene_.depth.height() != rig_.left.height)
      throw ParamError("scene size differs from the left camera");
    if (opt_.supersample < 1) throw ParamError("supersample must be >= 1");
    if (opt_.projector_blur) kernel_ = gaussian_kernel(opt_.blur_size, opt_.blur_sigma);
    double lo = 1e300, hi = 0.0;
    const auto& z = scene_.depth.plane().data();
    for (std::size_t i = 0; i < z.size(); ++i)
      if (scene_.depth.valid()[i]) {
        lo = std::min<double>(lo, z[i]);
        hi = std::max<double>(hi, z[i]);
      }
    if (hi <= 0.0) throw ParamError("scene has no valid depth");
    z_near_ = 0.9 * lo;
    z_far_ = 1.1 * hi;
    left_R_ = rig_.left.rotation();
    left_t_ = rig_.left.translation();
    right_Kinv_ = rig_.right.K.inverse();
    right_Rt_ = rig_.right.rotation().transpose();
  }

  const RenderOptions& options() const noexcept { return opt_; }
  const SceneSpec& scene() const noexcept { return scene_; }

  ProjectedLight light(const Image& pattern) const { return ProjectedLight(pattern, kernel_); }

  /// RGB seen by the left camera at (ux, uy) at time t. `only_band` >= 0
  /// restricts the sum to one band (a bandpass filter in front of the
  /// camera). Returns false where depth or dispersion coverage is missing.
  bool shade(double ux, double uy, double t, const ProjectedLight& light, double rgb[3], int only_band = -1) const {
    rgb[0] = rgb[1] = rgb[2] = 0.0;
    const std::size_t n = rig_.tables.bands();
    double spectrum_buf[64];
    std::vector<double> spectrum_heap;
    double* spectrum = spectrum_buf;
    if (n > 64) {
      spectrum_heap.resize(n);
      spectrum = spectrum_heap.data();
    }
    double z = 0.0;
    if (!scene_.lookup(ux, uy, t, std::span<double>(spectrum, n), z)) return false;
    const Eigen::Vector3d X = rig_.left.unproject(ux, uy, z);
    double proj_depth = 0.0;
    const Eigen::Vector2d qg = rig_.projector.project(X, &proj_depth);
    if (!(proj_depth > 0.0)) return false;
    const double d2 = (X - rig_.projector.center()).squaredNorm();
    const RadiometricTables& tb = rig_.tables;
    const std::size_t j0 = only_band >= 0 ? static_cast<std::size_t>(only_band) : 0;
    const std::size_t j1 = only_band >= 0 ? j0 + 1 : n;

    if (opt_.supersample == 1) {
      for (std::size_t j = j0; j < j1; ++j) {
        const auto q = rig_.dispersion.at_band(ux, uy, z, j);
        if (!q.covered) return false;
        const double amb = scene_.ambient.empty() ? 0.0 : scene_.ambient[j];
        accumulate_band(tb, j, spectrum[j], d2, light.spectral(tb, j, q.q, qg.y()), amb, rgb);
      }
      return true;
    }

    // Sub-band integration: tables and reflectance interpolated linearly in
    // wavelength, each band integrated over its own step width.
    const int S = opt_.supersample;
    const WavelengthGrid& g = tb.grid;
    auto lerp = [&](const double* v, double pos) {
      const std::size_t a = std::min<std::size_t>(static_cast<std::size_t>(pos), n - 1);
      const std::size_t b = std::min(a + 1, n - 1);
      const double f = pos - static_cast<double>(a);
      return (1.0 - f) * v[a] + f * v[b];
    };
    for (std::size_t j = j0; j < j1; ++j) {
      for (int s = 0; s < S; ++s) {
        const double lambda = std::clamp(g.wavelength(j) + g.step() * ((s + 0.5) / S - 0.5), g.lambda_min(),
                                         g.lambda_max());
        const double pos = g.band_position(lambda);
        const auto q = rig_.dispersion.backward_map(ux, uy, z, lambda);
        if (!q.covered) return false;
        double light_v = 0.0;
        for (int c = 0; c < 3; ++c) light_v += lerp(tb.proj[c].data(), pos) * light.channel(c, q.q, qg.y());
        const double amb = scene_.ambient.empty() ? 0.0 : lerp(scene_.ambient.data(), pos);
        const double e = lerp(spectrum, pos) * (lerp(tb.eta.data(), pos) * light_v + amb) / d2 / S;
        for (int c = 0; c < 3; ++c) rgb[c] += lerp(tb.cam[c].data(), pos) * e;
      }
    }
    return true;
  }

  /// Left-image position of the surface seen by right pixel (rx, ry) at
  /// time t: march the right ray in inverse depth and refine the first
  /// crossing of the left depth surface by bisection.
  bool right_to_left(double rx, double ry, double t, Eigen::Vector2d& u) const {
    const Eigen::Vector3d C = rig_.right.center();
    const Eigen::Vector3d D = right_Rt_ * (right_Kinv_ * Eigen::Vector3d(rx, ry, 1.0));
    const double a = (left_R_ * C + left_t_).z();
    const double b = (left_R_ * D).z();
    if (!(b > 0.0)) return false;

    // f(w) = z(w) - surface depth at the projected left pixel; defined only
    // while the projection stays on the scene.
    auto eval = [&](double w, double& f, Eigen::Vector2d& pix) {
      const double z = 1.0 / w;
      const double s = (z - a) / b;
      if (!(s > 0.0)) return false;
      const Eigen::Vector3d X = C + s * D;
      pix = rig_.left.project(X);
      if (pix.x() < 0.0 || pix.y() < 0.0 || pix.x() > rig_.left.width - 1 || pix.y() > rig_.left.height - 1)
        return false;
      double zs = 0.0;
      if (!scene_.depth_at(pix.x(), pix.y(), t, zs)) return false;
      f = z - zs;
      return true;
    };

    const double baseline = (C - rig_.left.center()).norm();
    const double span = rig_.left.focal_x() * baseline * (1.0 / z_near_ - 1.0 / z_far_);
    const int steps = static_cast<int>(std::ceil(4.0 * span)) + 16;
    const double w0 = 1.0 / z_near_, w1 = 1.0 / z_far_;
    bool have_prev = false;
    double w_prev = 0.0, f_prev = 0.0;
    for (int k = 0; k <= steps; ++k) {
      const double w = w0 + (w1 - w0) * k / steps;
      double f = 0.0;
      Eigen::Vector2d pix;
      if (!eval(w, f, pix)) {
        have_prev = false;
        continue;
      }
      if (have_prev && f_prev < 0.0 && f >= 0.0) {
        double lo = w_prev, hi = w;  // f(lo) < 0 <= f(hi)
        Eigen::Vector2d best = pix;
        for (int it = 0; it < 50; ++it) {
          const double mid = 0.5 * (lo + hi);
          double fm = 0.0;
          Eigen::Vector2d pm;
          if (!eval(mid, fm, pm)) break;
          if (fm < 0.0) {
            lo = mid;
          } else {
            hi = mid;
            best = pm;
          }
        }
        u = best;
        return true;
      }
      have_prev = true;
      w_prev = w;
      f_prev = f;
    }
    return false;
  }

  /// Stereo capture of the scene at time t under `light`. Noise is drawn
  /// from `seed` (left image first, then right) after the noiseless render.
  StereoFrame render(const ProjectedLight& light, double t, std::uint64_t seed = 0) const {
    const int W = rig_.left.width, H = rig_.left.height;
    StereoFrame f;
    f.left = make_rgb(W, H);
    f.left_valid.assign(static_cast<std::size_t>(W) * H, 0);
    f.right = make_rgb(rig_.right.width, rig_.right.height);
    f.right_valid.assign(static_cast<std::size_t>(rig_.right.width) * rig_.right.height, 0);
    parallel_for(0, H, [&](int y) {
      double rgb[3];
      for (int x = 0; x < W; ++x)
        if (shade(x, y, t, light, rgb)) {
          for (int c = 0; c < 3; ++c) f.left(x, y, c) = static_cast<float>(rgb[c]);
          f.left_valid[static_cast<std::size_t>(y) * W + x] = 1;
        }
    });
    const int RW = rig_.right.width;
    parallel_for(0, rig_.right.height, [&](int y) {
      double rgb[3];
      Eigen::Vector2d u;
      for (int x = 0; x < RW; ++x)
        if (right_to_left(x, y, t, u) && shade(u.x(), u.y(), t, light, rgb)) {
          for (int c = 0; c < 3; ++c) f.right(x, y, c) = static_cast<float>(rgb[c]);
          f.right_valid[static_cast<std::size_t>(y) * RW + x] = 1;
        }
    });
    if (opt_.noise_sigma > 0.0) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> noise(0.0, opt_.noise_sigma);
      auto add = [&](RgbImage& img, const Mask& valid) {
        for (int c = 0; c < 3; ++c)
          for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            const double n = noise(rng);
            if (valid[i]) img.plane(c)[i] += static_cast<float>(n);
          }
      };
      add(f.left, f.left_valid);
      add(f.right, f.right_valid);
    }
    return f;
  }

 private:
  SceneSpec scene_;
  CalibrationBundle rig_;
  RenderOptions opt_;
  std::vector<double> kernel_;
  double z_near_ = 0.1, z_far_ = 10.0;
  Eigen::Matrix3d left_R_, right_Kinv_, right_Rt_;
  Eigen::Vector3d left_t_;
};

/// Stereo capture of frame time t under one projector image.
inline StereoFrame render_frame(const SceneSpec& scene, const Image& pattern, const CalibrationBundle& rig, double t,
                                const RenderOptions& options = {}, std::uint64_t seed = 0) {
  const Renderer r(scene, rig, options);
  return r.render(r.light(pattern), t, seed);
}

/// Renders I^1..I^M, I^B plus black frames at -(M+1), 0, M+1, 2(M+1).
inline FrameGroup render_group(const SceneSpec& scene, const PatternParams& params, const CalibrationBundle& rig,
                               std::uint64_t seed = 0, const RenderOptions& options = {}) {
  params.validate();
  if (params.proj_width != rig.projector.width || params.proj_height != rig.projector.height)
    throw ParamError("pattern size differs from the projector resolution");
  const Renderer r(scene, rig, options);
  const PatternSet set = generate_patterns(params);
  const int M = params.count;
  FrameGroup g;
  g.params = params;
  g.seed = seed;
  g.noise_sigma = options.noise_sigma;
  auto frame_seed = [&](int k) { return seed * 1000003ull + static_cast<std::uint64_t>(k + 1000); };

  for (int i = 1; i <= M; ++i) {
    g.frames.push_back(r.render(r.light(set.patterns[i - 1].to_image()), i, frame_seed(i)));
    g.frame_times.push_back(i);
  }
  const ProjectedLight black = r.light(set.black.to_image());
  g.frames.push_back(r.render(black, M + 1, frame_seed(M + 1)));
  g.frame_times.push_back(M + 1);

  const double period = M + 1;
  g.black_times = {-period, 0.0, period, 2.0 * period};
  g.reference_black = 1;
  for (std::size_t k = 0; k < g.black_times.size(); ++k) {
    const double t = g.black_times[k];
    if (t == period) {
      g.black_context.push_back(g.frames.back().left);
      continue;
    }
    g.black_context.push_back(r.render(black, t, frame_seed(static_cast<int>(t))).left);
  }
  for (std::size_t k = 0; k + 1 < g.black_times.size(); ++k) {
    const Eigen::Vector2d d =
        scene.motion.displacement(g.black_times[k + 1]) - scene.motion.displacement(g.black_times[k]);
    g.oracle_black_flows.emplace_back(rig.left.width, rig.left.height, static_cast<float>(d.x()),
                                      static_cast<float>(d.y()));
  }
  SceneSpec truth = scene.at_time(g.center_index());
  g.truth_cube = std::move(truth.reflectance);
  g.truth_depth = std::move(truth.depth);
  return g;
}

}  // namespace ddsl::sim
