#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"

namespace ddsl::eval {

/// Full width at half maximum of a sampled spectrum, in nm. The half-max
/// crossings on each side of the peak are located by linear interpolation.
/// Returns nothing unless there is a single dominant peak: positive maximum,
/// both crossings inside the grid, and no other sample above half max
/// outside the crossing interval.
inline std::optional<double> fwhm(std::span<const double> s, double step_nm) {
  if (s.size() < 3) return std::nullopt;
  const std::size_t p = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
  const double peak = s[p];
  if (!(peak > 0.0) || !std::isfinite(peak)) return std::nullopt;
  const double half = 0.5 * peak;

  std::size_t r = p;
  while (r + 1 < s.size() && s[r + 1] >= half) ++r;
  if (r + 1 == s.size()) return std::nullopt;
  std::size_t l = p;
  while (l > 0 && s[l - 1] >= half) --l;
  if (l == 0) return std::nullopt;
  for (std::size_t k = 0; k < s.size(); ++k)
    if ((k < l || k > r) && s[k] > half) return std::nullopt;

  // crossing between r (>= half) and r + 1 (< half), likewise on the left
  const double xr = static_cast<double>(r) + (s[r] - half) / (s[r] - s[r + 1]);
  const double xl = static_cast<double>(l) - (s[l] - half) / (s[l] - s[l - 1]);
  return (xr - xl) * step_nm;
}

/// Pixel rectangle [x0, x1) x [y0, y1) holding one narrowband target.
struct Target {
  std::string name;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

struct TargetResult {
  std::string name;
  double center_nm = 0.0;  // truth peak wavelength
  std::size_t pixels = 0;
  std::vector<double> truth, recon;  // mean spectra over the target
  std::optional<double> truth_fwhm, recon_fwhm;
};

struct EvalOptions {
  std::vector<Target> targets;
  int histogram_bins = 20;
};

struct EvalReport {
  std::vector<double> wavelengths;  // empty for an empty report
  std::size_t pixels = 0;           // spectral comparison support
  double rmse = 0.0;
  double peak = 0.0;                // truth maximum over the support
  double rmse_relative = 0.0;       // rmse / peak
  std::vector<double> band_rmse;
  std::vector<double> truth_mean, recon_mean;
  std::vector<TargetResult> targets;

  std::size_t depth_pixels = 0;
  double depth_mae_mm = 0.0, depth_max_mm = 0.0, depth_mean_relative = 0.0;
  std::vector<std::pair<double, std::size_t>> depth_histogram;  // (bin upper edge mm, count)

  // Depth estimated under each pattern separately, on a static scene.
  std::size_t consistency_pixels = 0;
  std::vector<double> pattern_deviation_mm;  // per pattern: mean |z_i - mean_k z_k|
  double pattern_spread_mm = 0.0;            // mean over pixels of max_k z_k - min_k z_k
  double pattern_spread_relative = 0.0;      // mean over pixels of (max - min) / mean

  std::vector<std::pair<std::string, double>> runtimes;  // seconds
};

namespace detail {

inline void require_same_size(int w0, int h0, int w1, int h1, const char* what) {
  if (w0 != w1 || h0 != h1) throw EvalError(std::string(what) + " sizes differ");
}

}  // namespace detail

/// Spectral metrics over pixels valid in both cubes.
inline void evaluate_spectra(EvalReport& r, const HyperspectralCube& recon, const HyperspectralCube& truth,
                             const EvalOptions& o = {}) {
  if (!(recon.grid() == truth.grid())) throw EvalError("reconstruction and truth use different wavelength grids");
  detail::require_same_size(recon.width(), recon.height(), truth.width(), truth.height(), "cube");
  const std::size_t N = truth.bands();
  const auto& g = truth.grid();
  r.wavelengths.resize(N);
  for (std::size_t j = 0; j < N; ++j) r.wavelengths[j] = g.wavelength(j);
  r.band_rmse.assign(N, 0.0);
  r.truth_mean.assign(N, 0.0);
  r.recon_mean.assign(N, 0.0);
  r.pixels = 0;
  r.peak = 0.0;
  double sse = 0.0;
  for (int y = 0; y < truth.height(); ++y)
    for (int x = 0; x < truth.width(); ++x) {
      if (!recon.is_valid(x, y) || !truth.is_valid(x, y)) continue;
      ++r.pixels;
      for (std::size_t j = 0; j < N; ++j) {
        const double t = truth(x, y, j), v = recon(x, y, j);
        const double e = (v - t) * (v - t);
        r.band_rmse[j] += e;
        sse += e;
        r.truth_mean[j] += t;
        r.recon_mean[j] += v;
        r.peak = std::max(r.peak, t);
      }
    }
  if (r.pixels == 0) throw EvalError("no pixel is valid in both cubes");
  const double n = static_cast<double>(r.pixels);
  for (std::size_t j = 0; j < N; ++j) {
    r.band_rmse[j] = std::sqrt(r.band_rmse[j] / n);
    r.truth_mean[j] /= n;
    r.recon_mean[j] /= n;
  }
  r.rmse = std::sqrt(sse / (n * static_cast<double>(N)));
  r.rmse_relative = r.peak > 0.0 ? r.rmse / r.peak : 0.0;

  r.targets.clear();
  for (const Target& t : o.targets) {
    if (t.x0 < 0 || t.y0 < 0 || t.x1 > truth.width() || t.y1 > truth.height() || t.x0 >= t.x1 || t.y0 >= t.y1)
      throw EvalError("target " + t.name + " lies outside the image");
    TargetResult tr;
    tr.name = t.name;
    tr.truth.assign(N, 0.0);
    tr.recon.assign(N, 0.0);
    for (int y = t.y0; y < t.y1; ++y)
      for (int x = t.x0; x < t.x1; ++x) {
        if (!recon.is_valid(x, y) || !truth.is_valid(x, y)) continue;
        ++tr.pixels;
        for (std::size_t j = 0; j < N; ++j) {
          tr.truth[j] += truth(x, y, j);
          tr.recon[j] += recon(x, y, j);
        }
      }
    if (tr.pixels > 0) {
      for (std::size_t j = 0; j < N; ++j) {
        tr.truth[j] /= static_cast<double>(tr.pixels);
        tr.recon[j] /= static_cast<double>(tr.pixels);
      }
      const auto p = std::max_element(tr.truth.begin(), tr.truth.end()) - tr.truth.begin();
      tr.center_nm = g.wavelength(static_cast<std::size_t>(p));
      tr.truth_fwhm = fwhm(tr.truth, g.step());
      tr.recon_fwhm = fwhm(tr.recon, g.step());
    }
    r.targets.push_back(std::move(tr));
  }
}

/// Depth errors in mm over pixels valid in both maps, with a histogram of
/// absolute errors.
inline void evaluate_depth(EvalReport& r, const DepthMap& recon, const DepthMap& truth, const EvalOptions& o = {}) {
  detail::require_same_size(recon.width(), recon.height(), truth.width(), truth.height(), "depth map");
  if (o.histogram_bins < 1) throw ParamError("histogram needs at least one bin");
  std::vector<double> err;
  double rel = 0.0;
  for (int y = 0; y < truth.height(); ++y)
    for (int x = 0; x < truth.width(); ++x) {
      if (!recon.is_valid(x, y) || !truth.is_valid(x, y)) continue;
      const double d = std::abs(static_cast<double>(recon.z(x, y)) - truth.z(x, y));
      err.push_back(1000.0 * d);
      rel += d / truth.z(x, y);
    }
  r.depth_pixels = err.size();
  r.depth_histogram.clear();
  if (err.empty()) {
    r.depth_mae_mm = r.depth_max_mm = r.depth_mean_relative = 0.0;
    return;
  }
  double sum = 0.0, mx = 0.0;
  for (double e : err) sum += e, mx = std::max(mx, e);
  r.depth_mae_mm = sum / static_cast<double>(err.size());
  r.depth_max_mm = mx;
  r.depth_mean_relative = rel / static_cast<double>(err.size());
  const double top = mx > 0.0 ? mx : 1.0;
  const double w = top / o.histogram_bins;
  std::vector<std::size_t> count(static_cast<std::size_t>(o.histogram_bins), 0);
  for (double e : err) ++count[std::min<std::size_t>(static_cast<std::size_t>(e / w), count.size() - 1)];
  for (std::size_t b = 0; b < count.size(); ++b) r.depth_histogram.emplace_back(w * static_cast<double>(b + 1), count[b]);
}

/// Agreement of depth maps estimated under different patterns of a static
/// scene, over pixels valid in every map.
inline void evaluate_pattern_consistency(EvalReport& r, const std::vector<DepthMap>& per_pattern) {
  r.pattern_deviation_mm.assign(per_pattern.size(), 0.0);
  r.consistency_pixels = 0;
  r.pattern_spread_mm = r.pattern_spread_relative = 0.0;
  if (per_pattern.size() < 2) return;
  const int W = per_pattern[0].width(), H = per_pattern[0].height();
  for (const auto& d : per_pattern) detail::require_same_size(d.width(), d.height(), W, H, "per-pattern depth");
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      bool all = true;
      double lo = 1e300, hi = -1e300, mean = 0.0;
      for (const auto& d : per_pattern) {
        if (!d.is_valid(x, y)) {
          all = false;
          break;
        }
        lo = std::min<double>(lo, d.z(x, y));
        hi = std::max<double>(hi, d.z(x, y));
        mean += d.z(x, y);
      }
      if (!all) continue;
      mean /= static_cast<double>(per_pattern.size());
      ++r.consistency_pixels;
      r.pattern_spread_mm += 1000.0 * (hi - lo);
      r.pattern_spread_relative += (hi - lo) / mean;
      for (std::size_t i = 0; i < per_pattern.size(); ++i)
        r.pattern_deviation_mm[i] += 1000.0 * std::abs(per_pattern[i].z(x, y) - mean);
    }
  if (r.consistency_pixels == 0) return;
  const double n = static_cast<double>(r.consistency_pixels);
  r.pattern_spread_mm /= n;
  r.pattern_spread_relative /= n;
  for (double& v : r.pattern_deviation_mm) v /= n;
}

/// Spectral metrics plus, when both depth maps are given, depth errors.
inline EvalReport evaluate(const HyperspectralCube& recon, const HyperspectralCube& truth,
                           const DepthMap* recon_depth = nullptr, const DepthMap* truth_depth = nullptr,
                           const EvalOptions& o = {}) {
  EvalReport r;
  evaluate_spectra(r, recon, truth, o);
  if (recon_depth && truth_depth) evaluate_depth(r, *recon_depth, *truth_depth, o);
  return r;
}

}  // namespace ddsl::eval
