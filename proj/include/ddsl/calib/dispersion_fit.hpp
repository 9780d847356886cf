#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <tuple>
#include <vector>

#include "ddsl/calib/peak.hpp"
#include "ddsl/core/error.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/optics/dispersion.hpp"
#include "ddsl/calib/captures.hpp"

namespace ddsl::calib {

/// One observation: camera pixel (px, py) at depth z sees band `band` from
/// projector column q.
struct DispersionSample {
  double px = 0, py = 0, z = 0;
  std::size_t band = 0;
  double q = 0;
};

struct PowerLawFit {
  PowerLaw law;
  double rms = 0;  // projector columns
};

namespace detail {

inline double power_law_cost(const PowerLaw& m, std::span<const double> z, std::span<const double> q,
                             Eigen::VectorXd* r = nullptr) {
  double cost = 0;
  if (r) r->resize(static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double e = m(z[i]) - q[i];
    if (r) (*r)[static_cast<Eigen::Index>(i)] = e;
    cost += e * e;
  }
  return std::isfinite(cost) ? cost : HUGE_VAL;
}

inline PowerLaw refine_power_law(PowerLaw m, std::span<const double> z, std::span<const double> q) {
  const auto n = static_cast<Eigen::Index>(z.size());
  Eigen::VectorXd r;
  double cost = power_law_cost(m, z, q, &r);
  double lambda = 1e-3;
  for (int it = 0; it < 500; ++it) {
    Eigen::MatrixXd J(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zb = std::pow(z[i], m.beta);
      J(i, 0) = zb;
      J(i, 1) = m.alpha * zb * std::log(z[i]);
      J(i, 2) = 1.0;
    }
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    bool improved = false, converged = false;
    for (int tries = 0; tries < 30 && !improved; ++tries) {
      Eigen::Matrix3d A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-30);
      const Eigen::Vector3d step = A.colPivHouseholderQr().solve(-g);
      const PowerLaw trial{m.alpha + step[0], m.beta + step[1], m.gamma + step[2]};
      Eigen::VectorXd tr;
      const double tc = power_law_cost(trial, z, q, &tr);
      if (tc < cost) {
        converged = (cost - tc) <= 1e-30 + 1e-28 * cost;
        m = trial, r = tr, cost = tc;
        lambda = std::max(lambda * 0.2, 1e-15);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved || converged || cost == 0.0) break;
  }
  return m;
}

}  // namespace detail

/// Least-squares fit of q = alpha z^beta + gamma. Initialised in log space
/// with gamma0 just outside the sample range (both sides are tried), then
/// refined by Levenberg-Marquardt.
inline PowerLawFit fit_power_law(std::span<const double> z, std::span<const double> q) {
  if (z.size() != q.size()) throw FitError("depth and column samples differ in count");
  std::vector<double> distinct(z.begin(), z.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end(),
                             [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
                 distinct.end());
  if (distinct.size() < 3) throw FitError("power-law fit needs at least 3 distinct depths");
  for (double v : z)
    if (!(v > 0.0) || !std::isfinite(v)) throw FitError("power-law fit needs positive finite depths");
  const auto [qlo_it, qhi_it] = std::minmax_element(q.begin(), q.end());
  const double range = *qhi_it - *qlo_it;
  if (!(range > 0.0) || !std::isfinite(range)) throw FitError("power-law fit: columns do not vary with depth");

  PowerLawFit best;
  double best_cost = HUGE_VAL;
  for (int sign : {+1, -1}) {
    const double g0 = sign > 0 ? *qlo_it - 0.05 * range : *qhi_it + 0.05 * range;
    // Linear regression of log|q - g0| on log z.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double lx = std::log(z[i]), ly = std::log(std::abs(q[i] - g0));
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    }
    const double beta0 = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double alpha0 = sign * std::exp((sy - beta0 * sx) / n);
    const PowerLaw m = detail::refine_power_law({alpha0, beta0, g0}, z, q);
    const double c = detail::power_law_cost(m, z, q);
    if (c < best_cost) {
      best_cost = c;
      best.law = m;
    }
  }
  if (!std::isfinite(best_cost)) throw FitError("power-law fit diverged");
  best.rms = std::sqrt(best_cost / static_cast<double>(z.size()));
  return best;
}

struct DispersionFit {
  DispersionModel model;
  double rms = 0;           // over all samples, projector columns
  double max_site_rms = 0;  // worst lattice site
  std::size_t samples = 0;
};

/// Fits one power law per (band, lattice site). Every sample must sit on a
/// lattice pixel; every (band, site) needs at least 3 distinct depths.
inline DispersionFit fit_dispersion(const std::vector<DispersionSample>& samples, const WavelengthGrid& grid,
                                    const std::vector<double>& site_x, const std::vector<double>& site_y) {
  if (site_x.empty() || site_y.empty()) throw FitError("empty dispersion lattice");
  auto locate = [](const std::vector<double>& sites, double v) -> std::size_t {
    for (std::size_t i = 0; i < sites.size(); ++i)
      if (std::abs(sites[i] - v) < 1e-6) return i;
    throw FitError("dispersion sample is not on a lattice pixel");
  };
  const std::size_t S = site_x.size() * site_y.size();
  std::vector<std::vector<double>> zs(grid.size() * S), qs(grid.size() * S);
  double zmin = HUGE_VAL, zmax = 0;
  for (const auto& s : samples) {
    if (s.band >= grid.size()) throw FitError("dispersion sample band outside the grid");
    const std::size_t cell = s.band * S + locate(site_y, s.py) * site_x.size() + locate(site_x, s.px);
    zs[cell].push_back(s.z);
    qs[cell].push_back(s.q);
    zmin = std::min(zmin, s.z);
    zmax = std::max(zmax, s.z);
  }
  std::vector<PowerLawFit> fits(grid.size() * S);
  parallel_for(0, static_cast<int>(fits.size()), [&](int c) { fits[c] = fit_power_law(zs[c], qs[c]); });

  DispersionFit out;
  std::vector<PowerLaw> coeffs;
  double sse = 0;
  for (std::size_t c = 0; c < fits.size(); ++c) {
    coeffs.push_back(fits[c].law);
    sse += fits[c].rms * fits[c].rms * static_cast<double>(zs[c].size());
    out.max_site_rms = std::max(out.max_site_rms, fits[c].rms);
  }
  out.samples = samples.size();
  out.rms = std::sqrt(sse / static_cast<double>(samples.size()));
  out.model = DispersionModel(grid, site_x, site_y, std::move(coeffs), zmin, zmax);
  return out;
}

/// Dispersion samples from scanline captures: the Gaussian-fitted peak of
/// each lattice profile, within a window around its brightest scanline.
/// Profiles without a usable peak yield no sample.
inline std::vector<DispersionSample> extract_dispersion_samples(const ScanlineCaptureSet& set,
                                                                int half_window = 8) {
  std::vector<DispersionSample> out;
  const std::size_t K = set.scans();
  for (std::size_t d = 0; d < set.depths.size(); ++d)
    for (std::size_t j = 0; j < set.grid.size(); ++j)
      for (std::size_t s = 0; s < set.sites(); ++s) {
        const auto prof = set.profile(d, j, s);
        const std::size_t k = static_cast<std::size_t>(std::max_element(prof.begin(), prof.end()) - prof.begin());
        const std::size_t lo = k > static_cast<std::size_t>(half_window) ? k - half_window : 0;
        const std::size_t hi = std::min(K, k + half_window + 1);
        std::vector<double> v(prof.begin() + lo, prof.begin() + hi), x;
        for (std::size_t i = lo; i < hi; ++i) x.push_back(set.scan_columns[i]);
        try {
          DispersionSample smp;
          smp.q = fit_gaussian_peak(v, x);
          smp.px = set.site_x[s % set.site_x.size()];
          smp.py = set.site_y[s / set.site_x.size()];
          smp.z = set.site_depth[d * set.sites() + s];
          smp.band = j;
          out.push_back(smp);
        } catch (const FitError&) {
        }
      }
  return out;
}

}  // namespace ddsl::calib
