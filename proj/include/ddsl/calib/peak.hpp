#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ddsl/core/error.hpp"

namespace ddsl::calib {

/// Sub-pixel peak of a 1D intensity profile: the mean of a least-squares fit
/// of A exp(-(x - mu)^2 / (2 sigma^2)). `x` defaults to 0, 1, 2, ...
///
/// The profile must have at least five samples and one dominant mode: the
/// samples at or above half the maximum have to be contiguous.
inline double fit_gaussian_peak(std::span<const double> profile, std::span<const double> x = {}) {
  const std::size_t n = profile.size();
  if (n < 5) throw FitError("peak fit needs at least 5 samples");
  std::vector<double> xs(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = x.empty() ? static_cast<double>(i) : x[i];
  if (!x.empty() && x.size() != n) throw FitError("peak fit sample positions do not match the profile");

  const std::size_t k = static_cast<std::size_t>(std::max_element(profile.begin(), profile.end()) - profile.begin());
  const double peak = profile[k];
  const double floor = *std::min_element(profile.begin(), profile.end());
  if (!std::isfinite(peak) || !(peak > 0.0) || peak - floor <= 1e-12 * std::abs(peak))
    throw FitError("flat intensity profile");
  std::size_t lo = k, hi = k;
  while (lo > 0 && profile[lo - 1] >= 0.5 * peak) --lo;
  while (hi + 1 < n && profile[hi + 1] >= 0.5 * peak) ++hi;
  for (std::size_t i = 0; i < n; ++i)
    if ((i < lo || i > hi) && profile[i] >= 0.5 * peak) throw FitError("multimodal intensity profile");

  // Log-parabola through the peak and its neighbours.
  double mu = xs[k], sigma = 0.0;
  const double spacing = n > 1 ? std::abs(xs[std::min(k + 1, n - 1)] - xs[k > 0 ? k - 1 : 0]) / 2.0 : 1.0;
  if (k > 0 && k + 1 < n && profile[k - 1] > 0 && profile[k + 1] > 0) {
    const double a = std::log(profile[k - 1]), b = std::log(peak), c = std::log(profile[k + 1]);
    const double curv = a - 2 * b + c;
    if (curv < 0) {
      mu = xs[k] + 0.5 * (a - c) / curv * spacing;
      sigma = std::sqrt(-1.0 / curv) * spacing;
    }
  }
  if (!(sigma > 0.0)) sigma = std::max(spacing, 0.5 * (xs[hi] - xs[lo] + spacing));
  double A = peak;

  // Levenberg-Marquardt on (A, mu, sigma).
  auto residuals = [&](double a, double m, double s, Eigen::VectorXd& r) {
    r.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] = a * std::exp(-0.5 * std::pow((xs[i] - m) / s, 2)) - profile[i];
    return r.squaredNorm();
  };
  Eigen::VectorXd r;
  double cost = residuals(A, mu, sigma, r);
  double lambda = 1e-3;
  bool converged = false;
  for (int it = 0; it < 200 && !converged; ++it) {
    Eigen::MatrixXd J(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (xs[i] - mu) / sigma;
      const double e = std::exp(-0.5 * u * u);
      const auto row = static_cast<Eigen::Index>(i);
      J(row, 0) = e;
      J(row, 1) = A * e * u / sigma;
      J(row, 2) = A * e * u * u / sigma;
    }
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 20 && !improved; ++tries) {
      Eigen::Matrix3d Aug = JtJ;
      Aug.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
      const Eigen::Vector3d step = Aug.ldlt().solve(-g);
      const double nA = A + step[0], nm = mu + step[1], ns = sigma + step[2];
      Eigen::VectorXd nr;
      if (ns > 0 && std::isfinite(nm)) {
        const double ncost = residuals(nA, nm, ns, nr);
        if (ncost < cost) {
          const double rel = (cost - ncost) / std::max(cost, 1e-300);
          A = nA, mu = nm, sigma = ns, r = nr, cost = ncost;
          lambda = std::max(lambda * 0.3, 1e-12);
          improved = true;
          converged = rel < 1e-15 || step.norm() < 1e-13;
        }
      }
      if (!improved) lambda *= 10.0;
    }
    if (!improved) break;
  }
  if (!std::isfinite(mu) || mu < xs.front() - spacing || mu > xs.back() + spacing)
    throw FitError("peak fit did not converge inside the profile");
  return mu;
}

}  // namespace ddsl::calib
