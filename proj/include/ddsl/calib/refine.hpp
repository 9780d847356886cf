#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "ddsl/calib/captures.hpp"
#include "ddsl/core/error.hpp"
#include "ddsl/optics/bundle.hpp"

namespace ddsl::calib {

struct RefinementConfig {
  double w = 0.008;        // smoothness weight, >= 0
  int iterations = 20000;  // trial steps, accepted or not
  double step = 1e-3;      // initial step in scaled variables
  bool projector_blur = true;
  int blur_size = 7;
  double blur_sigma = 3.0;

  void validate() const {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParamError("smoothness weight must be finite and >= 0");
    if (iterations < 1) throw ParamError("iteration budget must be positive");
    if (!(step > 0.0)) throw ParamError("step size must be positive");
  }
};

struct RefineResult {
  RadiometricTables tables;
  double initial_misfit = 0, final_misfit = 0;  // data term only
  double initial_objective = 0, final_objective = 0;
  std::vector<double> objective_history;  // one entry per accepted iterate
  int iterations = 0;
  bool converged = false;
};

/// Data term plus smoothness of the camera response and projector emission.
/// White scanlines light all projector channels, so the data only see the
/// white emission S_j = sum_c proj[c][j]:
///   I[p,k,c] = sum_j cam[c][j] S_j g[p,k,j],  g = H(p,j) eta_j line_k(q_j) / d^2.
/// The objective is unit-free: residuals are divided by the brightest
/// measurement, and each curve's band differences by that curve's peak in
/// `reference`. The weight w then means the same at any exposure.
class RefinementProblem {
 public:
  RefinementProblem(const CalibrationBundle& geometry, const RefinementCaptures& cap, const RefinementConfig& cfg,
                    const RadiometricTables& reference)
      : N_(geometry.tables.bands()), K_(cap.scans()), P_(cap.points.size()), w_(cfg.w), measured_(cap.intensities) {
    if (P_ < 21) throw ParamError("refinement needs at least 21 calibration points");
    if (K_ == 0) throw ParamError("refinement needs scanline captures");
    if (measured_.size() != P_ * K_ * 3) throw ParamError("capture intensities do not match points and scanlines");
    const RadiometricTables& t = geometry.tables;
    double peak = 0.0;
    for (double v : measured_) peak = std::max(peak, std::abs(v));
    data_scale_ = peak > 0.0 && std::isfinite(peak) ? 1.0 / (peak * peak) : 1.0;
    for (int c = 0; c < 3; ++c) {
      const double mc = *std::max_element(reference.cam[c].begin(), reference.cam[c].end());
      const double mp = *std::max_element(reference.proj[c].begin(), reference.proj[c].end());
      cam_scale_[c] = mc > 0.0 ? 1.0 / (mc * mc) : 1.0;
      proj_scale_[c] = mp > 0.0 ? 1.0 / (mp * mp) : 1.0;
    }
    const std::vector<double> kernel =
        cfg.projector_blur ? gaussian_kernel(cfg.blur_size, cfg.blur_sigma) : std::vector<double>{};
    g_.assign(P_ * K_ * N_, 0.0);
    std::vector<ProjectedLight> lines;
    for (int col : cap.scan_columns) {
      if (col < 0 || col >= geometry.projector.width) throw ParamError("scanline column outside the projector");
      std::vector<float> cols(geometry.projector.width, 0.0f);
      cols[col] = 1.0f;
      lines.emplace_back(cols, geometry.projector.height, kernel);
    }
    for (std::size_t p = 0; p < P_; ++p) {
      const CalibrationPoint& pt = cap.points[p];
      if (pt.reflectance.size() != N_) throw GridError("calibration reflectance does not match the grid");
      const Eigen::Vector3d X = geometry.left.unproject(pt.x, pt.y, pt.z);
      double depth = 0.0;
      const Eigen::Vector2d qg = geometry.projector.project(X, &depth);
      if (!(depth > 0.0)) throw ProjectionError("calibration point behind the projector");
      const double d2 = (X - geometry.projector.center()).squaredNorm();
      for (std::size_t j = 0; j < N_; ++j) {
        const double q = geometry.dispersion.at_band(pt.x, pt.y, pt.z, j).q;
        const double a = pt.reflectance[j] * t.eta[j] / d2;
        for (std::size_t k = 0; k < K_; ++k) g_[(p * K_ + k) * N_ + j] = a * lines[k].channel(0, q, qg.y());
      }
    }
  }

  std::size_t bands() const noexcept { return N_; }

  /// Data term in measurement units squared.
  double misfit(const RadiometricTables& t) const {
    double f = 0.0;
    std::vector<double> S = white(t);
    for (std::size_t pk = 0; pk < P_ * K_; ++pk) {
      const double* g = &g_[pk * N_];
      for (int c = 0; c < 3; ++c) {
        double pred = 0.0;
        for (std::size_t j = 0; j < N_; ++j) pred += t.cam[c][j] * S[j] * g[j];
        const double r = pred - measured_[pk * 3 + c];
        f += r * r;
      }
    }
    return f;
  }

  double smoothness(const RadiometricTables& t) const {
    double s = 0.0;
    for (int c = 0; c < 3; ++c)
      for (std::size_t j = 0; j + 1 < N_; ++j) {
        s += cam_scale_[c] * std::pow(t.cam[c][j + 1] - t.cam[c][j], 2);
        s += proj_scale_[c] * std::pow(t.proj[c][j + 1] - t.proj[c][j], 2);
      }
    return s;
  }

  double objective(const RadiometricTables& t) const { return data_scale_ * misfit(t) + w_ * smoothness(t); }

  /// Gradient with respect to cam[c][j] (dcam) and proj[c][j] (dproj).
  double gradient(const RadiometricTables& t, std::array<std::vector<double>, 3>& dcam,
                  std::array<std::vector<double>, 3>& dproj) const {
    const std::vector<double> S = white(t);
    std::vector<double> dS(N_, 0.0);
    for (int c = 0; c < 3; ++c) dcam[c].assign(N_, 0.0), dproj[c].assign(N_, 0.0);
    double f = 0.0;
    for (std::size_t pk = 0; pk < P_ * K_; ++pk) {
      const double* g = &g_[pk * N_];
      for (int c = 0; c < 3; ++c) {
        double pred = 0.0;
        for (std::size_t j = 0; j < N_; ++j) pred += t.cam[c][j] * S[j] * g[j];
        const double r = pred - measured_[pk * 3 + c];
        f += r * r;
        if (r == 0.0) continue;
        const double rs = 2.0 * data_scale_ * r;
        for (std::size_t j = 0; j < N_; ++j) {
          dcam[c][j] += rs * S[j] * g[j];
          dS[j] += rs * t.cam[c][j] * g[j];
        }
      }
    }
    for (int c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < N_; ++j) dproj[c][j] = dS[j];
      for (std::size_t j = 0; j + 1 < N_; ++j) {
        const double dc = 2.0 * w_ * cam_scale_[c] * (t.cam[c][j + 1] - t.cam[c][j]);
        dcam[c][j + 1] += dc, dcam[c][j] -= dc;
        const double dp = 2.0 * w_ * proj_scale_[c] * (t.proj[c][j + 1] - t.proj[c][j]);
        dproj[c][j + 1] += dp, dproj[c][j] -= dp;
      }
    }
    return data_scale_ * f + w_ * smoothness(t);
  }

  /// Objective value below which the data are matched to rounding.
  double rounding_floor() const noexcept { return 1e-24 * static_cast<double>(measured_.size()); }

 private:
  std::vector<double> white(const RadiometricTables& t) const {
    std::vector<double> S(N_);
    for (std::size_t j = 0; j < N_; ++j) S[j] = t.white_emission(j);
    return S;
  }

  std::size_t N_, K_, P_;
  double w_;
  double data_scale_ = 1.0;
  std::array<double, 3> cam_scale_{1, 1, 1}, proj_scale_{1, 1, 1};
  std::vector<double> measured_;
  std::vector<double> g_;  // [(p * K + k) * N + j]
};

/// Projected gradient descent with backtracking on scaled variables (each
/// curve divided by its initial peak). A trial step that
/// does not lower the objective halves the step; an accepted one grows it.
/// Fifty consecutive rejected trials stop the solve: as converged when the
/// predicted decrease is below rounding, otherwise as divergence.
inline RefineResult refine_responses(const RadiometricTables& initial, const CalibrationBundle& geometry,
                                     const RefinementCaptures& captures, const RefinementConfig& cfg = {}) {
  cfg.validate();
  initial.validate();
  if (initial.grid != geometry.tables.grid) throw GridError("initial tables and rig use different grids");
  CalibrationBundle rig = geometry;
  rig.tables.eta = initial.eta;
  const RefinementProblem problem(rig, captures, cfg, initial);
  const std::size_t N = problem.bands();

  // Scale: each curve's peak.
  std::array<std::vector<double>, 3> scam, sproj;
  for (int c = 0; c < 3; ++c) {
    const double mc = std::max(*std::max_element(initial.cam[c].begin(), initial.cam[c].end()), 1e-12);
    const double mp = std::max(*std::max_element(initial.proj[c].begin(), initial.proj[c].end()), 1e-12);
    scam[c].resize(N), sproj[c].resize(N);
    for (std::size_t j = 0; j < N; ++j) {
      scam[c][j] = mc;
      sproj[c][j] = mp;
    }
  }

  RefineResult res{initial};
  RadiometricTables& cur = res.tables;
  std::array<std::vector<double>, 3> dcam, dproj;
  double f = problem.gradient(cur, dcam, dproj);
  res.initial_misfit = problem.misfit(cur);
  res.initial_objective = f;
  res.objective_history.push_back(f);
  double step = cfg.step;
  int failures = 0;
  RadiometricTables trial = cur;
  for (int it = 0; it < cfg.iterations; ++it) {
    res.iterations = it + 1;
    // Scaled gradient norm squared: the decrease a unit step would promise.
    double gnorm2 = 0.0;
    for (int c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < N; ++j)
        gnorm2 += std::pow(dcam[c][j] * scam[c][j], 2) + std::pow(dproj[c][j] * sproj[c][j], 2);
    if (std::isfinite(f) && (gnorm2 == 0.0 || f <= problem.rounding_floor())) {
      res.converged = true;
      break;
    }
    for (int c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < N; ++j) {
        trial.cam[c][j] = std::max(0.0, cur.cam[c][j] - step * scam[c][j] * scam[c][j] * dcam[c][j]);
        trial.proj[c][j] = std::max(0.0, cur.proj[c][j] - step * sproj[c][j] * sproj[c][j] * dproj[c][j]);
      }
    const double ft = problem.objective(trial);
    if (std::isfinite(ft) && ft < f) {
      std::swap(cur, trial);
      f = problem.gradient(cur, dcam, dproj);
      res.objective_history.push_back(f);
      step *= 1.5;
      failures = 0;
      continue;
    }
    step *= 0.5;
    if (++failures >= 50) {
      if (std::isfinite(f) && step * gnorm2 <= 1e-15 * std::max(f, 1e-300)) {
        res.converged = true;
        break;
      }
      throw OptimError("radiometric refinement diverged: 50 consecutive rejected steps");
    }
  }
  res.final_objective = f;
  res.final_misfit = problem.misfit(cur);
  return res;
}

}  // namespace ddsl::calib
