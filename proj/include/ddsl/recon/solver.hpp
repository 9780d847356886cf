#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ddsl/core/error.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/recon/system.hpp"

namespace ddsl::recon {

namespace detail {

/// Projected Adam on a smooth objective; `grad(H, g)` fills g. H >= 0 after
/// every step.
template <typename Grad>
void adam(Eigen::VectorXd& H, int iterations, double lr, int decay_every, double decay, Grad&& grad) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const Eigen::Index n = H.size();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n), g(n);
  double p1 = 1.0, p2 = 1.0;
  for (int it = 1; it <= iterations; ++it) {
    if (it > 1 && (it - 1) % decay_every == 0) lr *= decay;
    grad(H, g);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    p1 *= b1;
    p2 *= b2;
    for (Eigen::Index k = 0; k < n; ++k)
      H(k) = std::max(0.0, H(k) - lr * (m(k) / (1.0 - p1)) / (std::sqrt(v(k) / (1.0 - p2)) + eps));
  }
}

/// Normal-equation form of the per-pixel smooth terms:
/// f(H) = H'AH - 2b'H + c with A = L'WL + kappa D'D.
struct Quadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;
};

inline Quadratic quadratic(const Eigen::MatrixXd& L, const Eigen::VectorXd& I, const Eigen::VectorXd& w,
                           double kappa_lambda) {
  const Eigen::Index N = L.cols();
  Quadratic q;
  q.A = L.transpose() * w.asDiagonal() * L;
  for (Eigen::Index j = 0; j + 1 < N; ++j) {
    q.A(j, j) += kappa_lambda;
    q.A(j + 1, j + 1) += kappa_lambda;
    q.A(j, j + 1) -= kappa_lambda;
    q.A(j + 1, j) -= kappa_lambda;
  }
  q.b = L.transpose() * w.asDiagonal() * I;
  q.c = I.dot(w.asDiagonal() * I);
  return q;
}

/// Best nonnegative constant spectrum for the data term.
inline Eigen::VectorXd constant_fit(const Eigen::MatrixXd& L, const Eigen::VectorXd& I, const Eigen::VectorXd& w) {
  const Eigen::VectorXd u = L.rowwise().sum();
  const double den = u.dot(w.asDiagonal() * u);
  const double c = den > 0.0 ? std::max(0.0, u.dot(w.asDiagonal() * I) / den) : 0.0;
  return Eigen::VectorXd::Constant(L.cols(), c);
}

inline double spectral_energy(const Eigen::VectorXd& H) {
  double s = 0.0;
  for (Eigen::Index j = 0; j + 1 < H.size(); ++j) s += (H(j + 1) - H(j)) * (H(j + 1) - H(j));
  return s;
}

}  // namespace detail

struct PixelSolution {
  Eigen::VectorXd H;
  double residual = 0.0;   // ||W (L H - I)||
  double objective = 0.0;  // data + spectral terms
};

/// Pixel objective ||W (L H - I)||^2 + kappa_lambda ||grad_lambda H||^2, with
/// W = diag(weights) (1 = usable row). Empty weights mean all rows count.
inline double pixel_objective(const Eigen::MatrixXd& L, const Eigen::VectorXd& I, const Eigen::VectorXd& H,
                              double kappa_lambda, const Eigen::VectorXd& weights = {}) {
  const Eigen::VectorXd r = L * H - I;
  const double data = weights.size() == 0 ? r.squaredNorm() : r.dot(weights.asDiagonal() * r);
  return data + kappa_lambda * detail::spectral_energy(H);
}

/// Minimises the pixel objective over H >= 0 by projected Adam from the best
/// constant spectrum.
inline PixelSolution solve_pixelwise(const Eigen::VectorXd& I, const Eigen::MatrixXd& L, const SolverConfig& config,
                                     const Eigen::VectorXd& weights = {}) {
  config.validate();
  if (I.size() != L.rows()) throw ParamError("intensity vector and system matrix disagree in length");
  if (!L.allFinite() || !I.allFinite()) throw SolverError("non-finite system matrix or intensities");
  const Eigen::VectorXd w = weights.size() == 0 ? Eigen::VectorXd::Ones(I.size()) : weights;
  if (w.size() != I.size()) throw ParamError("row weights disagree with the intensity vector");
  const detail::Quadratic q = detail::quadratic(L, I, w, config.kappa_lambda);
  PixelSolution s;
  s.H = detail::constant_fit(L, I, w);
  detail::adam(s.H, config.iterations, config.step, config.decay_every, config.decay,
               [&](const Eigen::VectorXd& H, Eigen::VectorXd& g) { g.noalias() = 2.0 * (q.A * H - q.b); });
  const Eigen::VectorXd r = L * s.H - I;
  s.residual = std::sqrt(r.dot(w.asDiagonal() * r));
  s.objective = pixel_objective(L, I, s.H, config.kappa_lambda, w);
  if (!std::isfinite(s.objective) || !s.H.allFinite()) throw SolverError("pixel objective is not finite");
  return s;
}

/// Joint problem over an image:
///   sum_p ||W_p (L_p H_p - I_p)||^2 + kappa_lambda ||grad_lambda H_p||^2
///   + kappa_xy sum_j (|grad_x H_j|_1 + |grad_y H_j|_1).
/// Pixels without data carry only the regularizers.
class ImageProblem {
 public:
  ImageProblem(int width, int height, std::size_t bands, double kappa_lambda, double kappa_xy)
      : W_(width), H_(height), N_(bands), kl_(kappa_lambda), kxy_(kappa_xy), pixels_(std::size_t(width) * height) {
    if (width < 1 || height < 1 || bands < 1) throw ParamError("image problem needs a non-empty grid");
    if (!(kappa_lambda >= 0.0) || !(kappa_xy >= 0.0)) throw ParamError("regularization weights must be >= 0");
  }

  int width() const noexcept { return W_; }
  int height() const noexcept { return H_; }
  std::size_t bands() const noexcept { return N_; }
  std::size_t size() const noexcept { return pixels_.size() * N_; }
  double kappa_lambda() const noexcept { return kl_; }
  double kappa_xy() const noexcept { return kxy_; }

  /// Attaches data to pixel (x, y). Rows with zero weight are ignored.
  void set_data(int x, int y, Eigen::MatrixXd L, Eigen::VectorXd I, Eigen::VectorXd weights) {
    if (L.cols() != static_cast<Eigen::Index>(N_) || L.rows() != I.size() || weights.size() != I.size())
      throw ParamError("pixel data has inconsistent sizes");
    if (!L.allFinite() || !I.allFinite()) throw SolverError("non-finite pixel data");
    Pixel& p = pixels_[index(x, y)];
    p.q = detail::quadratic(L, I, weights, kl_);
    p.L = std::move(L);
    p.I = std::move(I);
    p.w = std::move(weights);
    p.has_data = true;
  }

  bool has_data(int x, int y) const noexcept { return pixels_[index(x, y)].has_data; }
  const Eigen::MatrixXd& matrix(int x, int y) const { return pixels_[index(x, y)].L; }
  const Eigen::VectorXd& intensities(int x, int y) const { return pixels_[index(x, y)].I; }
  const Eigen::VectorXd& weights(int x, int y) const { return pixels_[index(x, y)].w; }

  /// H is pixel-major: H[(y W + x) N + j].
  double objective(const std::vector<double>& H) const {
    check(H);
    double f = 0.0;
    for (int y = 0; y < H_; ++y)
      for (int x = 0; x < W_; ++x) f += pixel_terms(H, x, y) + tv_terms(H, x, y);
    return f;
  }

  std::vector<double> gradient(const std::vector<double>& H) const {
    check(H);
    std::vector<double> g(H.size(), 0.0);
    for (int y = 0; y < H_; ++y)
      for (int x = 0; x < W_; ++x) {
        Eigen::Map<Eigen::VectorXd> gp(&g[index(x, y) * N_], static_cast<Eigen::Index>(N_));
        gp += pixel_gradient(H, x, y);
        add_tv_gradient(H, x, y, gp);
      }
    return g;
  }

  /// Data + spectral terms of one pixel (its smooth part).
  double pixel_terms(const std::vector<double>& H, int x, int y) const {
    const Pixel& p = pixels_[index(x, y)];
    const Eigen::Map<const Eigen::VectorXd> h(&H[index(x, y) * N_], static_cast<Eigen::Index>(N_));
    if (p.has_data) return pixel_objective(p.L, p.I, h, kl_, p.w);
    return kl_ * detail::spectral_energy(h);
  }

  Eigen::VectorXd pixel_gradient(const std::vector<double>& H, int x, int y) const {
    const Pixel& p = pixels_[index(x, y)];
    const Eigen::Map<const Eigen::VectorXd> h(&H[index(x, y) * N_], static_cast<Eigen::Index>(N_));
    if (p.has_data) return 2.0 * (p.q.A * h - p.q.b);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N_));
    for (std::size_t j = 0; j + 1 < N_; ++j) {
      const double d = 2.0 * kl_ * (h(j + 1) - h(j));
      g(j) -= d;
      g(j + 1) += d;
    }
    return g;
  }

  /// TV terms on the edges to the right and below (x, y).
  double tv_terms(const std::vector<double>& H, int x, int y) const {
    if (kxy_ == 0.0) return 0.0;
    double f = 0.0;
    const std::size_t a = index(x, y) * N_;
    for (std::size_t j = 0; j < N_; ++j) {
      if (x + 1 < W_) f += std::abs(H[index(x + 1, y) * N_ + j] - H[a + j]);
      if (y + 1 < H_) f += std::abs(H[index(x, y + 1) * N_ + j] - H[a + j]);
    }
    return kxy_ * f;
  }

  /// Subgradient of every TV term touching (x, y) with respect to H at (x, y);
  /// sign(0) = 0.
  template <typename Vec>
  void add_tv_gradient(const std::vector<double>& H, int x, int y, Vec& g) const {
    if (kxy_ == 0.0) return;
    const std::size_t a = index(x, y) * N_;
    auto sgn = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
    const int nx[4] = {x + 1, x - 1, x, x}, ny[4] = {y, y, y + 1, y - 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || nx[k] >= W_ || ny[k] < 0 || ny[k] >= H_) continue;
      const std::size_t b = index(nx[k], ny[k]) * N_;
      for (std::size_t j = 0; j < N_; ++j) g(static_cast<Eigen::Index>(j)) += kxy_ * sgn(H[a + j] - H[b + j]);
    }
  }

  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * W_ + x; }

 private:
  struct Pixel {
    Eigen::MatrixXd L;
    Eigen::VectorXd I, w;
    detail::Quadratic q;
    bool has_data = false;
  };

  void check(const std::vector<double>& H) const {
    if (H.size() != size()) throw ParamError("variable vector does not match the image problem");
  }

  int W_, H_;
  std::size_t N_;
  double kl_, kxy_;
  std::vector<Pixel> pixels_;
};

struct ImageSolution {
  std::vector<double> H;                  // pixel-major
  std::vector<double> objective_history;  // after the per-pixel pass, then after each outer sweep
  int rejected_tiles = 0;                 // tile updates discarded for not lowering the objective
};

namespace detail {

inline double tv_edge(const ImageProblem& P, const std::vector<double>& H, int xa, int ya, int xb, int yb) {
  double f = 0.0;
  const std::size_t a = P.index(xa, ya) * P.bands(), b = P.index(xb, yb) * P.bands();
  for (std::size_t j = 0; j < P.bands(); ++j) f += std::abs(H[a + j] - H[b + j]);
  return P.kappa_xy() * f;
}

/// Objective restricted to the terms that involve pixels of one tile.
inline double tile_objective(const ImageProblem& P, const std::vector<double>& H, int x0, int y0, int x1, int y1) {
  double f = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      f += P.pixel_terms(H, x, y) + P.tv_terms(H, x, y);
      if (x == x0 && x > 0) f += tv_edge(P, H, x - 1, y, x, y);
      if (y == y0 && y > 0) f += tv_edge(P, H, x, y - 1, x, y);
    }
  return f;
}

}  // namespace detail

/// Joint solve. Every pixel with data is first solved on its own (exactly
/// solve_pixelwise); with kappa_xy > 0, red-black sweeps over tiles then
/// minimise the full objective. A tile update is kept only if it lowers the
/// terms it touches, and tiles of one colour share no terms, so the
/// objective never increases between sweeps.
inline ImageSolution solve_image(const ImageProblem& P, const SolverConfig& config) {
  config.validate();
  const int W = P.width(), Ht = P.height();
  const std::size_t N = P.bands();
  ImageSolution s;
  s.H.assign(P.size(), 0.0);
  parallel_for(0, Ht, [&](int y) {
    for (int x = 0; x < W; ++x) {
      if (!P.has_data(x, y)) continue;
      const PixelSolution ps = solve_pixelwise(P.intensities(x, y), P.matrix(x, y), config, P.weights(x, y));
      std::copy(ps.H.data(), ps.H.data() + N, s.H.begin() + static_cast<std::ptrdiff_t>(P.index(x, y) * N));
    }
  });
  s.objective_history.push_back(P.objective(s.H));
  if (!std::isfinite(s.objective_history.back())) throw SolverError("image objective is not finite");
  if (P.kappa_xy() == 0.0) return s;

  const int T = config.tile_size;
  const int tx_count = (W + T - 1) / T, ty_count = (Ht + T - 1) / T;
  std::vector<std::uint8_t> rejected(static_cast<std::size_t>(tx_count) * ty_count, 0);
  for (int outer = 0; outer < config.outer_iterations; ++outer) {
    for (int colour = 0; colour < 2; ++colour) {
      parallel_for(0, tx_count * ty_count, [&](int t) {
        const int tx = t % tx_count, ty = t / tx_count;
        if ((tx + ty) % 2 != colour) return;
        const int x0 = tx * T, y0 = ty * T, x1 = std::min(W, x0 + T), y1 = std::min(Ht, y0 + T);
        const double before = detail::tile_objective(P, s.H, x0, y0, x1, y1);
        // Tile variables in row-major pixel order.
        const Eigen::Index n = static_cast<Eigen::Index>((x1 - x0) * (y1 - y0) * N);
        Eigen::VectorXd v(n), old(n);
        auto gather = [&](Eigen::VectorXd& out) {
          Eigen::Index k = 0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
              for (std::size_t j = 0; j < N; ++j) out(k++) = s.H[P.index(x, y) * N + j];
        };
        auto scatter = [&](const Eigen::VectorXd& in) {
          Eigen::Index k = 0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
              for (std::size_t j = 0; j < N; ++j) s.H[P.index(x, y) * N + j] = in(k++);
        };
        gather(old);
        v = old;
        detail::adam(v, config.tile_iterations, config.tile_step, config.decay_every, config.decay,
                     [&](const Eigen::VectorXd& cur, Eigen::VectorXd& g) {
                       scatter(cur);
                       Eigen::Index k = 0;
                       for (int y = y0; y < y1; ++y)
                         for (int x = x0; x < x1; ++x) {
                           Eigen::VectorXd gp = P.pixel_gradient(s.H, x, y);
                           P.add_tv_gradient(s.H, x, y, gp);
                           g.segment(k, static_cast<Eigen::Index>(N)) = gp;
                           k += static_cast<Eigen::Index>(N);
                         }
                     });
        scatter(v);
        const double after = detail::tile_objective(P, s.H, x0, y0, x1, y1);
        if (!(after < before)) {
          scatter(old);
          rejected[static_cast<std::size_t>(t)] += 1;
        }
      });
    }
    s.objective_history.push_back(P.objective(s.H));
    if (!std::isfinite(s.objective_history.back())) throw SolverError("image objective is not finite");
  }
  for (auto r : rejected) s.rejected_tiles += r;
  return s;
}

}  // namespace ddsl::recon
