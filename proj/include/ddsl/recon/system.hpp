#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddsl/core/error.hpp"
#include "ddsl/core/image.hpp"
#include "ddsl/flow/align.hpp"
#include "ddsl/optics/bundle.hpp"
#include "ddsl/patterns.hpp"

namespace ddsl::recon {

/// Solver and system-matrix settings. JSON keys are the field names.
struct SolverConfig {
  double kappa_lambda = 3.0;   // spectral smoothness weight
  double kappa_xy = 0.05;      // spatial total-variation weight
  int iterations = 1000;       // Adam iterations per pixel
  double step = 0.05;          // Adam learning rate
  int decay_every = 400;       // halve the learning rate every this many iterations
  double decay = 0.5;
  bool blur = true;            // column blur G applied to the pattern light
  int blur_size = 7;
  double blur_sigma = 3.0;
  double max_flagged_fraction = 0.0;  // pixels with a larger share of unusable rows are skipped
  int tile_size = 16;          // joint solve tile edge, pixels
  int outer_iterations = 3;    // red-black tile sweeps of the joint solve
  int tile_iterations = 200;   // Adam iterations per tile visit
  double tile_step = 0.01;     // Adam learning rate inside tiles

  void validate() const {
    if (!(kappa_lambda >= 0.0) || !(kappa_xy >= 0.0) || !std::isfinite(kappa_lambda) || !std::isfinite(kappa_xy))
      throw ParamError("regularization weights must be finite and >= 0");
    if (iterations < 1 || tile_iterations < 1 || outer_iterations < 0) throw ParamError("iteration counts must be >= 1");
    if (!(step > 0.0) || !(tile_step > 0.0)) throw ParamError("learning rates must be positive");
    if (decay_every < 1 || !(decay > 0.0 && decay <= 1.0)) throw ParamError("decay must lie in (0, 1]");
    if (blur && (blur_size < 1 || blur_size % 2 == 0 || !(blur_sigma > 0.0)))
      throw ParamError("blur kernel needs an odd size and positive sigma");
    if (!(max_flagged_fraction >= 0.0 && max_flagged_fraction <= 1.0))
      throw ParamError("max_flagged_fraction must lie in [0, 1]");
    if (tile_size < 2) throw ParamError("tile_size must be >= 2");
  }

  /// Key, meaning; used by the CLI help.
  static std::vector<std::pair<std::string, std::string>> documentation() {
    return {{"kappa_lambda", "spectral smoothness weight (default 3)"},
            {"kappa_xy", "spatial total-variation weight; 0 gives the per-pixel solve (default 0.05)"},
            {"iterations", "Adam iterations per pixel (default 1000)"},
            {"step", "Adam learning rate (default 0.05)"},
            {"decay_every", "iterations between learning-rate decays (default 400)"},
            {"decay", "learning-rate factor per decay (default 0.5)"},
            {"blur", "apply the column Gaussian to the pattern light (default true)"},
            {"blur_size", "blur taps, odd (default 7)"},
            {"blur_sigma", "blur sigma in projector columns (default 3)"},
            {"max_flagged_fraction", "skip pixels with a larger share of unusable rows (default 0)"},
            {"tile_size", "joint-solve tile edge in pixels (default 16)"},
            {"outer_iterations", "red-black tile sweeps of the joint solve (default 3)"},
            {"tile_iterations", "Adam iterations per tile visit (default 200)"},
            {"tile_step", "Adam learning rate inside tiles (default 0.01)"}};
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SolverConfig, kappa_lambda, kappa_xy, iterations, step, decay_every,
                                                decay, blur, blur_size, blur_sigma, max_flagged_fraction, tile_size,
                                                outer_iterations, tile_iterations, tile_step)

/// Reads a config, rejecting unknown keys so typos do not pass silently.
inline SolverConfig solver_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("solver config must be a JSON object");
  const nlohmann::json known = SolverConfig{};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key())) throw FormatError("unknown solver config key: " + it.key());
  SolverConfig c;
  try {
    c = j.get<SolverConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("solver config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Identifier of a pattern set, recorded in matrix provenance.
inline std::string pattern_set_id(const PatternParams& p) {
  return "offset" + std::to_string(p.line_offset) + "-shift" + std::to_string(p.line_shift) + "-width" +
         std::to_string(p.line_width) + "-count" + std::to_string(p.count) + "-" + std::to_string(p.proj_width) + "x" +
         std::to_string(p.proj_height);
}

/// Per-pixel forward operator I = L H. Rows are channel-major: row c*M + i
/// is channel c under pattern i. Flagged rows carry no usable model.
struct SystemMatrix {
  Eigen::MatrixXd L;
  std::vector<std::uint8_t> flagged;
  std::string pattern_set;
  int x = 0, y = 0;
  double depth = 0.0;

  int patterns() const noexcept { return static_cast<int>(L.rows() / 3); }
  std::size_t flagged_count() const noexcept {
    return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), std::uint8_t{1}));
  }
};

/// Builds per-pixel system matrices for one pattern set and one calibration.
/// Entry (c*M + i, j) = cam[c][j] eta[j] (P_i * G)(psi(p^i, z, lambda_j)) / d^2,
/// where p^i = p + flow_i(p) and d is the projector-to-point distance.
class MatrixBuilder {
 public:
  MatrixBuilder(const PatternSet& patterns, const CalibrationBundle& bundle, const SolverConfig& config)
      : bundle_(bundle), id_(pattern_set_id(patterns.params)) {
    config.validate();
    bundle_.tables.validate();
    if (bundle_.dispersion.grid() != bundle_.tables.grid) throw GridError("dispersion and radiometry grids differ");
    std::vector<double> kernel;
    if (config.blur) kernel = gaussian_kernel(config.blur_size, config.blur_sigma);
    for (const Pattern& p : patterns.patterns) {
      if (p.width() != bundle_.projector.width) throw ParamError("pattern width differs from the projector");
      std::vector<float> cols(p.columns().begin(), p.columns().end());
      lights_.emplace_back(cols, p.height(), kernel);
    }
    max_flagged_ = config.max_flagged_fraction;
  }

  int patterns() const noexcept { return static_cast<int>(lights_.size()); }
  std::size_t bands() const noexcept { return bundle_.tables.bands(); }
  const CalibrationBundle& bundle() const noexcept { return bundle_; }

  /// `flows` holds at least M frame flows (pattern order); empty means static.
  SystemMatrix build(int x, int y, double z, const std::vector<FlowField>& flows = {}) const {
    const int M = patterns();
    const std::size_t N = bands();
    if (!flows.empty() && flows.size() < static_cast<std::size_t>(M))
      throw ParamError("flow stack has fewer entries than patterns");
    SystemMatrix s;
    s.L = Eigen::MatrixXd::Zero(3 * M, static_cast<Eigen::Index>(N));
    s.flagged.assign(static_cast<std::size_t>(3 * M), 0);
    s.pattern_set = id_;
    s.x = x;
    s.y = y;
    s.depth = z;
    const RadiometricTables& t = bundle_.tables;
    for (int i = 0; i < M; ++i) {
      double px = x, py = y;
      bool ok = std::isfinite(z) && z > 0.0;
      if (!flows.empty()) {
        const FlowField& f = flows[static_cast<std::size_t>(i)];
        px += f.dx(x, y);
        py += f.dy(x, y);
        ok = ok && f.is_valid(x, y);
      }
      double d2 = 0.0, qy = 0.0;
      if (ok) {
        const Eigen::Vector3d X = bundle_.left.unproject(px, py, z);
        double proj_depth = 0.0;
        qy = bundle_.projector.project(X, &proj_depth).y();
        d2 = (X - bundle_.projector.center()).squaredNorm();
        ok = proj_depth > 0.0 && d2 > 0.0;
      }
      for (std::size_t j = 0; j < N && ok; ++j) {
        const auto q = bundle_.dispersion.at_band(px, py, z, j);
        if (!q.covered) {
          ok = false;
          break;
        }
        const double light = lights_[static_cast<std::size_t>(i)].spectral(t, j, q.q, qy);
        for (int c = 0; c < 3; ++c) s.L(c * M + i, static_cast<Eigen::Index>(j)) = t.cam[c][j] * t.eta[j] * light / d2;
      }
      if (!ok)
        for (int c = 0; c < 3; ++c) {
          s.flagged[static_cast<std::size_t>(c * M + i)] = 1;
          s.L.row(c * M + i).setZero();
        }
    }
    return s;
  }

  bool skipped(const SystemMatrix& s) const noexcept {
    return static_cast<double>(s.flagged_count()) > max_flagged_ * static_cast<double>(s.flagged.size());
  }

 private:
  CalibrationBundle bundle_;
  std::string id_;
  std::vector<ProjectedLight> lights_;
  double max_flagged_ = 0.0;
};

/// One-off matrix for pixel (x, y) at depth z; `flows` may be empty (static).
inline SystemMatrix build_system_matrix(int x, int y, double z, const std::vector<FlowField>& flows,
                                        const PatternSet& patterns, const CalibrationBundle& bundle,
                                        const SolverConfig& config = {}) {
  return MatrixBuilder(patterns, bundle, config).build(x, y, z, flows);
}

/// I^i <- max(I^i - I^B, 0) per pixel and channel; `frames` ends with I^B.
/// Pixels invalid in either frame become invalid.
inline void subtract_black(std::vector<RgbImage>& frames, std::vector<Mask>& valid) {
  if (frames.empty() || valid.size() != frames.size()) throw ParamError("frames and masks must pair up, ending in black");
  const RgbImage& black = frames.back();
  const Mask& bv = valid.back();
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    RgbImage& f = frames[i];
    if (!f.same_shape(black) || valid[i].size() != f.pixel_count()) throw ParamError("frame sizes differ");
    for (int c = 0; c < f.channels(); ++c) {
      auto dst = f.plane(c);
      const auto src = black.plane(c);
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::max(dst[k] - src[k], 0.0f);
    }
    for (std::size_t k = 0; k < valid[i].size(); ++k) valid[i][k] = valid[i][k] && bv[k];
  }
}

/// Intensity vector of pixel (x, y) in row order c*M + i, and the rows whose
/// aligned sample is unusable.
inline Eigen::VectorXd intensity_vector(const std::vector<RgbImage>& frames, const std::vector<Mask>& valid, int M,
                                        int x, int y, std::vector<std::uint8_t>& unusable) {
  if (static_cast<int>(frames.size()) < M) throw ParamError("fewer frames than patterns");
  Eigen::VectorXd I(3 * M);
  unusable.assign(static_cast<std::size_t>(3 * M), 0);
  const std::size_t k = static_cast<std::size_t>(y) * frames[0].width() + x;
  for (int i = 0; i < M; ++i) {
    const bool ok = valid[static_cast<std::size_t>(i)][k] != 0;
    for (int c = 0; c < 3; ++c) {
      I(c * M + i) = ok ? frames[static_cast<std::size_t>(i)](x, y, c) : 0.0;
      unusable[static_cast<std::size_t>(c * M + i)] = ok ? 0 : 1;
    }
  }
  return I;
}

}  // namespace ddsl::recon
