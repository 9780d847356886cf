#pragma once

#include <chrono>
#include <vector>

#include "ddsl/core/frames.hpp"
#include "ddsl/depth/stereo.hpp"
#include "ddsl/flow/align.hpp"
#include "ddsl/recon/solver.hpp"

namespace ddsl::recon {

struct ReconstructOptions {
  SolverConfig solver;
  depth::DepthOptions depth;
  flow::MotionOptions motion;
};

struct ReconstructDiagnostics {
  std::size_t pixels = 0;
  std::size_t solved = 0;
  std::size_t no_depth = 0;
  std::size_t skipped = 0;  // too many flagged or unusable rows
  std::vector<double> objective_history;
  int rejected_tiles = 0;
  double residual_rms = 0.0;  // data residual over solved pixels and usable rows, DN
  double seconds_depth = 0.0, seconds_flow = 0.0, seconds_solve = 0.0;
};

struct Reconstruction {
  HyperspectralCube cube;  // valid where a pixel had data
  DepthMap depth;          // centre-frame depth, left camera
  flow::FlowStack flows;
  Image residual;          // per-pixel RMS of the usable rows of L H - I, DN; 0 where unsolved
  ReconstructDiagnostics diagnostics;
};

/// Depth -> flows -> warp -> black subtraction -> solve, all anchored at the
/// centre frame of the group.
inline Reconstruction reconstruct_group(const FrameGroup& g, const CalibrationBundle& bundle,
                                        const ReconstructOptions& o = {}) {
  o.solver.validate();
  const int M = g.pattern_count();
  if (static_cast<int>(g.frames.size()) != M + 1) throw ParamError("frame group must hold M pattern frames and I^B");
  const int W = bundle.left.width, H = bundle.left.height;
  for (const auto& f : g.frames)
    if (f.left.width() != W || f.left.height() != H) throw ParamError("frames do not match the left camera");
  if (g.params.proj_width != bundle.projector.width || g.params.proj_height != bundle.projector.height)
    throw ParamError("pattern size differs from the projector resolution");
  using clock = std::chrono::steady_clock;
  Reconstruction r;
  auto& d = r.diagnostics;
  d.pixels = static_cast<std::size_t>(W) * H;

  auto t0 = clock::now();
  const StereoFrame& centre = g.frames[static_cast<std::size_t>(g.center_index() - 1)];
  const DepthMap* truth = g.truth_depth ? &*g.truth_depth : nullptr;
  r.depth = depth::estimate_depth(centre, bundle.left, bundle.right, bundle.dispersion.depth_min(),
                                  bundle.dispersion.depth_max(), o.depth, truth);
  auto t1 = clock::now();
  r.flows = flow::group_flow_stack(g, o.motion);
  flow::AlignedFrames aligned = flow::warp_to_center(g, r.flows);
  subtract_black(aligned.images, aligned.valid);
  auto t2 = clock::now();

  const PatternSet patterns = generate_patterns(g.params);
  const MatrixBuilder builder(patterns, bundle, o.solver);
  ImageProblem problem(W, H, bundle.tables.bands(), o.solver.kappa_lambda, o.solver.kappa_xy);
  std::vector<std::uint8_t> status(d.pixels, 0);  // 0 solved, 1 no depth, 2 skipped
  std::vector<Eigen::MatrixXd> Ls(d.pixels);
  std::vector<Eigen::VectorXd> Is(d.pixels), ws(d.pixels);
  parallel_for(0, H, [&](int y) {
    std::vector<std::uint8_t> unusable;
    for (int x = 0; x < W; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      if (!r.depth.is_valid(x, y)) {
        status[k] = 1;
        continue;
      }
      SystemMatrix s = builder.build(x, y, r.depth.z(x, y), r.flows.flows);
      Eigen::VectorXd I = intensity_vector(aligned.images, aligned.valid, M, x, y, unusable);
      Eigen::VectorXd w(I.size());
      std::size_t bad = 0;
      for (Eigen::Index i = 0; i < I.size(); ++i) {
        const bool off = s.flagged[static_cast<std::size_t>(i)] || unusable[static_cast<std::size_t>(i)];
        w(i) = off ? 0.0 : 1.0;
        bad += off;
      }
      if (static_cast<double>(bad) > o.solver.max_flagged_fraction * static_cast<double>(I.size())) {
        status[k] = 2;
        continue;
      }
      Ls[k] = std::move(s.L);
      Is[k] = std::move(I);
      ws[k] = std::move(w);
    }
  });
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      if (status[k] == 0) problem.set_data(x, y, std::move(Ls[k]), std::move(Is[k]), std::move(ws[k]));
      d.no_depth += status[k] == 1;
      d.skipped += status[k] == 2;
    }
  d.solved = d.pixels - d.no_depth - d.skipped;

  const ImageSolution sol = solve_image(problem, o.solver);
  auto t3 = clock::now();
  d.objective_history = sol.objective_history;
  d.rejected_tiles = sol.rejected_tiles;

  r.cube = HyperspectralCube(W, H, bundle.tables.grid);
  r.cube.valid().assign(d.pixels, 0);
  r.residual = Image(W, H, 1);
  const std::size_t N = bundle.tables.bands();
  double sse = 0.0, rows = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t k = static_cast<std::size_t>(y) * W + x;
      for (std::size_t j = 0; j < N; ++j) r.cube(x, y, j) = static_cast<float>(sol.H[k * N + j]);
      r.cube.valid()[k] = status[k] == 0;
      if (status[k] != 0) continue;
      const Eigen::Map<const Eigen::VectorXd> h(sol.H.data() + k * N, static_cast<Eigen::Index>(N));
      const Eigen::VectorXd& w = problem.weights(x, y);
      const Eigen::VectorXd e = w.cwiseProduct(problem.matrix(x, y) * h - problem.intensities(x, y));
      const double used = w.sum();
      if (used > 0.0) r.residual(x, y) = static_cast<float>(std::sqrt(e.squaredNorm() / used));
      sse += e.squaredNorm();
      rows += used;
    }
  d.residual_rms = rows > 0.0 ? std::sqrt(sse / rows) : 0.0;
  const auto secs = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  d.seconds_depth = secs(t0, t1);
  d.seconds_flow = secs(t1, t2);
  d.seconds_solve = secs(t2, t3);
  return r;
}

}  // namespace ddsl::recon
