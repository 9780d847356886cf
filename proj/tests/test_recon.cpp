#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ddsl/recon/pipeline.hpp"
#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/setup.hpp"

using namespace ddsl;
using namespace ddsl::recon;

namespace {

Eigen::VectorXd to_vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

double cube_rmse_over_peak(const HyperspectralCube& r, const HyperspectralCube& t, std::size_t* n_out = nullptr) {
  double s = 0, peak = 0;
  std::size_t n = 0;
  for (float v : t.values().data()) peak = std::max<double>(peak, v);
  for (int y = 0; y < t.height(); ++y)
    for (int x = 0; x < t.width(); ++x) {
      if (!r.is_valid(x, y)) continue;
      ++n;
      for (std::size_t j = 0; j < t.bands(); ++j) s += std::pow(r(x, y, j) - t(x, y, j), 2);
    }
  if (n_out) *n_out = n;
  return std::sqrt(s / (static_cast<double>(n) * t.bands())) / peak;
}

class Rig : public ::testing::Test {
 protected:
  void SetUp() override {
    rig = sim::make_desk_rig();
    params = sim::pattern_params_for(rig);
    patterns = generate_patterns(params);
  }
  CalibrationBundle rig;
  PatternParams params;
  PatternSet patterns;
};

}  // namespace

TEST_F(Rig, SystemMatrixShapeAtDefaults) {
  const SystemMatrix s = build_system_matrix(32, 32, 0.8, {}, patterns, rig);
  EXPECT_EQ(s.L.rows(), 24);
  EXPECT_EQ(s.L.cols(), 23);
  EXPECT_EQ(s.flagged_count(), 0u);
  EXPECT_TRUE(s.L.allFinite());
  EXPECT_GE(s.L.minCoeff(), 0.0);
  EXPECT_EQ(s.pattern_set, pattern_set_id(params));
  EXPECT_EQ(s.depth, 0.8);
}

TEST_F(Rig, AllBlackPatternsGiveZeroMatrix) {
  PatternSet black = patterns;
  for (auto& p : black.patterns) p = black.black;
  const SystemMatrix s = build_system_matrix(20, 40, 0.7, {}, black, rig);
  EXPECT_EQ(s.L.cwiseAbs().maxCoeff(), 0.0);
}

// One lit column per pattern; every (i, j) entry is enumerated against the
// blur taps and the interpolation of the light at q.
TEST_F(Rig, SingleColumnPatternsMatchEnumeration) {
  const int x = 32, y = 20;
  const double z = 0.75;
  const int M = params.count;
  const auto kernel = gaussian_kernel(7, 3.0);
  PatternSet single = patterns;
  std::vector<int> lit(M);
  for (int i = 0; i < M; ++i) {
    const double q = rig.dispersion.at_band(x, y, z, static_cast<std::size_t>(3 * i + 1)).q;
    lit[i] = static_cast<int>(std::lround(q)) + (i % 3) - 1;
    std::vector<std::uint8_t> cols(static_cast<std::size_t>(params.proj_width), 0);
    cols[static_cast<std::size_t>(lit[i])] = 1;
    single.patterns[static_cast<std::size_t>(i)] = Pattern(cols, params.proj_height);
  }
  const SystemMatrix s = build_system_matrix(x, y, z, {}, single, rig);
  const Eigen::Vector3d X = rig.left.unproject(x, y, z);
  const double d2 = (X - rig.projector.center()).squaredNorm();
  auto tap = [&](int col, int centre) {
    const int k = col - centre;
    return std::abs(k) <= 3 ? kernel[static_cast<std::size_t>(k + 3)] : 0.0;
  };
  int nonzero = 0;
  for (int i = 0; i < M; ++i)
    for (std::size_t j = 0; j < 23; ++j) {
      const double q = rig.dispersion.at_band(x, y, z, j).q;
      const int x0 = static_cast<int>(std::floor(q));
      const double t = q - x0;
      const double light = rig.tables.white_emission(j) * ((1 - t) * tap(x0, lit[i]) + t * tap(x0 + 1, lit[i]));
      const bool reach = std::abs(q - lit[i]) < 4.0;
      for (int c = 0; c < 3; ++c) {
        const double got = s.L(c * M + i, static_cast<Eigen::Index>(j));
        const double expect = rig.tables.cam[c][j] * rig.tables.eta[j] * light / d2;
        // The blurred light is stored in single precision.
        EXPECT_NEAR(got, expect, 1e-6 * expect) << i << "," << j << "," << c;
        EXPECT_EQ(got > 0.0, reach) << i << "," << j << "," << c;
        nonzero += got > 0.0;
      }
    }
  EXPECT_GE(nonzero, 3 * M);  // each pattern reaches at least the band it was placed on
}

TEST_F(Rig, ColumnsMatchSingleBandRenders) {
  sim::SceneSpec scene = sim::colorchecker_scene();
  scene.reflectance = HyperspectralCube(64, 64, rig.tables.grid, 1.0f);
  const sim::Renderer renderer(scene, rig);
  const MatrixBuilder mb(patterns, rig, {});
  for (int x : {3, 31, 58}) {
    const SystemMatrix s = mb.build(x, 17, scene.depth.z(x, 17));
    for (int i = 0; i < params.count; ++i) {
      const auto light = renderer.light(patterns.patterns[static_cast<std::size_t>(i)].to_image());
      for (int j = 0; j < 23; ++j) {
        double rgb[3];
        ASSERT_TRUE(renderer.shade(x, 17, 0.0, light, rgb, j));
        for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.L(c * params.count + i, j), rgb[c], 1e-9 * std::max(1.0, rgb[c]));
      }
    }
  }
}

TEST_F(Rig, EtaScalesColumns) {
  CalibrationBundle scaled = rig;
  scaled.tables.eta[5] *= 2.5;
  const SystemMatrix a = build_system_matrix(40, 12, 0.9, {}, patterns, rig);
  const SystemMatrix b = build_system_matrix(40, 12, 0.9, {}, patterns, scaled);
  for (Eigen::Index j = 0; j < a.L.cols(); ++j) {
    const double s = j == 5 ? 2.5 : 1.0;
    EXPECT_LT((b.L.col(j) - s * a.L.col(j)).norm(), 1e-12 * std::max(1.0, a.L.col(j).norm())) << j;
  }
}

TEST_F(Rig, FullColumnRankForCoveredPixels) {
  const MatrixBuilder mb(patterns, rig, {});
  for (int x : {0, 21, 42, 63})
    for (double z : {0.5, 0.8, 1.1}) {
      const SystemMatrix s = mb.build(x, 32, z);
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.L);
      const auto sv = svd.singularValues();
      EXPECT_GT(sv(sv.size() - 1), 1e-3 * sv(0)) << x << " " << z << " smallest " << sv(sv.size() - 1);
    }
}

TEST_F(Rig, UncoveredPixelsAreFlagged) {
  const MatrixBuilder mb(patterns, rig, {});
  FlowField off(64, 64, 80.0f, 0.0f);
  std::vector<FlowField> flows(static_cast<std::size_t>(params.count), FlowField(64, 64));
  flows[2] = off;
  const SystemMatrix s = mb.build(10, 10, 0.8, flows);
  EXPECT_EQ(s.flagged_count(), 3u);
  EXPECT_TRUE(s.flagged[2] && s.flagged[params.count + 2] && s.flagged[2 * params.count + 2]);
  EXPECT_EQ(s.L.row(2).norm(), 0.0);
  EXPECT_TRUE(mb.skipped(s));
}

TEST(SubtractBlack, ZeroBlackIsIdentity) {
  std::vector<RgbImage> frames{make_rgb(4, 3, 2.0f), make_rgb(4, 3, 0.0f)};
  frames[0](1, 1, 2) = 7.0f;
  std::vector<Mask> valid(2, Mask(12, 1));
  const RgbImage before = frames[0];
  subtract_black(frames, valid);
  EXPECT_EQ(frames[0].data(), before.data());
}

TEST(SubtractBlack, EqualFramesCancelAndClamp) {
  std::vector<RgbImage> frames{make_rgb(4, 3, 2.0f), make_rgb(4, 3, 1.0f), make_rgb(4, 3, 2.0f)};
  std::vector<Mask> valid(3, Mask(12, 1));
  valid[2][5] = 0;
  subtract_black(frames, valid);
  for (float v : frames[0].data()) EXPECT_EQ(v, 0.0f);
  for (float v : frames[1].data()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(valid[0][5], 0);
  EXPECT_EQ(valid[0][4], 1);
}

TEST_F(Rig, SubtractionRemovesAmbientLeakage) {
  sim::SceneSpec lit = sim::colorchecker_scene();
  sim::SceneSpec dark = lit;
  lit.ambient.assign(23, 0.0);
  for (std::size_t j = 0; j < 23; ++j) lit.ambient[j] = 2.0 + 0.1 * j;
  const FrameGroup a = sim::render_group(lit, params, rig);
  const FrameGroup b = sim::render_group(dark, params, rig);
  std::vector<RgbImage> fa, fb;
  std::vector<Mask> va, vb;
  for (const auto& f : a.frames) fa.push_back(f.left), va.push_back(f.left_valid);
  for (const auto& f : b.frames) fb.push_back(f.left), vb.push_back(f.left_valid);
  subtract_black(fa, va);
  subtract_black(fb, vb);
  double worst = 0.0, peak = 0.0;
  for (int i = 0; i < params.count; ++i)
    for (std::size_t k = 0; k < fa[i].data().size(); ++k) {
      worst = std::max<double>(worst, std::abs(fa[i].data()[k] - fb[i].data()[k]));
      peak = std::max<double>(peak, fb[i].data()[k]);
    }
  EXPECT_LT(worst, 1e-5 * peak);
}

TEST_F(Rig, DataIsConsistentUnderMotionWithOracleFlows) {
  // Integer flows: the warp resamples exactly, so only the model is tested.
  for (Eigen::Vector2d v : {Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d(0.0, -2.0), Eigen::Vector2d(-1.0, 1.0)}) {
    sim::SceneSpec scene = sim::colorchecker_scene();
    scene.motion.velocity = v;
    const FrameGroup g = sim::render_group(scene, params, rig);
    flow::MotionOptions mo;
    mo.oracle = true;
    const flow::FlowStack st = flow::group_flow_stack(g, mo);
    flow::AlignedFrames al = flow::warp_to_center(g, st);
    subtract_black(al.images, al.valid);
    const MatrixBuilder mb(patterns, rig, {});
    for (int x : {20, 32, 44}) {
      std::vector<std::uint8_t> unusable;
      const Eigen::VectorXd I = intensity_vector(al.images, al.valid, params.count, x, 30, unusable);
      ASSERT_EQ(std::count(unusable.begin(), unusable.end(), 1), 0);
      const SystemMatrix s = mb.build(x, 30, g.truth_depth->z(x, 30), st.flows);
      const Eigen::VectorXd H = to_vec(g.truth_cube->spectrum(x, 30));
      EXPECT_LT((s.L * H - I).norm(), 1e-6 * I.norm()) << v.transpose() << " x " << x;
    }
  }
}

TEST_F(Rig, PixelRoundTripWithoutSmoothness) {
  const SystemMatrix s = build_system_matrix(32, 32, 0.8, {}, patterns, rig);
  const auto spectra = sim::colorchecker_spectra(rig.tables.grid);
  SolverConfig c;
  c.kappa_lambda = 0.0;
  c.iterations = 4000;
  double worst = 0.0;
  for (const auto& sp : spectra) {
    const Eigen::VectorXd Ht = to_vec(sp);
    const PixelSolution r = solve_pixelwise(s.L * Ht, s.L, c);
    worst = std::max(worst, (r.H - Ht).norm() / Ht.norm());
    EXPECT_LT(r.residual, 1e-2 * (s.L * Ht).norm());
  }
  EXPECT_LT(worst, 1e-3);
}

// The mandated 1000-iteration budget stops short of 1e-3 on the hardest
// colour-checker spectrum; this pins down what it reaches.
TEST_F(Rig, PixelRoundTripAtDefaultBudget) {
  const SystemMatrix s = build_system_matrix(32, 32, 0.8, {}, patterns, rig);
  SolverConfig c;
  c.kappa_lambda = 0.0;
  double worst = 0.0;
  for (const auto& sp : sim::colorchecker_spectra(rig.tables.grid)) {
    const Eigen::VectorXd Ht = to_vec(sp);
    worst = std::max(worst, (solve_pixelwise(s.L * Ht, s.L, c).H - Ht).norm() / Ht.norm());
  }
  EXPECT_LT(worst, 1e-2);
}

TEST_F(Rig, ZeroDataGivesZeroSpectrum) {
  const SystemMatrix s = build_system_matrix(32, 32, 0.8, {}, patterns, rig);
  const PixelSolution r = solve_pixelwise(Eigen::VectorXd::Zero(24), s.L, {});
  EXPECT_EQ(r.H.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.objective, 0.0);
}

TEST_F(Rig, HeavySmoothnessApproachesBestConstant) {
  const SystemMatrix s = build_system_matrix(32, 32, 0.8, {}, patterns, rig);
  const Eigen::VectorXd Ht = to_vec(sim::colorchecker_spectra(rig.tables.grid)[3]);
  const Eigen::VectorXd I = s.L * Ht;
  const Eigen::VectorXd u = s.L.rowwise().sum();
  const double c_best = u.dot(I) / u.squaredNorm();
  // The data term is in squared sensor units (~1e5 here), so "large" is large
  // relative to that.
  double previous = 1e300;
  for (double kappa : {3.0, 3e4, 1e8}) {
    SolverConfig c;
    c.kappa_lambda = kappa;
    const PixelSolution r = solve_pixelwise(I, s.L, c);
    const double dev = (r.H - Eigen::VectorXd::Constant(23, c_best)).norm() / (c_best * std::sqrt(23.0));
    EXPECT_LT(dev, previous) << kappa;
    previous = dev;
  }
  EXPECT_LT(previous, 1e-2);
}

TEST(PixelSolve, IdentityFixtureReturnsIntensities) {
  const Eigen::VectorXd I = (Eigen::VectorXd(6) << 0.3, 1.2, 0.0, 2.5, 0.7, 0.05).finished();
  SolverConfig c;
  c.kappa_lambda = 0.0;
  c.kappa_xy = 0.0;
  const PixelSolution r = solve_pixelwise(I, Eigen::MatrixXd::Identity(6, 6), c);
  EXPECT_LT((r.H - I).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(PixelSolve, NonFiniteInputsThrow) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(3, 3);
  L(1, 1) = std::nan("");
  EXPECT_THROW(solve_pixelwise(Eigen::VectorXd::Ones(3), L, {}), SolverError);
}

TEST(ImageProblem, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int W = 3 + trial % 3, H = 2 + trial % 2;
    const std::size_t N = 5;
    const double kl = 3.0 * u(rng), kxy = 0.5 * u(rng);
    ImageProblem P(W, H, N, kl, kxy);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if ((x + y + trial) % 5 == 0) continue;  // some pixels carry regularizers only
        Eigen::MatrixXd L(6, N);
        for (Eigen::Index k = 0; k < L.size(); ++k) L.data()[k] = u(rng);
        Eigen::VectorXd I(6), w(6);
        for (int k = 0; k < 6; ++k) I(k) = 3.0 * u(rng), w(k) = k == trial % 6 ? 0.0 : 1.0;
        P.set_data(x, y, L, I, w);
      }
    std::vector<double> h(P.size());
    for (double& v : h) v = 0.1 + u(rng);
    const std::vector<double> g = P.gradient(h);
    std::vector<double> fd(h.size());
    const double step = 1e-6;
    for (std::size_t k = 0; k < h.size(); ++k) {
      std::vector<double> a = h, b = h;
      a[k] += step;
      b[k] -= step;
      fd[k] = (P.objective(a) - P.objective(b)) / (2 * step);
    }
    worst = std::max(worst, (to_vec(g) - to_vec(fd)).norm() / to_vec(fd).norm());
  }
  EXPECT_LT(worst, 1e-4);
}

class ImageSolve : public Rig {
 protected:
  ImageProblem problem_for(const FrameGroup& g, const SolverConfig& c) const {
    ImageProblem P(64, 64, 23, c.kappa_lambda, c.kappa_xy);
    const MatrixBuilder mb(patterns, rig, c);
    std::vector<RgbImage> frames;
    std::vector<Mask> valid;
    for (const auto& f : g.frames) frames.push_back(f.left), valid.push_back(f.left_valid);
    subtract_black(frames, valid);
    std::vector<std::uint8_t> unusable;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const SystemMatrix s = mb.build(x, y, g.truth_depth->z(x, y));
        const Eigen::VectorXd I = intensity_vector(frames, valid, params.count, x, y, unusable);
        P.set_data(x, y, s.L, I, Eigen::VectorXd::Ones(I.size()));
      }
    return P;
  }
};

TEST_F(ImageSolve, WithoutTvEqualsPixelwise) {
  SolverConfig c;
  c.kappa_xy = 0.0;
  const FrameGroup g = sim::render_group(sim::colorchecker_scene(), params, rig);
  const ImageProblem P = problem_for(g, c);
  const ImageSolution s = solve_image(P, c);
  for (int y = 0; y < 64; y += 7)
    for (int x = 0; x < 64; x += 5) {
      const PixelSolution p = solve_pixelwise(P.intensities(x, y), P.matrix(x, y), c, P.weights(x, y));
      for (std::size_t j = 0; j < 23; ++j) EXPECT_NEAR(s.H[P.index(x, y) * 23 + j], p.H(j), 1e-6);
    }
  EXPECT_EQ(s.objective_history.size(), 1u);
}

TEST_F(ImageSolve, TvObjectiveNeverIncreasesAndFlattensNoise) {
  sim::RenderOptions ro;
  ro.noise_sigma = 1.0;
  const FrameGroup g = sim::render_group(sim::colorchecker_scene(), params, rig, 5, ro);
  SolverConfig tv;
  SolverConfig plain = tv;
  plain.kappa_xy = 0.0;
  const ImageProblem Ptv = problem_for(g, tv);
  const ImageSolution a = solve_image(Ptv, tv);
  ASSERT_EQ(a.objective_history.size(), static_cast<std::size_t>(tv.outer_iterations + 1));
  for (std::size_t k = 1; k < a.objective_history.size(); ++k)
    EXPECT_LE(a.objective_history[k], a.objective_history[k - 1]);
  const ImageSolution b = solve_image(problem_for(g, plain), plain);

  auto gradient_energy = [&](const std::vector<double>& H) {
    double e = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x + 1 < 64; ++x)
        for (std::size_t j = 0; j < 23; ++j)
          e += std::abs(H[Ptv.index(x + 1, y) * 23 + j] - H[Ptv.index(x, y) * 23 + j]) +
               (y + 1 < 64 ? std::abs(H[Ptv.index(x, y + 1) * 23 + j] - H[Ptv.index(x, y) * 23 + j]) : 0.0);
    return e;
  };
  auto misfit = [&](const std::vector<double>& H) {
    double m = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const Eigen::Map<const Eigen::VectorXd> h(&H[Ptv.index(x, y) * 23], 23);
        m += (Ptv.matrix(x, y) * h - Ptv.intensities(x, y)).squaredNorm();
      }
    return m;
  };
  EXPECT_LT(gradient_energy(a.H), gradient_energy(b.H));
  EXPECT_LT(misfit(a.H), 1.1 * misfit(b.H));
}

TEST_F(Rig, StaticRoundTripWithinTwoPercentOfPeak) {
  const FrameGroup g = sim::render_group(sim::colorchecker_scene(), params, rig);
  ReconstructOptions o;
  o.depth.source = depth::DisparitySource::oracle;
  const Reconstruction r = reconstruct_group(g, rig, o);
  std::size_t n = 0;
  EXPECT_LT(cube_rmse_over_peak(r.cube, *g.truth_cube, &n), 0.02);
  EXPECT_EQ(n, 64u * 64u);
  EXPECT_EQ(r.diagnostics.solved, 64u * 64u);
  const Reconstruction again = reconstruct_group(g, rig, o);
  EXPECT_EQ(again.cube.values().data(), r.cube.values().data());
}

TEST_F(Rig, MovingRoundTripWithinOneAndAHalfOfStatic) {
  ReconstructOptions o;
  o.depth.source = depth::DisparitySource::oracle;
  o.motion.oracle = true;
  const FrameGroup gs = sim::render_group(sim::colorchecker_scene(), params, rig);
  const double still = cube_rmse_over_peak(reconstruct_group(gs, rig, o).cube, *gs.truth_cube);
  for (Eigen::Vector2d v : {Eigen::Vector2d(0.0, 2.0), Eigen::Vector2d(-2.0, 0.0)}) {
    sim::SceneSpec scene = sim::colorchecker_scene();
    scene.motion.velocity = v;
    const FrameGroup g = sim::render_group(scene, params, rig);
    std::size_t n = 0;
    const double moving = cube_rmse_over_peak(reconstruct_group(g, rig, o).cube, *g.truth_cube, &n);
    EXPECT_LT(moving, 1.5 * still) << v.transpose();
    EXPECT_GT(n, 64u * 64u / 2);
  }
}

TEST(SolverConfigJson, RoundTripAndUnknownKeys) {
  SolverConfig c;
  c.kappa_xy = 0.0;
  c.iterations = 12;
  const nlohmann::json j = c;
  const SolverConfig back = solver_config_from_json(j);
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(solver_config_from_json(nlohmann::json::object()).kappa_lambda, 3.0);
  EXPECT_THROW(solver_config_from_json(nlohmann::json{{"kappa_lamda", 1.0}}), FormatError);
  EXPECT_THROW(solver_config_from_json(nlohmann::json{{"kappa_xy", -1.0}}), ParamError);
  EXPECT_EQ(SolverConfig::documentation().size(), j.size());
}
