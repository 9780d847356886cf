#include <gtest/gtest.h>

#include <cmath>

#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/setup.hpp"

using namespace ddsl;
using namespace ddsl::sim;

namespace {

PatternSet patterns_for(const CalibrationBundle& rig) { return generate_patterns(pattern_params_for(rig)); }

double max_abs(const Image& img) {
  double m = 0;
  for (float v : img.data()) m = std::max(m, std::abs(static_cast<double>(v)));
  return m;
}

SceneSpec flat_scene(int w, int h, double value, double depth) {
  SceneSpec s;
  s.reflectance = HyperspectralCube(w, h, WavelengthGrid(), static_cast<float>(value));
  s.depth = plane_depth(w, h, depth);
  return s;
}

}  // namespace

TEST(RenderFrame, BlackPatternWithoutAmbientIsZero) {
  const auto rig = make_desk_rig();
  const auto scene = colorchecker_scene();
  const auto f = render_frame(scene, patterns_for(rig).black.to_image(), rig, 0.0);
  EXPECT_EQ(max_abs(f.left), 0.0);
  EXPECT_EQ(max_abs(f.right), 0.0);
}

TEST(RenderFrame, DoublingDistanceQuartersIntensity) {
  // Scaling the whole world by two leaves every projector column unchanged
  // and doubles every projector distance.
  DeskRigOptions o;
  const auto rig1 = make_desk_rig(o);
  o.baseline *= 2;
  o.projector_offset *= 2;
  const auto rig2 = make_desk_rig(o);
  const Image pat = patterns_for(rig1).patterns[3].to_image();
  const auto a = render_frame(colorchecker_scene(64, 64, 0.6), pat, rig1, 0.0);
  const auto b = render_frame(colorchecker_scene(64, 64, 1.2), pat, rig2, 0.0);
  ASSERT_GT(max_abs(a.left), 1.0);
  for (std::size_t i = 0; i < a.left.data().size(); ++i)
    EXPECT_NEAR(b.left.data()[i], 0.25 * a.left.data()[i], 1e-4 * max_abs(a.left));
}

TEST(RenderFrame, SingleColumnLightsExactlyTheBruteForcePixels) {
  // Delta-like grating efficiency at one band, flat camera response, no
  // blur: a pixel is lit iff its dispersed column at that band falls within
  // one column of the lit projector column.
  RadiometricTables t = default_tables();
  const std::size_t band = 9;
  for (std::size_t j = 0; j < t.bands(); ++j) {
    t.eta[j] = j == band ? 1.0 : 0.0;
    for (int c = 0; c < 3; ++c) t.cam[c][j] = 1.0;
  }
  const auto rig = make_desk_rig({}, t);
  RenderOptions opt;
  opt.projector_blur = false;
  const int lit_col = rig.projector.width / 2;
  Image pat(rig.projector.width, rig.projector.height, 3);
  for (int y = 0; y < pat.height(); ++y)
    for (int c = 0; c < 3; ++c) pat(lit_col, y, c) = 1.0f;
  const auto scene = stair_scene(64, 64);
  const auto f = render_frame(scene, pat, rig, 0.0, opt);

  const double shift = -0.5 * (t.grid.wavelength(band) - 550.0);
  int lit = 0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const double z = scene.depth.z(x, y);
      const double q = pixel_correspondence(rig.left, rig.projector, {x, y}, z).x() + shift;
      const bool expect = std::abs(q - lit_col) < 1.0 - 1e-9;
      const bool got = f.left(x, y, 0) > 0.0f;
      if (std::abs(std::abs(q - lit_col) - 1.0) < 1e-6) continue;  // numerically on the boundary
      EXPECT_EQ(got, expect) << x << "," << y << " q=" << q;
      lit += expect;
    }
  EXPECT_GT(lit, 10);
}

TEST(RenderFrame, LinearInReflectance) {
  const auto rig = make_desk_rig();
  const Image pat = patterns_for(rig).patterns[0].to_image();
  auto s = smooth_scene(64, 64);
  const auto a = render_frame(s, pat, rig, 0.0);
  for (float& v : s.reflectance.values().data()) v *= 0.4f;
  const auto b = render_frame(s, pat, rig, 0.0);
  for (std::size_t i = 0; i < a.left.data().size(); ++i) {
    EXPECT_NEAR(b.left.data()[i], 0.4 * a.left.data()[i], 1e-4);
    EXPECT_NEAR(b.right.data()[i], 0.4 * a.right.data()[i], 1e-4);
  }
}

TEST(RenderFrame, SuperpositionOverPatterns) {
  const auto rig = make_desk_rig();
  const auto set = patterns_for(rig);
  const Image p1 = set.patterns[0].to_image(), p2 = set.patterns[4].to_image();
  Image sum = p1;
  for (std::size_t i = 0; i < sum.data().size(); ++i) sum.data()[i] += p2.data()[i];
  ASSERT_LE(*std::max_element(sum.data().begin(), sum.data().end()), 1.0f);
  const auto s = colorchecker_scene();
  const auto a = render_frame(s, p1, rig, 0), b = render_frame(s, p2, rig, 0), c = render_frame(s, sum, rig, 0);
  for (std::size_t i = 0; i < c.left.data().size(); ++i)
    EXPECT_NEAR(c.left.data()[i], a.left.data()[i] + b.left.data()[i], 1e-4);
}

TEST(RenderFrame, NonAdjacentPatternsLightDisjointPixelsPerBand) {
  const auto rig = make_desk_rig();
  RenderOptions opt;
  opt.projector_blur = false;
  const auto set = patterns_for(rig);
  const auto scene = colorchecker_scene();
  const Renderer r(scene, rig, opt);
  const ProjectedLight l1 = r.light(set.patterns[1].to_image()), l3 = r.light(set.patterns[3].to_image());
  for (int band : {0, 11, 22})
    for (int y = 0; y < 64; y += 7)
      for (int x = 0; x < 64; ++x) {
        double a[3], b[3];
        ASSERT_TRUE(r.shade(x, y, 0, l1, a, band));
        ASSERT_TRUE(r.shade(x, y, 0, l3, b, band));
        EXPECT_FALSE(a[1] > 0 && b[1] > 0);
      }
}

TEST(RenderFrame, RightViewSeesLeftShiftedByDisparity) {
  // z = 0.625 m gives disparity f*b/z = 100*0.1/0.625 = 16 px.
  const auto rig = make_desk_rig();
  auto scene = smooth_scene(64, 64, 0.625);
  scene.ambient.assign(23, 50.0);
  const auto f = render_frame(scene, patterns_for(rig).black.to_image(), rig, 0.0);
  for (int y = 0; y < 64; y += 3)
    for (int x = 0; x + 17 < 64; ++x) {  // interior: the last left column has no sample in front of it
      ASSERT_TRUE(f.right_valid[y * 64 + x]) << x << "," << y;
      // The projector sees the same surface point from both views.
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(f.right(x, y, c), f.left(x + 16, y, c), 1e-3 * max_abs(f.left));
    }
  EXPECT_FALSE(f.right_valid[10 * 64 + 60]);  // no surface to the right of the left view
}

TEST(RenderFrame, MissingDispersionCoverageMarksPixelsInvalid) {
  auto rig = make_desk_rig();
  const auto& d = rig.dispersion;
  std::vector<double> sx = {0.0, 16.0, 32.0};
  std::vector<PowerLaw> coeffs;
  for (std::size_t j = 0; j < d.grid().size(); ++j)
    for (std::size_t iy = 0; iy < d.site_y().size(); ++iy)
      for (std::size_t ix = 0; ix < 3; ++ix) coeffs.push_back(d.coeff(j, iy, ix));
  rig.dispersion = DispersionModel(d.grid(), sx, d.site_y(), coeffs, d.depth_min(), d.depth_max());
  const auto f = render_frame(colorchecker_scene(), patterns_for(rig).patterns[0].to_image(), rig, 0.0);
  EXPECT_TRUE(f.left_valid[5 * 64 + 32]);
  EXPECT_FALSE(f.left_valid[5 * 64 + 33]);
}

TEST(RenderFrame, SupersampledModeStaysCloseOnSmoothSpectra) {
  const auto rig = make_desk_rig();
  RenderOptions ss;
  ss.supersample = 5;
  const auto scene = flat_scene(64, 64, 0.5, 0.8);
  const Image pat = patterns_for(rig).patterns[2].to_image();
  const auto a = render_frame(scene, pat, rig, 0.0);
  const auto b = render_frame(scene, pat, rig, 0.0, ss);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.left.data().size(); ++i) {
    num += std::pow(a.left.data()[i] - b.left.data()[i], 2);
    den += std::pow(a.left.data()[i], 2);
  }
  EXPECT_GT(num, 0.0);
  EXPECT_LT(std::sqrt(num / den), 0.25);
}

TEST(RenderGroup, StaticGroupMatchesPerPatternFrames) {
  const auto rig = make_desk_rig();
  auto scene = flat_scene(64, 64, 0.7, 0.8);
  scene.ambient.assign(23, 2.0);
  const auto params = pattern_params_for(rig);
  const auto g = render_group(scene, params, rig, 5);
  ASSERT_EQ(g.frames.size(), 9u);
  const auto set = generate_patterns(params);
  for (int i = 0; i < params.count; ++i) {
    const auto f = render_frame(scene, set.patterns[i].to_image(), rig, 0.0);
    EXPECT_EQ(f.left.data(), g.frames[i].left.data());
  }
  // Black frame: ambient only, sum_c cam * H * amb / d^2.
  const Image& black = g.frames.back().left;
  for (int y = 0; y < 64; y += 9)
    for (int x = 0; x < 64; x += 9) {
      const Eigen::Vector3d X = rig.left.unproject(x, y, 0.8);
      const double d2 = (X - rig.projector.center()).squaredNorm();
      for (int c = 0; c < 3; ++c) {
        double e = 0;
        for (std::size_t j = 0; j < 23; ++j) e += rig.tables.cam[c][j] * 0.7 * 2.0 / d2;
        EXPECT_NEAR(black(x, y, c), e, 1e-4 * e);
      }
    }
  EXPECT_EQ(g.black_context[g.reference_black].data(), black.data());
}

TEST(RenderGroup, ConstantVelocityIsAnAnalyticWarp) {
  const auto rig = make_desk_rig();
  auto scene = smooth_scene(64, 64, 0.8);
  scene.ambient.assign(23, 40.0);
  scene.motion.velocity = {2.0, 0.0};
  const auto params = pattern_params_for(rig);
  const Renderer r(scene, rig);
  const ProjectedLight black = r.light(generate_patterns(params).black.to_image());
  const auto f0 = r.render(black, 0.0);
  // Expected frame i: frame 0 at p - (2i, 0), re-weighted by the inverse
  // square falloff at the new pixel.
  auto d2 = [&](double x, double y) {
    return (rig.left.unproject(x, y, 0.8) - rig.projector.center()).squaredNorm();
  };
  for (int i = 1; i <= params.count; ++i) {
    const auto fi = r.render(black, i);
    double num = 0, den = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 2 * i; x < 64; ++x)
        for (int c = 0; c < 3; ++c) {
          const double expect = f0.left(x - 2 * i, y, c) * d2(x - 2 * i, y) / d2(x, y);
          num += std::pow(fi.left(x, y, c) - expect, 2);
          den += expect * expect;
        }
    EXPECT_LT(std::sqrt(num / den), 1e-3) << "frame " << i;
  }
  const auto g = render_group(scene, params, rig);
  ASSERT_EQ(g.oracle_black_flows.size(), 3u);
  EXPECT_FLOAT_EQ(g.oracle_black_flows[1].dx(5, 5), 18.0f);
}

TEST(RenderGroup, SameSeedIsBitIdentical) {
  const auto rig = make_desk_rig();
  RenderOptions opt;
  opt.noise_sigma = 0.5;
  auto scene = colorchecker_scene();
  scene.motion.velocity = {1.0, 0.5};
  const auto params = pattern_params_for(rig);
  const auto a = render_group(scene, params, rig, 42, opt);
  const auto b = render_group(scene, params, rig, 42, opt);
  const auto c = render_group(scene, params, rig, 43, opt);
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    EXPECT_EQ(a.frames[i].left.data(), b.frames[i].left.data());
    EXPECT_EQ(a.frames[i].right.data(), b.frames[i].right.data());
  }
  EXPECT_NE(a.frames[0].left.data(), c.frames[0].left.data());
}

TEST(Scenes, ReflectanceInRangeAndValidated) {
  for (const auto& s : {colorchecker_scene(), stair_scene(64, 64), smooth_scene(64, 64),
                        narrowband_scene(64, 64, {460, 500, 540})})
    EXPECT_NO_THROW(s.validate());
  auto s = colorchecker_scene();
  s.reflectance(0, 0, 0) = 1.5f;
  EXPECT_THROW(s.validate(), ParamError);
  auto m = colorchecker_scene();
  m.motion.velocity.x() = std::nan("");
  EXPECT_THROW(m.validate(), ParamError);
}

TEST(Scenes, NarrowbandSpectrumHasRequestedWidth) {
  const WavelengthGrid fine(400, 0.01, 30001);
  const auto s = narrowband_spectrum(fine, 550, 10);
  double lo = 0, hi = 0;
  for (std::size_t j = 0; j < fine.size(); ++j)
    if (s[j] >= 0.45) {
      if (lo == 0) lo = fine.wavelength(j);
      hi = fine.wavelength(j);
    }
  EXPECT_NEAR(hi - lo, 10.0, 0.03);
}
