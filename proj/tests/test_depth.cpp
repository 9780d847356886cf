#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ddsl/depth/stereo.hpp"
#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/setup.hpp"

using namespace ddsl;
using namespace ddsl::depth;

namespace {

Eigen::Matrix3d rot(double ax, double ay, double az) {
  return (Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

PinholeCamera camera(double f, int w, int h, const Eigen::Matrix3d& R, const Eigen::Vector3d& c) {
  PinholeCamera cam;
  cam.K = make_intrinsics(f, f, 0.5 * (w - 1), 0.5 * (h - 1));
  cam.E = extrinsics_at(R, c);
  cam.width = w;
  cam.height = h;
  return cam;
}

double texture(double x, double y) {
  return 10.0 + 3.0 * std::sin(0.71 * x + 0.37 * y) + 2.0 * std::cos(0.53 * x - 0.29 * y + 1.0) +
         1.5 * std::sin(1.3 * x + 0.41 * y + 2.0);
}

RectifiedPair shifted_pair(int w, int h, double disparity) {
  RectifiedPair p;
  p.left = make_rgb(w, h);
  p.right = make_rgb(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        p.left(x, y, c) = static_cast<float>(texture(x, y));
        p.right(x, y, c) = static_cast<float>(texture(x + disparity, y));
      }
  p.left_valid.assign(p.left.pixel_count(), 1);
  p.right_valid.assign(p.right.pixel_count(), 1);
  return p;
}

}  // namespace

TEST(Rectification, RectifiedRigGetsIdentityHomographies) {
  const auto rig = sim::make_desk_rig();
  const auto r = compute_rectification(rig.left, rig.right);
  EXPECT_LT((r.H_left - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_LT((r.H_right - Eigen::Matrix3d::Identity()).norm(), 1e-12);
  EXPECT_NEAR(r.baseline, 0.1, 1e-15);
  EXPECT_EQ(r.focal, rig.left.K(0, 0));
}

TEST(Rectification, RotatedRigIsRowAligned) {
  const double deg = 3.14159265358979323846 / 180.0;
  const auto left = camera(500, 320, 240, rot(0.5 * deg, -1.0 * deg, 0.3 * deg), {0.02, -0.01, 0.0});
  const auto right = camera(480, 320, 240, rot(-1.0 * deg, 5.0 * deg, 0.8 * deg), {0.14, 0.0, 0.01});
  const auto r = compute_rectification(left, right);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1), uz(0.5, 2.0);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d X(0.6 * u(rng), 0.4 * u(rng), uz(rng));
    const auto pl = left.project(X), pr = right.project(X);
    const auto ql = r.left_to_rect(pl.x(), pl.y()), qr = r.right_to_rect(pr.x(), pr.y());
    EXPECT_NEAR(ql.y(), qr.y(), 0.1);
    // Rectified disparity is f b / z in the rectified frame.
    const double zr = (r.R * (X - r.left_center)).z();
    EXPECT_NEAR(ql.x() - qr.x(), r.focal * r.baseline / zr, 1e-6);
  }
}

TEST(Rectification, ZeroBaselineThrows) {
  const auto left = camera(100, 64, 64, Eigen::Matrix3d::Identity(), {0.0, 0.0, 0.0});
  auto right = left;
  EXPECT_THROW(compute_rectification(left, right), RigError);
}

TEST(DisparityToDepth, AnalyticExamples) {
  RectificationPair r;
  r.focal = 1000.0;
  r.baseline = 0.1;
  DisparityMap d(3, 1);
  d.at(0, 0) = 50.0f, d.valid[0] = 1;
  d.at(1, 0) = 100.0f, d.valid[1] = 1;
  d.at(2, 0) = 0.0f, d.valid[2] = 1;
  const DepthMap z = disparity_to_depth(d, r);
  EXPECT_NEAR(z.z(0, 0), 2.0, 1e-6);
  EXPECT_NEAR(z.z(1, 0), 1.0, 1e-6);
  EXPECT_TRUE(z.is_valid(0, 0));
  EXPECT_FALSE(z.is_valid(2, 0));
}

TEST(BlockMatching, IdenticalImagesGiveZeroDisparity) {
  const RectifiedPair p = shifted_pair(48, 32, 0.0);
  BlockMatchingOptions o;
  o.max_disparity = 8;
  const DisparityMap d = block_matching(p, o);
  int valid = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x)
      if (d.valid[y * 48 + x]) {
        ++valid;
        EXPECT_NEAR(d.at(x, y), 0.0, 1e-6);
      }
  EXPECT_GT(valid, 48 * 32 / 2);
}

TEST(BlockMatching, FrontoParallelPlaneMatchesStereoFormula) {
  const double f = 100.0, b = 0.1;
  for (double z : {0.65, 0.8, 1.1}) {
    const double expect = f * b / z;
    const RectifiedPair p = shifted_pair(64, 48, expect);
    BlockMatchingOptions o;
    o.max_disparity = 24;
    const DisparityMap d = block_matching(p, o);
    int valid = 0;
    for (int y = 0; y < 48; ++y)
      for (int x = 24; x < 64; ++x)
        if (d.valid[y * 64 + x]) {
          ++valid;
          EXPECT_NEAR(d.at(x, y), expect, 0.25) << z;
        }
    EXPECT_GT(valid, 40 * 48 / 2) << z;
  }
}

TEST(BlockMatching, TexturelessRegionsAreInvalid) {
  RectifiedPair p = shifted_pair(32, 32, 0.0);
  for (int c = 0; c < 3; ++c)
    for (float& v : p.left.plane(c)) v = 7.0f;
  p.right = p.left;
  const DisparityMap d = block_matching(p, {});
  for (auto v : d.valid) EXPECT_EQ(v, 0);
}

TEST(OracleDisparity, ExactOnRectifiedRig) {
  const auto rig = sim::make_desk_rig();
  const auto r = compute_rectification(rig.left, rig.right);
  const DepthMap truth = sim::plane_depth(64, 64, 0.8);
  const DisparityMap d = oracle_disparity(truth, rig.left, r);
  const float expect = static_cast<float>(r.focal * r.baseline / static_cast<double>(0.8f));
  for (std::size_t i = 0; i < d.d.size(); ++i) {
    ASSERT_TRUE(d.valid[i]);
    EXPECT_FLOAT_EQ(d.d[i], expect);
  }
}

TEST(Unrectify, IdentityLeavesDepthUnchanged) {
  const auto rig = sim::make_desk_rig();
  const auto r = compute_rectification(rig.left, rig.right);
  DepthMap z = sim::plane_depth(64, 64, 0.7, 0.002);
  z.invalidate(10, 12);
  const DepthMap u = unrectify(z, r, rig.left);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      EXPECT_EQ(u.is_valid(x, y), z.is_valid(x, y));
      if (z.is_valid(x, y)) EXPECT_NEAR(u.z(x, y), z.z(x, y), 1e-6);
    }
}

TEST(Unrectify, RotatedRigRecoversPlaneDepth) {
  const double deg = 3.14159265358979323846 / 180.0;
  const auto left = camera(500, 160, 120, rot(0.0, 2.0 * deg, 0.0), {0.0, 0.0, 0.0});
  const auto right = camera(500, 160, 120, rot(0.0, -3.0 * deg, 0.5 * deg), {0.1, 0.0, 0.0});
  const auto r = compute_rectification(left, right);
  // Plane z_world = 2 + 0.1 x_world, expressed as left-camera depth per pixel.
  DepthMap truth(160, 120);
  const Eigen::Vector3d n(-0.1, 0.0, 1.0);
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x) {
      const Eigen::Vector3d ray = left.unproject(x, y, 1.0) - left.center();
      const double s = 2.0 / n.dot(ray);
      truth.set(x, y, left.to_camera(left.center() + s * ray).z());
    }
  truth.invalidate(80, 60);
  const DepthMap u = unrectify(disparity_to_depth(oracle_disparity(truth, left, r), r), r, left);
  int checked = 0;
  for (int y = 0; y < 120; ++y)
    for (int x = 0; x < 160; ++x) {
      if (!u.is_valid(x, y)) continue;
      ++checked;
      EXPECT_NEAR(u.z(x, y), truth.z(x, y), 1e-3) << x << "," << y;
    }
  EXPECT_GT(checked, 160 * 120 * 3 / 4);
  EXPECT_FALSE(u.is_valid(80, 60));
}

TEST(DepthPipeline, OracleStairsReproduceTruth) {
  const auto rig = sim::make_desk_rig();
  const auto scene = sim::stair_scene(64, 64);
  const Image white(rig.projector.width, rig.projector.height, 3, 1.0f);
  const auto frame = sim::render_frame(scene, white, rig, 0.0);
  DepthOptions o;
  o.source = DisparitySource::oracle;
  const DepthMap z = estimate_depth(frame, rig.left, rig.right, 0.4, 1.2, o, &scene.depth);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      ASSERT_TRUE(z.is_valid(x, y));
      EXPECT_LT(std::abs(z.z(x, y) - scene.depth.z(x, y)) / scene.depth.z(x, y), 1e-3);
    }
}

// Block matching needs stair bands several windows wide; 128 px gives 32 px
// bands for a 9 px window.
class StairBlockMatching : public ::testing::Test {
 protected:
  static constexpr int kSize = 128;
  void SetUp() override {
    sim::DeskRigOptions ro;
    ro.width = ro.height = kSize;
    rig = sim::make_desk_rig(ro);
    scene = sim::stair_scene(kSize, kSize);
    patterns = generate_patterns(sim::pattern_params_for(rig));
  }
  DepthMap depth_under(std::size_t k) const {
    const auto frame = sim::render_frame(scene, patterns.patterns[k].to_image(), rig, 0.0);
    return estimate_depth(frame, rig.left, rig.right, 0.4, 1.2);
  }
  CalibrationBundle rig;
  sim::SceneSpec scene;
  PatternSet patterns;
};

TEST_F(StairBlockMatching, MeanRelativeErrorBelowOnePercent) {
  for (std::size_t k : {std::size_t{0}, patterns.patterns.size() / 2}) {
    const DepthMap z = depth_under(k);
    double sum = 0;
    int n = 0;
    for (int y = 0; y < kSize; ++y)
      for (int x = 0; x < kSize; ++x)
        if (z.is_valid(x, y)) {
          sum += std::abs(z.z(x, y) - scene.depth.z(x, y)) / scene.depth.z(x, y);
          ++n;
        }
    EXPECT_GT(n, kSize * kSize / 2) << k;
    EXPECT_LT(sum / n, 0.01) << k;
  }
}

TEST_F(StairBlockMatching, DepthAgreesAcrossPatterns) {
  std::vector<DepthMap> zs;
  for (std::size_t k = 0; k < patterns.patterns.size(); ++k) zs.push_back(depth_under(k));
  // Per pixel (max - min) / mean over every frame, averaged over pixels valid in all.
  double sum = 0;
  int n = 0;
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x) {
      double lo = 1e30, hi = 0, mean = 0;
      bool ok = true;
      for (const auto& z : zs) {
        if (!z.is_valid(x, y)) {
          ok = false;
          break;
        }
        lo = std::min<double>(lo, z.z(x, y));
        hi = std::max<double>(hi, z.z(x, y));
        mean += z.z(x, y) / zs.size();
      }
      if (!ok) continue;
      sum += (hi - lo) / mean;
      ++n;
    }
  EXPECT_GT(n, kSize * kSize / 2);
  EXPECT_LT(sum / n, 0.005);
}
