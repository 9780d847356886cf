#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "ddsl/core/grid.hpp"
#include "ddsl/core/image.hpp"
#include "ddsl/core/io.hpp"
#include "ddsl/core/parallel.hpp"
#include "ddsl/core/srgb.hpp"

namespace fs = std::filesystem;
using namespace ddsl;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ddsl_test_core";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST(WavelengthGrid, DefaultsSpan440To660In23Bands) {
  const WavelengthGrid g;
  EXPECT_EQ(g.size(), 23u);
  EXPECT_EQ(g.lambda_min(), 440.0);
  EXPECT_EQ(g.step(), 10.0);
  EXPECT_EQ(g.lambda_max(), 660.0);
  EXPECT_EQ(g.lambda_min() + (g.size() - 1) * g.step(), g.lambda_max());
}

TEST(WavelengthGrid, BandIndexExamples) {
  const WavelengthGrid g;
  EXPECT_EQ(band_index(g, 440.0), 0u);
  EXPECT_EQ(band_index(g, 660.0), 22u);
  EXPECT_EQ(band_index(g, 500.0), 6u);
}

TEST(WavelengthGrid, BandIndexInvertsWavelength) {
  const WavelengthGrid grids[] = {WavelengthGrid(), WavelengthGrid(400.5, 2.5, 97), WavelengthGrid(700, 0.1, 11)};
  for (const auto& g : grids)
    for (std::size_t j = 0; j < g.size(); ++j) EXPECT_EQ(g.band_index(g.wavelength(j)), j);
}

TEST(WavelengthGrid, OffGridWavelengthsThrow) {
  const WavelengthGrid g;
  EXPECT_THROW(band_index(g, 445.0), GridError);
  EXPECT_THROW(band_index(g, 430.0), GridError);
  EXPECT_THROW(band_index(g, 670.0), GridError);
  EXPECT_THROW(band_index(g, 500.0 + 1e-6), GridError);
  EXPECT_EQ(band_index(g, 500.0 + 1e-10), 6u);
  EXPECT_THROW(WavelengthGrid(440, 0, 5), GridError);
  EXPECT_THROW(WavelengthGrid(440, 10, 0), GridError);
}

TEST(HscFormat, OnesCubeRoundTrips) {
  HyperspectralCube cube(1, 1, WavelengthGrid(), 1.0f);
  const auto p = temp_file("ones.hsc");
  io::write_cube(p, cube);
  const HyperspectralCube back = io::read_cube(p);
  EXPECT_EQ(back.width(), 1);
  EXPECT_EQ(back.height(), 1);
  EXPECT_TRUE(back.grid() == cube.grid());
  EXPECT_EQ(back.values().data(), cube.values().data());
}

TEST(HscFormat, RandomCubeIsBitIdentical) {
  HyperspectralCube cube(64, 64, WavelengthGrid());
  std::mt19937 rng(3);
  std::uniform_int_distribution<std::uint32_t> bits;
  for (float& v : cube.values().data()) {
    // Arbitrary bit patterns, including denormals and NaN payloads.
    v = std::bit_cast<float>(bits(rng));
  }
  const auto p = temp_file("random.hsc");
  io::write_cube(p, cube);
  const HyperspectralCube back = io::read_cube(p);
  ASSERT_EQ(back.values().data().size(), cube.values().data().size());
  EXPECT_EQ(std::memcmp(back.values().data().data(), cube.values().data().data(),
                        cube.values().data().size() * sizeof(float)),
            0);
  // Stray NaNs are data, not invalid pixels: writing again gives the same bytes.
  EXPECT_TRUE(back.valid().empty());
  const auto p2 = temp_file("random2.hsc");
  io::write_cube(p2, back);
  std::ifstream a(p, std::ios::binary), b(p2, std::ios::binary);
  const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
  EXPECT_EQ(sa, sb);
}

TEST(HscFormat, CubeValidityTravelsAsNaN) {
  HyperspectralCube cube(3, 2, WavelengthGrid(), 0.25f);
  cube.valid().assign(6, 1);
  cube.valid()[4] = 0;
  const auto p = temp_file("masked.hsc");
  io::write_cube(p, cube);
  const HyperspectralCube back = io::read_cube(p);
  EXPECT_EQ(back.valid(), cube.valid());
  EXPECT_TRUE(std::isnan(back(1, 1, 5)));
  EXPECT_EQ(back(0, 1, 5), 0.25f);

  io::write_cube(p, HyperspectralCube(3, 2, WavelengthGrid(), 0.25f));
  EXPECT_TRUE(io::read_cube(p).valid().empty());
}

TEST(HscFormat, HeaderLayoutMatchesDocumentedBytes) {
  // Hand-assembled file: "HSC1", u32 2, 1, 1, f64 500, 10, f32 1.5 and -2.
  std::vector<unsigned char> bytes = {'H', 'S', 'C', '1', 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
  auto push = [&](auto v) {
    unsigned char b[sizeof(v)];
    std::memcpy(b, &v, sizeof(v));
    bytes.insert(bytes.end(), b, b + sizeof(v));
  };
  push(500.0);
  push(10.0);
  push(1.5f);
  push(-2.0f);
  const auto p = temp_file("manual.hsc");
  spit(p, bytes);
  const HyperspectralCube c = io::read_cube(p);
  EXPECT_EQ(c.width(), 2);
  EXPECT_EQ(c.height(), 1);
  EXPECT_EQ(c.grid().lambda_min(), 500.0);
  EXPECT_EQ(c(0, 0, 0), 1.5f);
  EXPECT_EQ(c(1, 0, 0), -2.0f);
  io::write_cube(p, c);
  EXPECT_EQ(slurp(p), bytes);
}

TEST(HscFormat, CorruptFilesRaiseFormatError) {
  HyperspectralCube cube(3, 2, WavelengthGrid(), 0.5f);
  const auto p = temp_file("corrupt.hsc");
  io::write_cube(p, cube);
  const auto good = slurp(p);

  auto bad = good;
  bad[0] = 'X';
  spit(p, bad);
  EXPECT_THROW(io::read_cube(p), FormatError);

  bad = good;
  bad.resize(bad.size() - 3);
  spit(p, bad);
  EXPECT_THROW(io::read_cube(p), FormatError);

  bad = good;
  bad[4] = 4;  // width 4 instead of 3: payload now too short
  spit(p, bad);
  EXPECT_THROW(io::read_cube(p), FormatError);

  bad = good;
  bad[4] = 2;  // width 2: payload longer than declared
  spit(p, bad);
  EXPECT_THROW(io::read_cube(p), FormatError);

  bad.assign(good.begin(), good.begin() + 10);
  spit(p, bad);
  EXPECT_THROW(io::read_cube(p), FormatError);
}

TEST(HscFormat, DepthAndFlowKeepValidity) {
  DepthMap d(4, 3, 0.7f);
  d.invalidate(1, 2);
  d.set(3, 0, 1.25);
  const auto pd = temp_file("depth.hsc");
  io::write_depth(pd, d);
  const DepthMap d2 = io::read_depth(pd);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(d2.is_valid(x, y), d.is_valid(x, y));
      if (d.is_valid(x, y)) EXPECT_EQ(d2.z(x, y), d.z(x, y));
    }

  FlowField f(5, 2, 1.5f, -0.25f);
  f.set_valid(4, 1, false);
  const auto pf = temp_file("flow.hsc");
  io::write_flow(pf, f);
  const FlowField f2 = io::read_flow(pf);
  EXPECT_FALSE(f2.is_valid(4, 1));
  EXPECT_EQ(f2.dx(0, 0), 1.5f);
  EXPECT_EQ(f2.dy(3, 1), -0.25f);
  EXPECT_THROW(io::read_depth(pf), FormatError);
}

TEST(HscFormat, PngExportWritesSignature) {
  RgbImage img = make_rgb(4, 4, 0.5f);
  const auto p = temp_file("img.png");
  io::write_png(p, img, 1.0, true);
  const auto bytes = slurp(p);
  ASSERT_GT(bytes.size(), 8u);
  EXPECT_EQ(bytes[1], 'P');
  EXPECT_EQ(bytes[2], 'N');
  EXPECT_EQ(bytes[3], 'G');
}

TEST(Srgb, ZeroCubeIsBlack) {
  HyperspectralCube cube(3, 3, WavelengthGrid());
  const RgbImage rgb = cube_to_srgb(cube);
  for (float v : rgb.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Srgb, LinearBeforeClamp) {
  HyperspectralCube cube(2, 1, WavelengthGrid());
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(0, 1);
  for (float& v : cube.values().data()) v = u(rng);
  const RgbImage a = cube_to_linear_rgb(cube);
  for (float& v : cube.values().data()) v *= 3.0f;
  const RgbImage b = cube_to_linear_rgb(cube);
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_NEAR(b.data()[i], 3.0f * a.data()[i], 1e-5);
}

TEST(Srgb, FlatSpectrumIsNeutral) {
  HyperspectralCube cube(1, 1, WavelengthGrid(), 0.6f);
  const RgbImage rgb = cube_to_srgb(cube);
  const double r = rgb(0, 0, 0), g = rgb(0, 0, 1), b = rgb(0, 0, 2);
  EXPECT_NEAR(r / g, 1.0, 0.1);
  EXPECT_NEAR(b / g, 1.0, 0.1);
  EXPECT_NEAR(g, 0.6, 1e-5);
}

TEST(Srgb, NarrowbandColoursHaveExpectedHue) {
  HyperspectralCube cube(3, 1, WavelengthGrid());
  cube(0, 0, band_index(cube.grid(), 450)) = 1.0f;
  cube(1, 0, band_index(cube.grid(), 540)) = 1.0f;
  cube(2, 0, band_index(cube.grid(), 630)) = 1.0f;
  const RgbImage rgb = cube_to_linear_rgb(cube);
  EXPECT_GT(rgb(0, 0, 2), rgb(0, 0, 0));
  EXPECT_GT(rgb(1, 0, 1), rgb(1, 0, 2));
  EXPECT_GT(rgb(2, 0, 0), rgb(2, 0, 1));
}

TEST(Srgb, RequiresStandardGrid) {
  HyperspectralCube cube(1, 1, WavelengthGrid(400, 10, 31));
  EXPECT_THROW(cube_to_srgb(cube), GridError);
}

TEST(ImageTypes, LayoutIsBandMajorRowMajor) {
  Image img(3, 2, 2);
  img(2, 1, 1) = 7.0f;
  EXPECT_EQ(img.data()[(1 * 2 + 1) * 3 + 2], 7.0f);
  HyperspectralCube cube(3, 2, WavelengthGrid());
  cube(1, 0, 4) = 2.0f;
  EXPECT_EQ(cube.values().plane(4)[1], 2.0f);
}

TEST(ImageTypes, DepthSampleRejectsInvalidNeighbours) {
  DepthMap d(3, 3, 1.0f);
  d.set(1, 1, 2.0);
  double z = 0;
  ASSERT_TRUE(d.sample(0.5, 0.0, z));
  EXPECT_DOUBLE_EQ(z, 1.0);
  ASSERT_TRUE(d.sample(0.5, 1.0, z));
  EXPECT_DOUBLE_EQ(z, 1.5);
  d.invalidate(2, 2);
  EXPECT_FALSE(d.sample(1.5, 1.5, z));
  EXPECT_TRUE(d.sample(1.0, 1.0, z));
  EXPECT_FALSE(d.sample(-0.1, 0.0, z));
  d.set(0, 0, -1.0);
  EXPECT_FALSE(d.is_valid(0, 0));
}

TEST(Parallel, EveryIndexRunsOnceUnderAnyThreadCap) {
  for (const char* cap : {"1", "3", "64"}) {
    setenv("DDSL_THREADS", cap, 1);
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(0, 1000, [&](int i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  setenv("DDSL_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  unsetenv("DDSL_THREADS");
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(parallel_for(0, 10, [](int i) {
                 if (i == 7) throw ParamError("boom");
               }),
               ParamError);
}
