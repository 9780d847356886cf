#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddsl/cli/datasets.hpp"
#include "ddsl/simulator/captures.hpp"
#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/setup.hpp"

namespace fs = std::filesystem;
using namespace ddsl;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ddsl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Bit patterns must match; NaN marks invalid pixels on disk so compare bits.
bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

FrameGroup small_group(int w, int h, const sim::Motion& m = {}) {
  sim::DeskRigOptions o;
  o.width = w;
  o.height = h;
  const auto rig = sim::make_desk_rig(o);
  auto scene = sim::colorchecker_scene(w, h, 0.8, rig.tables.grid);
  scene.motion = m;
  sim::RenderOptions ro;
  ro.noise_sigma = 0.5;
  return sim::render_group(scene, sim::pattern_params_for(rig), rig, 3, ro);
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + DDSL_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

nlohmann::json slurp(const fs::path& p) { return read_json(p); }

}  // namespace

TEST(Datasets, GroupRoundTripIsBitExact) {
  sim::Motion m;
  m.velocity = {-1.0, 0.5};
  const FrameGroup g = small_group(24, 20, m);
  const fs::path dir = scratch("group");
  cli::save_group(dir, g, {{"a", 1, 2, 5, 6}});
  const FrameGroup r = cli::load_group(dir);

  EXPECT_EQ(r.params.line_offset, g.params.line_offset);
  EXPECT_EQ(r.params.proj_width, g.params.proj_width);
  EXPECT_EQ(r.frame_times, g.frame_times);
  EXPECT_EQ(r.black_times, g.black_times);
  EXPECT_EQ(r.reference_black, g.reference_black);
  EXPECT_EQ(r.seed, g.seed);
  EXPECT_EQ(r.noise_sigma, g.noise_sigma);
  ASSERT_EQ(r.frames.size(), g.frames.size());
  for (std::size_t i = 0; i < g.frames.size(); ++i) {
    EXPECT_EQ(r.frames[i].left_valid, g.frames[i].left_valid) << i;
    EXPECT_EQ(r.frames[i].right_valid, g.frames[i].right_valid) << i;
    // Valid samples identical; invalid ones are not meaningful.
    for (std::size_t k = 0; k < g.frames[i].left.data().size(); ++k) {
      const std::size_t px = k % g.frames[i].left_valid.size();
      if (g.frames[i].left_valid[px]) ASSERT_EQ(r.frames[i].left.data()[k], g.frames[i].left.data()[k]);
    }
  }
  ASSERT_EQ(r.black_context.size(), g.black_context.size());
  for (std::size_t k = 0; k < g.black_context.size(); ++k)
    EXPECT_TRUE(same_bits(r.black_context[k].data(), g.black_context[k].data()));
  ASSERT_EQ(r.oracle_black_flows.size(), g.oracle_black_flows.size());
  ASSERT_TRUE(r.truth_cube && r.truth_depth);
  EXPECT_TRUE(same_bits(r.truth_cube->values().data(), g.truth_cube->values().data()));
  EXPECT_EQ(r.truth_depth->valid(), g.truth_depth->valid());

  const auto t = cli::targets_from_json(slurp(dir / "targets.json"));
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t[0].name, "a");
  EXPECT_EQ(t[0].x1, 5);
}

TEST(Datasets, MissingOrCorruptGroupRaisesDataErrors) {
  const fs::path dir = scratch("bad_group");
  EXPECT_THROW(cli::load_group(dir), Error);
  cli::save_group(dir, small_group(16, 16), {});
  fs::remove(dir / "frame_03_left.hsc");
  try {
    cli::load_group(dir);
    FAIL() << "missing frame accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.error_class(), ErrorClass::data);
  }
  std::ofstream(dir / "group.json") << "{\"format\": \"something-else\"}";
  EXPECT_THROW(cli::load_group(dir), Error);
}

TEST(Datasets, MotionAndPatternJson) {
  sim::Motion m;
  m.velocity = {1, 2};
  m.acceleration = {-0.5, 0};
  m.jerk = {0, 0.125};
  const auto back = cli::motion_from_json(cli::motion_to_json(m));
  EXPECT_EQ(back.velocity, m.velocity);
  EXPECT_EQ(back.acceleration, m.acceleration);
  EXPECT_EQ(back.jerk, m.jerk);
  EXPECT_THROW(cli::motion_from_json({{"velocity", {1}}}), FormatError);
  EXPECT_THROW(cli::motion_from_json({{"speed", {1, 2}}}), FormatError);

  PatternParams p;
  p.proj_width = 400;
  const auto q = cli::pattern_params_from_json(nlohmann::json(p));
  EXPECT_EQ(q.proj_width, 400);
  EXPECT_EQ(q.count, p.count);
  EXPECT_THROW(cli::pattern_params_from_json({{"lines", 3}}), FormatError);
}

TEST(Datasets, CalibrationCapturesRoundTrip) {
  sim::DeskRigOptions o;
  o.width = 32;
  o.height = 32;
  const auto rig = sim::make_desk_rig(o);
  cli::CalibrationCaptures c;
  c.geometry = rig;
  c.initial = rig.tables;
  sim::ScanlineCaptureOptions so;
  so.noise_sigma = 0.1;
  c.scanlines = sim::simulate_scanline_captures(rig, so);
  c.eta = sim::simulate_eta_captures(rig, 0.8, 0.0, 1);
  c.refinement = sim::simulate_refinement_captures(rig, 0.8, 4, 0.0, 1);
  const fs::path dir = scratch("captures");
  cli::save_calibration_captures(dir, c);
  const auto r = cli::load_calibration_captures(dir);

  EXPECT_EQ(r.scanlines.site_x, c.scanlines.site_x);
  EXPECT_EQ(r.scanlines.depths, c.scanlines.depths);
  EXPECT_EQ(r.scanlines.site_depth, c.scanlines.site_depth);
  EXPECT_EQ(r.scanlines.scan_columns, c.scanlines.scan_columns);
  EXPECT_TRUE(same_bits(r.scanlines.profiles, c.scanlines.profiles));
  ASSERT_EQ(r.eta.images.size(), c.eta.images.size());
  for (std::size_t j = 0; j < c.eta.images.size(); ++j)
    EXPECT_TRUE(same_bits(r.eta.images[j].data(), c.eta.images[j].data()));
  EXPECT_EQ(r.eta.zero_roi, c.eta.zero_roi);
  EXPECT_EQ(r.eta.first_roi, c.eta.first_roi);
  ASSERT_EQ(r.refinement.points.size(), c.refinement.points.size());
  EXPECT_EQ(r.refinement.intensities, c.refinement.intensities);
  EXPECT_EQ(r.refinement.points[0].reflectance, c.refinement.points[0].reflectance);
  EXPECT_EQ(r.initial.cam, c.initial.cam);
  EXPECT_EQ(r.geometry.left.width, 32);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("reconstruct --out x"), 1);
  EXPECT_EQ(run("simulate --out x --set noequals"), 1);
  const fs::path dir = scratch("threads");
  EXPECT_EQ(run("gen-patterns --out " + dir.string(), "DDSL_THREADS=zero"), 1);
  EXPECT_EQ(run("gen-patterns --out " + dir.string(), "DDSL_THREADS=0"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, HelpListsEveryConfigKey) {
  const fs::path out = scratch("help") / "help.txt";
  const std::string cmd = std::string(DDSL_CLI_PATH) + " reconstruct --help > " + out.string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  std::stringstream ss;
  ss << std::ifstream(out).rdbuf();
  for (const char* key : {"kappa_lambda", "kappa_xy", "iterations", "blur_sigma", "tile_size", "disparity",
                          "flow_oracle", "flow_window", "bm_radius", "pattern_depths"})
    EXPECT_NE(ss.str().find(key), std::string::npos) << key;
}

TEST(Cli, DataAndConfigErrorsExitTwo) {
  const fs::path dir = scratch("data_errors");
  EXPECT_EQ(run("simulate --out " + (dir / "s").string() + " --set bogus=1"), 2);
  EXPECT_EQ(run("simulate --out " + (dir / "s").string() + " --set width=\\\"wide\\\""), 2);
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_EQ(run("report --report " + (dir / "bad.json").string() + " --out " + (dir / "r").string()), 2);
  std::ofstream(dir / "cfg.json") << "{\"line_width\": -3}";
  EXPECT_EQ(run("gen-patterns --out " + (dir / "p").string() + " --config " + (dir / "cfg.json").string()), 2);
  fs::create_directories(dir / "empty");
  EXPECT_EQ(run("reconstruct --frames " + (dir / "empty").string() + " --bundle " + (dir / "cfg.json").string() +
                " --out " + (dir / "o").string()),
            2);
}

TEST(Cli, PipelineEndToEnd) {
  const fs::path dir = scratch("pipeline");
  const std::string d = dir.string();
  ASSERT_EQ(run("simulate --out " + d + "/sim --set width=24 --set height=24 --set captures=true"), 0);
  ASSERT_EQ(run("gen-patterns --out " + d + "/pat --bundle " + d + "/sim/bundle.json"), 0);
  EXPECT_TRUE(fs::exists(dir / "pat/pattern_08.png"));
  EXPECT_TRUE(fs::exists(dir / "pat/pattern_black.png"));
  ASSERT_EQ(run("calibrate --captures " + d + "/sim/captures --out " + d + "/cal --set iterations=500"), 0);
  ASSERT_EQ(run("reconstruct --frames " + d + "/sim --bundle " + d + "/sim/bundle.json --out " + d +
                "/rec --disparity oracle --flow-oracle --set pattern_depths=true --set iterations=300"),
            0);
  ASSERT_EQ(run("evaluate --recon " + d + "/rec --truth " + d + "/sim --out " + d + "/ev"), 0);
  ASSERT_EQ(run("report --report " + d + "/ev/report.json --out " + d + "/rep"), 0);

  const auto rep = slurp(dir / "ev/report.json");
  EXPECT_LT(rep.at("rmse_relative").get<double>(), 0.02);
  for (const char* f : {"summary.csv", "band_rmse.csv", "spectra.csv", "spectra.png", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / "rep" / f)) << f;

  // Manifests hash their inputs.
  const auto man = slurp(dir / "rec/manifest.json");
  EXPECT_EQ(man.at("command"), "reconstruct");
  EXPECT_EQ(man.at("config").at("disparity"), "oracle");
  EXPECT_EQ(man.at("config").at("flow_oracle"), true);
  bool saw_bundle = false;
  for (const auto& e : man.at("inputs")) {
    EXPECT_EQ(e.at("sha256").get<std::string>().size(), 64u);
    if (e.at("path").get<std::string>().ends_with("bundle.json")) saw_bundle = true;
  }
  EXPECT_TRUE(saw_bundle);
  EXPECT_FALSE(man.at("outputs").empty());

  const auto cal = slurp(dir / "cal/calibration_report.json");
  EXPECT_LT(cal.at("dispersion_rms_px").get<double>(), 0.66);
  EXPECT_LT(cal.at("refinement_final_misfit").get<double>(), cal.at("refinement_initial_misfit").get<double>());
}

TEST(Cli, SimulationIsDeterministicAcrossThreadCounts) {
  const fs::path dir = scratch("determinism");
  const std::string d = dir.string();
  const std::string args = " --set width=20 --set height=20 --set noise_sigma=1.0 --set seed=9";
  ASSERT_EQ(run("simulate --out " + d + "/a" + args, "DDSL_THREADS=1"), 0);
  ASSERT_EQ(run("simulate --out " + d + "/b" + args, "DDSL_THREADS=3"), 0);
  const auto a = slurp(dir / "a/manifest.json").at("outputs");
  const auto b = slurp(dir / "b/manifest.json").at("outputs");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].at("sha256"), b[i].at("sha256")) << a[i].at("path");
}
