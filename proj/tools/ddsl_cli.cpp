// ddsl: command-line pipeline for dense dispersed structured light.
//
//   gen-patterns  projector patterns as PNG plus a JSON sidecar
//   simulate      synthetic frame group (and optionally calibration captures)
//   calibrate     calibration bundle from capture directory
//   reconstruct   hyperspectral cube and depth from a frame group
//   evaluate      metrics against ground truth
//   report        CSV tables and PNG plots of an evaluation
//
// Exit codes: 0 ok, 1 usage, 2 data/format, 3 numerical.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddsl/calib/dispersion_fit.hpp"
#include "ddsl/calib/eta.hpp"
#include "ddsl/calib/refine.hpp"
#include "ddsl/cli/datasets.hpp"
#include "ddsl/core/srgb.hpp"
#include "ddsl/eval/report.hpp"
#include "ddsl/recon/pipeline.hpp"
#include "ddsl/simulator/captures.hpp"
#include "ddsl/simulator/render.hpp"
#include "ddsl/simulator/setup.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ddsl;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- configuration -------------------------------------------------------
//
// Each subcommand has a flat table of keys with defaults. A --config JSON file
// and --set KEY=VALUE flags are merged over the defaults, in that order.

struct Key {
  std::string name;
  json def;
  std::string help;
};

using Keys = std::vector<Key>;

std::string key_footer(const Keys& keys) {
  std::ostringstream os;
  os << "Config keys (--config FILE, --set KEY=VALUE):\n";
  for (const auto& k : keys) os << "  " << k.name << " = " << k.def.dump() << "\n      " << k.help << "\n";
  return os.str();
}

bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_string();
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return false;
}

json resolve(const Keys& keys, const std::string& config_file, const std::vector<std::string>& sets) {
  json out = json::object();
  for (const auto& k : keys) out[k.name] = k.def;
  auto merge = [&](const std::string& name, const json& v, const std::string& where) {
    auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return k.name == name; });
    if (it == keys.end()) throw FormatError("unknown config key '" + name + "' in " + where);
    if (!same_kind(it->def, v)) throw FormatError("config key '" + name + "' has the wrong type in " + where);
    out[name] = v;
  };
  if (!config_file.empty()) {
    const json j = read_json(config_file);
    if (!j.is_object()) throw FormatError(config_file + ": config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) merge(it.key(), *it, config_file);
  }
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects KEY=VALUE, got '" + s + "'");
    const std::string name = s.substr(0, eq), text = s.substr(eq + 1);
    json v = json::parse(text, nullptr, false);
    if (v.is_discarded()) v = text;  // bare strings
    merge(name, v, "--set");
  }
  return out;
}

void add_config_options(CLI::App* app, std::string& config, std::vector<std::string>& sets, const Keys& keys) {
  app->add_option("--config", config, "JSON file of config keys")->check(CLI::ExistingFile);
  app->add_option("--set", sets, "override one config key, KEY=VALUE (VALUE parsed as JSON)");
  app->footer(key_footer(keys));
}

Eigen::Vector2d vec2(const json& j, const char* what) { return cli::vec2_from(j, what); }

void check_threads_env() {
  if (const char* env = std::getenv("DDSL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*env == '\0' || *end != '\0' || v < 1) throw UsageError("DDSL_THREADS must be a positive integer");
  }
}

// ---- gen-patterns ---------------------------------------------------------

Keys pattern_keys() {
  const PatternParams d;
  return {{"line_offset", d.line_offset, "spacing between lit lines within one pattern, projector columns"},
          {"line_shift", d.line_shift, "shift between consecutive patterns, projector columns"},
          {"line_width", d.line_width, "lit line width, projector columns"},
          {"count", d.count, "number of line patterns M (the black pattern is written in addition)"},
          {"proj_width", d.proj_width, "projector width, pixels (taken from --bundle when given)"},
          {"proj_height", d.proj_height, "projector height, pixels (taken from --bundle when given)"}};
}

int cmd_gen_patterns(const std::string& out, const json& cfg, const std::string& bundle_path) {
  PatternParams p = cli::pattern_params_from_json(cfg);
  cli::Manifest man("gen-patterns", cfg);
  if (!bundle_path.empty()) {
    const CalibrationBundle b = load_bundle(bundle_path);
    p = sim::pattern_params_for(b, p);
    man.input(bundle_path);
  }
  fs::create_directories(out);
  const PatternSet set = generate_patterns(p);
  auto save = [&](const Pattern& pat, const std::string& name) {
    io::write_png(fs::path(out) / name, pat.to_image());
    man.output(fs::path(out) / name);
  };
  for (int i = 1; i <= p.count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "pattern_%02d.png", i);
    save(set.patterns[static_cast<std::size_t>(i - 1)], buf);
  }
  save(set.black, "pattern_black.png");
  write_json(fs::path(out) / "patterns.json", json(p));
  man.output(fs::path(out) / "patterns.json");
  man.write(fs::path(out) / "manifest.json");
  std::cout << "wrote " << p.count + 1 << " patterns to " << out << "\n";
  return 0;
}

// ---- simulate --------------------------------------------------------------

Keys simulate_keys() {
  return {
      {"scene", "colorchecker", "colorchecker | narrowband | stair | smooth | file (reflectance + depth_map)"},
      {"reflectance", nullptr, "reflectance cube .hsc, values in [0, 1], when scene = file"},
      {"depth_map", nullptr, "depth .hsc (metres) matching the reflectance, when scene = file"},
      {"width", 64, "image width for built-in scenes and the generated rig"},
      {"height", 64, "image height for built-in scenes and the generated rig"},
      {"depth", 0.8, "plane depth of the colorchecker / narrowband / smooth scenes, metres"},
      {"velocity", json::array({0.0, 0.0}), "scene motion v, pixels per frame"},
      {"acceleration", json::array({0.0, 0.0}), "scene motion a, pixels per frame^2"},
      {"jerk", json::array({0.0, 0.0}), "scene motion j, pixels per frame^3; disp(t) = v t + a t^2 + j t^3"},
      {"ambient", json::array(), "leakage spectrum under the black pattern, one value per band; [] for none"},
      {"narrowband_centers", json::array({460, 480, 500, 520, 540, 560, 580, 600, 620}),
       "peak wavelengths of the narrowband targets (at most 9), nm"},
      {"narrowband_fwhm", 10.0, "FWHM of the narrowband targets, nm"},
      {"seed", 0, "noise seed"},
      {"noise_sigma", 0.0, "additive Gaussian sensor noise, DN"},
      {"supersample", 1, "sub-band wavelength samples per band in the renderer"},
      {"captures", false, "also write calibration captures to OUT/captures"},
      {"table_perturbation", 0.1, "relative uniform perturbation of the initial radiometric tables in the captures"},
      {"scanline_noise", 0.0, "noise on scanline profiles, DN"},
      {"eta_noise", 0.0, "noise on the diffraction-efficiency captures, DN"},
  };
}

sim::SceneSpec build_scene(const json& c, cli::Manifest& man, std::vector<eval::Target>& targets) {
  const std::string kind = c["scene"];
  const int W = c["width"], H = c["height"];
  const double z = c["depth"];
  sim::SceneSpec s;
  if (kind == "colorchecker") s = sim::colorchecker_scene(W, H, z);
  else if (kind == "stair") s = sim::stair_scene(W, H);
  else if (kind == "smooth") s = sim::smooth_scene(W, H, z);
  else if (kind == "narrowband") {
    const auto centers = c["narrowband_centers"].get<std::vector<double>>();
    s = sim::narrowband_scene(W, H, centers, c["narrowband_fwhm"].get<double>(), z);
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const sim::Roi r = sim::narrowband_roi(W, H, k);
      targets.push_back({"nb" + std::to_string(static_cast<int>(std::lround(centers[k]))), r.x0, r.y0, r.x1, r.y1});
    }
  } else if (kind == "file") {
    if (!c["reflectance"].is_string() || !c["depth_map"].is_string())
      throw UsageError("scene = file needs reflectance and depth_map");
    s.reflectance = io::read_cube(c["reflectance"].get<std::string>());
    s.depth = io::read_depth(c["depth_map"].get<std::string>());
    man.input(c["reflectance"].get<std::string>());
    man.input(c["depth_map"].get<std::string>());
  } else {
    throw UsageError("unknown scene '" + kind + "'");
  }
  s.motion.velocity = vec2(c["velocity"], "velocity");
  s.motion.acceleration = vec2(c["acceleration"], "acceleration");
  s.motion.jerk = vec2(c["jerk"], "jerk");
  s.ambient = c["ambient"].get<std::vector<double>>();
  s.validate();
  return s;
}

int cmd_simulate(const std::string& out, json cfg, const std::string& bundle_path, const std::string& patterns_path,
                 const std::string& motion_path) {
  cli::Manifest man("simulate", cfg);
  if (!motion_path.empty()) {
    const sim::Motion m = cli::motion_from_json(read_json(motion_path));
    cfg["velocity"] = cli::vec2_json(m.velocity);
    cfg["acceleration"] = cli::vec2_json(m.acceleration);
    cfg["jerk"] = cli::vec2_json(m.jerk);
    man.input(motion_path);
    man.extra()["config"] = cfg;
  }
  std::vector<eval::Target> targets;
  const sim::SceneSpec scene = build_scene(cfg, man, targets);
  const int W = scene.reflectance.width(), H = scene.reflectance.height();

  CalibrationBundle rig;
  if (!bundle_path.empty()) {
    rig = load_bundle(bundle_path);
    man.input(bundle_path);
    if (rig.left.width != W || rig.left.height != H) throw ParamError("bundle camera size differs from the scene");
  } else {
    sim::DeskRigOptions o;
    o.width = W;
    o.height = H;
    rig = sim::make_desk_rig(o);
  }
  if (!(rig.tables.grid == scene.reflectance.grid())) throw GridError("scene and bundle use different grids");
  PatternParams params;
  if (!patterns_path.empty()) {
    params = cli::pattern_params_from_json(read_json(patterns_path));
    man.input(patterns_path);
  }
  params = sim::pattern_params_for(rig, params);

  sim::RenderOptions ro;
  ro.noise_sigma = cfg["noise_sigma"];
  ro.supersample = cfg["supersample"];
  const std::uint64_t seed = cfg["seed"].get<std::uint64_t>();
  const FrameGroup g = sim::render_group(scene, params, rig, seed, ro);

  const fs::path dir(out);
  const auto files = cli::save_group(dir, g, targets);
  save_bundle(dir / "bundle.json", rig);
  for (std::size_t i = 0; i < g.frames.size(); ++i) {
    const std::string n = cli::frame_name(static_cast<int>(i) + 1, g.pattern_count(), "left");
    io::write_png(dir / (n.substr(0, n.size() - 4) + ".png"), g.frames[i].left, 1.0 / 255.0);
  }
  if (g.truth_cube && g.truth_cube->grid() == WavelengthGrid::standard())
    io::write_png(dir / "truth_srgb.png", cube_to_srgb(*g.truth_cube), 1.0, true);

  if (cfg["captures"].get<bool>()) {
    cli::CalibrationCaptures c;
    c.geometry = rig;
    c.initial = rig.tables;
    std::mt19937_64 rng(seed);
    const double amount = cfg["table_perturbation"];
    if (!(amount >= 0.0 && amount < 1.0)) throw ParamError("table_perturbation must lie in [0, 1)");
    std::uniform_real_distribution<double> u(-amount, amount);
    for (int ch = 0; ch < 3; ++ch)
      for (std::size_t j = 0; j < c.initial.bands(); ++j) {
        c.initial.cam[ch][j] *= 1.0 + u(rng);
        c.initial.proj[ch][j] *= 1.0 + u(rng);
      }
    sim::ScanlineCaptureOptions so;
    so.noise_sigma = cfg["scanline_noise"];
    so.seed = seed;
    c.scanlines = sim::simulate_scanline_captures(rig, so);
    c.eta = sim::simulate_eta_captures(rig, 0.8, cfg["eta_noise"].get<double>(), seed);
    c.refinement = sim::simulate_refinement_captures(rig, 0.8, 1, 0.0, seed);
    cli::save_calibration_captures(dir / "captures", c);
  }
  man.output(dir);
  man.extra()["pattern_order"] = json::array();
  for (int i = 1; i <= g.pattern_count(); ++i) man.extra()["pattern_order"].push_back(i);
  man.extra()["pattern_order"].push_back("black");
  man.extra()["seed"] = seed;
  man.extra()["noise_sigma"] = ro.noise_sigma;
  man.write(dir / "manifest.json");
  std::cout << "simulated " << g.frames.size() << " frames (" << W << "x" << H << ") into " << out << "\n";
  (void)files;
  return 0;
}

// ---- calibrate -------------------------------------------------------------

Keys calibrate_keys() {
  const calib::RefinementConfig r;
  return {{"w", r.w, "smoothness weight of the radiometric refinement"},
          {"iterations", r.iterations, "refinement trial steps"},
          {"step", r.step, "initial refinement step in scaled variables"},
          {"projector_blur", r.projector_blur, "model the projector column blur during refinement"},
          {"blur_size", r.blur_size, "blur taps, odd"},
          {"blur_sigma", r.blur_sigma, "blur sigma, projector columns"},
          {"peak_half_window", 8, "scanlines on each side of the brightest one used in the Gaussian peak fit"}};
}

int cmd_calibrate(const std::string& captures_dir, const std::string& out, const json& cfg) {
  cli::Manifest man("calibrate", cfg);
  man.input(captures_dir);
  const cli::CalibrationCaptures c = cli::load_calibration_captures(captures_dir);

  const auto samples = calib::extract_dispersion_samples(c.scanlines, cfg["peak_half_window"].get<int>());
  const calib::DispersionFit fit =
      calib::fit_dispersion(samples, c.scanlines.grid, c.scanlines.site_x, c.scanlines.site_y);
  const std::vector<double> eta = calib::estimate_eta(c.eta);

  CalibrationBundle b = c.geometry;
  b.dispersion = fit.model;
  RadiometricTables initial = c.initial;
  initial.eta = eta;
  b.tables = initial;

  calib::RefinementConfig rc;
  rc.w = cfg["w"];
  rc.iterations = cfg["iterations"];
  rc.step = cfg["step"];
  rc.projector_blur = cfg["projector_blur"];
  rc.blur_size = cfg["blur_size"];
  rc.blur_sigma = cfg["blur_sigma"];
  const calib::RefineResult rr = calib::refine_responses(initial, b, c.refinement, rc);
  b.tables = rr.tables;
  b.tables.eta = eta;

  fs::create_directories(out);
  const fs::path dir(out);
  save_bundle(dir / "bundle.json", b);
  const json report = {{"dispersion_rms_px", fit.rms},
                       {"dispersion_max_site_rms_px", fit.max_site_rms},
                       {"dispersion_samples", fit.samples},
                       {"eta", eta},
                       {"refinement_initial_misfit", rr.initial_misfit},
                       {"refinement_final_misfit", rr.final_misfit},
                       {"refinement_iterations", rr.iterations},
                       {"refinement_converged", rr.converged}};
  write_json(dir / "calibration_report.json", report);
  man.output(dir / "bundle.json");
  man.output(dir / "calibration_report.json");
  man.write(dir / "manifest.json");
  std::cout << "dispersion rms " << fit.rms << " px over " << fit.samples << " samples; refinement misfit "
            << rr.initial_misfit << " -> " << rr.final_misfit << "\n";
  return 0;
}

// ---- reconstruct -----------------------------------------------------------

Keys reconstruct_keys() {
  Keys k;
  const json solver = recon::SolverConfig{};
  for (const auto& [name, help] : recon::SolverConfig::documentation()) k.push_back({name, solver.at(name), help});
  const depth::BlockMatchingOptions bm;
  k.push_back({"disparity", "bm", "disparity source: bm (block matching) or oracle (ground-truth depth in the group)"});
  k.push_back({"flow_oracle", false, "inject the group's ground-truth black flows instead of estimating them"});
  k.push_back({"flow_window", 4, "black frames in the per-pixel trajectory fit (>= 2; cubic needs 4)"});
  k.push_back({"bm_radius", bm.radius, "block-matching window half-size, pixels"});
  k.push_back({"bm_uniqueness", bm.uniqueness, "block-matching uniqueness ratio"});
  k.push_back({"bm_lr_tolerance", bm.lr_tolerance, "block-matching left-right consistency tolerance, pixels"});
  k.push_back({"pattern_depths", false, "also estimate depth under every pattern frame (for consistency checks)"});
  k.push_back({"srgb_png", true, "write an sRGB preview of the cube"});
  return k;
}

int cmd_reconstruct(const std::string& frames_dir, const std::string& bundle_path, const std::string& out,
                    const json& cfg) {
  cli::Manifest man("reconstruct", cfg);
  man.input(frames_dir);
  man.input(bundle_path);
  json solver_json = json::object();
  for (const auto& [name, help] : recon::SolverConfig::documentation()) solver_json[name] = cfg.at(name);
  recon::ReconstructOptions o;
  o.solver = recon::solver_config_from_json(solver_json);
  const std::string disp = cfg["disparity"];
  if (disp == "bm") o.depth.source = depth::DisparitySource::block_matching;
  else if (disp == "oracle") o.depth.source = depth::DisparitySource::oracle;
  else throw UsageError("disparity must be bm or oracle");
  o.depth.matching.radius = cfg["bm_radius"];
  o.depth.matching.uniqueness = cfg["bm_uniqueness"];
  o.depth.matching.lr_tolerance = cfg["bm_lr_tolerance"];
  o.motion.oracle = cfg["flow_oracle"];
  o.motion.window = cfg["flow_window"];

  const FrameGroup g = cli::load_group(frames_dir);
  const CalibrationBundle bundle = load_bundle(bundle_path);
  const recon::Reconstruction r = recon::reconstruct_group(g, bundle, o);

  const fs::path dir(out);
  fs::create_directories(dir);
  io::write_cube(dir / "cube.hsc", r.cube);
  io::write_depth(dir / "depth.hsc", r.depth);
  io::write_image(dir / "residual.hsc", r.residual);
  std::vector<std::string> outputs = {"cube.hsc", "depth.hsc", "residual.hsc"};
  if (cfg["srgb_png"].get<bool>() && r.cube.grid() == WavelengthGrid::standard()) {
    io::write_png(dir / "cube_srgb.png", cube_to_srgb(r.cube), 1.0, true);
    outputs.push_back("cube_srgb.png");
  }
  if (cfg["pattern_depths"].get<bool>()) {
    const DepthMap* truth = g.truth_depth ? &*g.truth_depth : nullptr;
    for (int i = 1; i <= g.pattern_count(); ++i) {
      const DepthMap z = depth::estimate_depth(g.frames[static_cast<std::size_t>(i - 1)], bundle.left, bundle.right,
                                               bundle.dispersion.depth_min(), bundle.dispersion.depth_max(), o.depth,
                                               truth);
      char buf[40];
      std::snprintf(buf, sizeof buf, "pattern_depth_%02d.hsc", i);
      io::write_depth(dir / buf, z);
      outputs.push_back(buf);
    }
  }
  const auto& d = r.diagnostics;
  const json diag = {{"pixels", d.pixels},
                     {"solved", d.solved},
                     {"no_depth", d.no_depth},
                     {"skipped", d.skipped},
                     {"residual_rms_dn", d.residual_rms},
                     {"objective_history", d.objective_history},
                     {"rejected_tiles", d.rejected_tiles},
                     {"runtimes", {{"depth", d.seconds_depth}, {"flow", d.seconds_flow}, {"solve", d.seconds_solve}}}};
  write_json(dir / "diagnostics.json", diag);
  outputs.push_back("diagnostics.json");
  for (const auto& f : outputs) man.output(dir / f);
  man.write(dir / "manifest.json");
  std::cout << "solved " << d.solved << "/" << d.pixels << " pixels (" << d.no_depth << " without depth, "
            << d.skipped << " skipped), residual " << d.residual_rms << " DN\n";
  if (d.solved == 0) {
    std::cerr << "error: no pixel could be reconstructed\n";
    return 3;
  }
  return 0;
}

// ---- evaluate / report -----------------------------------------------------

Keys evaluate_keys() { return {{"histogram_bins", 20, "bins of the depth-error histogram"}}; }

struct EvaluateInputs {
  std::string recon_dir, truth_dir, cube, depth, truth_cube, truth_depth, targets;
};

int cmd_evaluate(EvaluateInputs in, const std::string& out, const json& cfg) {
  cli::Manifest man("evaluate", cfg);
  auto pick = [](std::string& v, const std::string& dir, const char* name) {
    if (v.empty() && !dir.empty() && fs::exists(fs::path(dir) / name)) v = (fs::path(dir) / name).string();
  };
  pick(in.cube, in.recon_dir, "cube.hsc");
  pick(in.depth, in.recon_dir, "depth.hsc");
  pick(in.truth_cube, in.truth_dir, "truth_cube.hsc");
  pick(in.truth_depth, in.truth_dir, "truth_depth.hsc");
  pick(in.targets, in.truth_dir, "targets.json");
  if (in.cube.empty() || in.truth_cube.empty()) throw UsageError("evaluate needs a reconstructed and a truth cube");

  eval::EvalOptions o;
  o.histogram_bins = cfg["histogram_bins"];
  if (!in.targets.empty()) {
    o.targets = cli::targets_from_json(read_json(in.targets));
    man.input(in.targets);
  }
  const HyperspectralCube cube = io::read_cube(in.cube), truth = io::read_cube(in.truth_cube);
  man.input(in.cube);
  man.input(in.truth_cube);
  eval::EvalReport r;
  eval::evaluate_spectra(r, cube, truth, o);
  if (!in.depth.empty() && !in.truth_depth.empty()) {
    eval::evaluate_depth(r, io::read_depth(in.depth), io::read_depth(in.truth_depth), o);
    man.input(in.depth);
    man.input(in.truth_depth);
  }
  if (!in.recon_dir.empty()) {
    std::vector<DepthMap> per;
    for (int i = 1;; ++i) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "pattern_depth_%02d.hsc", i);
      const fs::path p = fs::path(in.recon_dir) / buf;
      if (!fs::exists(p)) break;
      per.push_back(io::read_depth(p));
      man.input(p);
    }
    eval::evaluate_pattern_consistency(r, per);
    const fs::path diag = fs::path(in.recon_dir) / "diagnostics.json";
    if (fs::exists(diag)) {
      const json d = read_json(diag);
      if (d.contains("runtimes") && d["runtimes"].is_object())
        for (auto it = d["runtimes"].begin(); it != d["runtimes"].end(); ++it)
          if (it->is_number()) r.runtimes.emplace_back(it.key(), it->get<double>());
      man.input(diag);
    }
  }
  const fs::path dir(out);
  fs::create_directories(dir);
  write_json(dir / "report.json", eval::report_to_json(r));
  man.output(dir / "report.json");
  man.write(dir / "manifest.json");
  std::cout << "spectral RMSE " << r.rmse << " (" << 100.0 * r.rmse_relative << "% of peak) over " << r.pixels
            << " pixels";
  if (r.depth_pixels > 0) std::cout << "; depth MAE " << r.depth_mae_mm << " mm";
  std::cout << "\n";
  for (const auto& t : r.targets)
    std::cout << "  " << t.name << ": FWHM " << (t.recon_fwhm ? std::to_string(*t.recon_fwhm) + " nm" : "n/a")
              << "\n";
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& out) {
  cli::Manifest man("report", json::object());
  man.input(report_path);
  const eval::EvalReport r = eval::report_from_json(read_json(report_path));
  eval::write_report(r, out);
  man.output(out);
  man.write(fs::path(out) / "manifest.json");
  std::cout << "report written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense dispersed structured light: patterns, simulation, calibration, reconstruction, evaluation.\n"
               "Exit codes: 0 ok, 1 usage, 2 data/format, 3 numerical. DDSL_THREADS caps worker threads."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ddsl 1.0.0");

  std::string config;
  std::vector<std::string> sets;

  auto* gen = app.add_subcommand("gen-patterns", "write projector patterns P_1..P_M and P_B as PNG plus patterns.json");
  std::string gen_out, gen_bundle;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--bundle", gen_bundle, "calibration bundle; projector size is taken from it")->check(CLI::ExistingFile);
  const Keys gen_keys = pattern_keys();
  add_config_options(gen, config, sets, gen_keys);

  auto* simc = app.add_subcommand("simulate", "render a synthetic frame group (plus optional calibration captures)");
  std::string sim_out, sim_bundle, sim_patterns, sim_motion;
  simc->add_option("--out", sim_out, "output frame directory")->required();
  simc->add_option("--bundle", sim_bundle, "calibration bundle of the rig; default: exact desk rig at width x height")
      ->check(CLI::ExistingFile);
  simc->add_option("--patterns", sim_patterns, "patterns.json sidecar; projector size follows the rig")
      ->check(CLI::ExistingFile);
  simc->add_option("--motion", sim_motion, "motion JSON {velocity, acceleration, jerk}; overrides the config keys")
      ->check(CLI::ExistingFile);
  const Keys sim_keys = simulate_keys();
  add_config_options(simc, config, sets, sim_keys);

  auto* cal = app.add_subcommand("calibrate", "fit dispersion, diffraction efficiency and radiometric tables");
  std::string cal_in, cal_out;
  cal->add_option("--captures", cal_in, "calibration capture directory (simulate --set captures=true)")
      ->required()
      ->check(CLI::ExistingDirectory);
  cal->add_option("--out", cal_out, "output directory for bundle.json")->required();
  const Keys cal_keys = calibrate_keys();
  add_config_options(cal, config, sets, cal_keys);

  auto* rec = app.add_subcommand("reconstruct", "hyperspectral cube and depth map from one frame group");
  std::string rec_frames, rec_bundle, rec_out, rec_disp;
  bool rec_flow_oracle = false;
  rec->add_option("--frames", rec_frames, "frame group directory")->required()->check(CLI::ExistingDirectory);
  rec->add_option("--bundle", rec_bundle, "calibration bundle JSON")->required()->check(CLI::ExistingFile);
  rec->add_option("--out", rec_out, "output directory")->required();
  rec->add_option("--disparity", rec_disp, "disparity source, overrides the config key")
      ->check(CLI::IsMember({"bm", "oracle"}));
  rec->add_flag("--flow-oracle", rec_flow_oracle, "inject ground-truth black flows");
  const Keys rec_keys = reconstruct_keys();
  add_config_options(rec, config, sets, rec_keys);

  auto* ev = app.add_subcommand("evaluate", "compare a reconstruction with ground truth");
  EvaluateInputs ein;
  std::string ev_out;
  ev->add_option("--recon", ein.recon_dir, "reconstruct output directory")->check(CLI::ExistingDirectory);
  ev->add_option("--truth", ein.truth_dir, "frame directory holding truth_cube.hsc / truth_depth.hsc / targets.json")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--cube", ein.cube, "reconstructed cube (default RECON/cube.hsc)")->check(CLI::ExistingFile);
  ev->add_option("--depth", ein.depth, "reconstructed depth (default RECON/depth.hsc)")->check(CLI::ExistingFile);
  ev->add_option("--truth-cube", ein.truth_cube, "truth cube (default TRUTH/truth_cube.hsc)")->check(CLI::ExistingFile);
  ev->add_option("--truth-depth", ein.truth_depth, "truth depth (default TRUTH/truth_depth.hsc)")
      ->check(CLI::ExistingFile);
  ev->add_option("--targets", ein.targets, "narrowband targets JSON [{name, x0, y0, x1, y1}]")
      ->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "output directory for report.json")->required();
  const Keys ev_keys = evaluate_keys();
  add_config_options(ev, config, sets, ev_keys);

  auto* rep = app.add_subcommand("report", "CSV tables and PNG plots from report.json");
  std::string rep_in, rep_out;
  rep->add_option("--report", rep_in, "report.json written by evaluate")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "output directory")->required();
  rep->footer("Config keys: none.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    check_threads_env();
    if (gen->parsed()) return cmd_gen_patterns(gen_out, resolve(gen_keys, config, sets), gen_bundle);
    if (simc->parsed())
      return cmd_simulate(sim_out, resolve(sim_keys, config, sets), sim_bundle, sim_patterns, sim_motion);
    if (cal->parsed()) return cmd_calibrate(cal_in, cal_out, resolve(cal_keys, config, sets));
    if (rec->parsed()) {
      json cfg = resolve(rec_keys, config, sets);
      if (!rec_disp.empty()) cfg["disparity"] = rec_disp;
      if (rec_flow_oracle) cfg["flow_oracle"] = true;
      return cmd_reconstruct(rec_frames, rec_bundle, rec_out, cfg);
    }
    if (ev->parsed()) return cmd_evaluate(ein, ev_out, resolve(ev_keys, config, sets));
    if (rep->parsed()) return cmd_report(rep_in, rep_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ddsl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.error_class() == ErrorClass::numerical ? 3 : 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
