#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddsl/core/io.hpp"
#include "ddsl/eval/metrics.hpp"

namespace ddsl::eval {

namespace detail {

// Numbers are written with 9 significant digits in the classic locale so
// the same report always gives the same bytes.
class Csv {
 public:
  Csv(const std::filesystem::path& path, const std::string& header) : path_(path), os_(path) {
    if (!os_) throw IoError("cannot open " + path.string() + " for writing");
    os_.imbue(std::locale::classic());
    os_ << std::setprecision(9) << header << '\n';
  }
  template <class... T>
  void row(const T&... v) {
    bool first = true;
    ((os_ << (first ? "" : ",") << v, first = false), ...);
    os_ << '\n';
  }
  void close() {
    os_.close();
    if (!os_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
};

inline std::string opt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(9) << *v;
  return s.str();
}

using Rgb = std::array<std::uint8_t, 3>;

/// Minimal raster for line plots: white background, framed plot area.
class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 255) {
    for (int x = kMargin; x < w_ - kMargin; ++x) put(x, h_ - kMargin, {0, 0, 0}), put(x, kMargin, {0, 0, 0});
    for (int y = kMargin; y <= h_ - kMargin; ++y) put(kMargin, y, {0, 0, 0}), put(w_ - kMargin, y, {0, 0, 0});
  }

  void set_range(double x0, double x1, double y0, double y1) {
    x0_ = x0, x1_ = x1 > x0 ? x1 : x0 + 1.0;
    y0_ = y0, y1_ = y1 > y0 ? y1 : y0 + 1.0;
  }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys, Rgb c) {
    for (std::size_t k = 0; k + 1 < xs.size() && k + 1 < ys.size(); ++k)
      line(sx(xs[k]), sy(ys[k]), sx(xs[k + 1]), sy(ys[k + 1]), c);
  }

  void bar(double xa, double xb, double y, Rgb c) {
    const int a = sx(xa), b = std::max(sx(xb) - 1, a), top = sy(y);
    for (int x = a; x <= b; ++x)
      for (int yy = top; yy < h_ - kMargin; ++yy) put(x, yy, c);
  }

  void save(const std::filesystem::path& p) const { io::write_png(p, w_, h_, 3, px_); }

 private:
  static constexpr int kMargin = 12;
  int sx(double x) const {
    return kMargin + static_cast<int>(std::lround((x - x0_) / (x1_ - x0_) * (w_ - 2 * kMargin)));
  }
  int sy(double y) const {
    return h_ - kMargin - static_cast<int>(std::lround((y - y0_) / (y1_ - y0_) * (h_ - 2 * kMargin)));
  }
  void put(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
    std::copy(c.begin(), c.end(), px_.begin() + (static_cast<std::size_t>(y) * w_ + x) * 3);
  }
  void line(int xa, int ya, int xb, int yb, Rgb c) {  // Bresenham
    const int dx = std::abs(xb - xa), dy = -std::abs(yb - ya);
    const int stx = xa < xb ? 1 : -1, sty = ya < yb ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      put(xa, ya, c);
      if (xa == xb && ya == yb) break;
      const int e2 = 2 * err;
      if (e2 >= dy) err += dy, xa += stx;
      if (e2 <= dx) err += dx, ya += sty;
    }
  }

  int w_, h_;
  std::vector<std::uint8_t> px_;
  double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
};

inline constexpr std::array<Rgb, 9> kPalette = {{{228, 26, 28},
                                                 {55, 126, 184},
                                                 {77, 175, 74},
                                                 {152, 78, 163},
                                                 {255, 127, 0},
                                                 {166, 86, 40},
                                                 {247, 129, 191},
                                                 {0, 139, 139},
                                                 {128, 128, 0}}};

}  // namespace detail

inline nlohmann::json report_to_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json targets = json::array();
  for (const auto& t : r.targets)
    targets.push_back({{"name", t.name},
                       {"center_nm", t.center_nm},
                       {"pixels", t.pixels},
                       {"truth", t.truth},
                       {"recon", t.recon},
                       {"truth_fwhm_nm", opt_json(t.truth_fwhm)},
                       {"recon_fwhm_nm", opt_json(t.recon_fwhm)}});
  json hist = json::array();
  for (const auto& [hi, n] : r.depth_histogram) hist.push_back({hi, n});
  json rt = json::array();
  for (const auto& [name, s] : r.runtimes) rt.push_back({name, s});
  return {{"wavelengths", r.wavelengths},
          {"pixels", r.pixels},
          {"rmse", r.rmse},
          {"peak", r.peak},
          {"rmse_relative", r.rmse_relative},
          {"band_rmse", r.band_rmse},
          {"truth_mean", r.truth_mean},
          {"recon_mean", r.recon_mean},
          {"targets", targets},
          {"depth_pixels", r.depth_pixels},
          {"depth_mae_mm", r.depth_mae_mm},
          {"depth_max_mm", r.depth_max_mm},
          {"depth_mean_relative", r.depth_mean_relative},
          {"depth_histogram", hist},
          {"consistency_pixels", r.consistency_pixels},
          {"pattern_deviation_mm", r.pattern_deviation_mm},
          {"pattern_spread_mm", r.pattern_spread_mm},
          {"pattern_spread_relative", r.pattern_spread_relative},
          {"runtimes", rt}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    auto opt_from = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>{} : v.get<double>(); };
    r.wavelengths = j.at("wavelengths").get<std::vector<double>>();
    r.pixels = j.at("pixels").get<std::size_t>();
    r.rmse = j.at("rmse").get<double>();
    r.peak = j.at("peak").get<double>();
    r.rmse_relative = j.at("rmse_relative").get<double>();
    r.band_rmse = j.at("band_rmse").get<std::vector<double>>();
    r.truth_mean = j.at("truth_mean").get<std::vector<double>>();
    r.recon_mean = j.at("recon_mean").get<std::vector<double>>();
    for (const auto& t : j.at("targets")) {
      TargetResult tr;
      tr.name = t.at("name").get<std::string>();
      tr.center_nm = t.at("center_nm").get<double>();
      tr.pixels = t.at("pixels").get<std::size_t>();
      tr.truth = t.at("truth").get<std::vector<double>>();
      tr.recon = t.at("recon").get<std::vector<double>>();
      tr.truth_fwhm = opt_from(t.at("truth_fwhm_nm"));
      tr.recon_fwhm = opt_from(t.at("recon_fwhm_nm"));
      r.targets.push_back(std::move(tr));
    }
    r.depth_pixels = j.at("depth_pixels").get<std::size_t>();
    r.depth_mae_mm = j.at("depth_mae_mm").get<double>();
    r.depth_max_mm = j.at("depth_max_mm").get<double>();
    r.depth_mean_relative = j.at("depth_mean_relative").get<double>();
    for (const auto& b : j.at("depth_histogram")) r.depth_histogram.emplace_back(b.at(0).get<double>(), b.at(1).get<std::size_t>());
    r.consistency_pixels = j.at("consistency_pixels").get<std::size_t>();
    r.pattern_deviation_mm = j.at("pattern_deviation_mm").get<std::vector<double>>();
    r.pattern_spread_mm = j.at("pattern_spread_mm").get<double>();
    r.pattern_spread_relative = j.at("pattern_spread_relative").get<double>();
    for (const auto& e : j.at("runtimes")) r.runtimes.emplace_back(e.at(0).get<std::string>(), e.at(1).get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("evaluation report: ") + e.what());
  }
  const std::size_t N = r.wavelengths.size();
  if (r.band_rmse.size() != N || r.truth_mean.size() != N || r.recon_mean.size() != N)
    throw FormatError("evaluation report: per-band arrays differ from the wavelength list");
  for (const auto& t : r.targets)
    if (t.truth.size() != N || t.recon.size() != N) throw FormatError("evaluation report: target spectrum size");
  return r;
}

/// Writes the report's CSV tables and, where there is data, PNG plots:
///   summary.csv, band_rmse.csv, spectra.csv, fwhm.csv, depth_histogram.csv,
///   pattern_consistency.csv, runtimes.csv, spectra.png, targets.png,
///   depth_histogram.png
inline void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create report directory " + dir.string());
  const bool spectral = !r.wavelengths.empty();

  {
    detail::Csv c(dir / "summary.csv", "metric,value");
    if (spectral) {
      c.row("pixels", r.pixels);
      c.row("rmse", r.rmse);
      c.row("peak", r.peak);
      c.row("rmse_relative", r.rmse_relative);
    }
    if (r.depth_pixels > 0) {
      c.row("depth_pixels", r.depth_pixels);
      c.row("depth_mae_mm", r.depth_mae_mm);
      c.row("depth_max_mm", r.depth_max_mm);
      c.row("depth_mean_relative", r.depth_mean_relative);
    }
    if (r.consistency_pixels > 0) {
      c.row("consistency_pixels", r.consistency_pixels);
      c.row("pattern_spread_mm", r.pattern_spread_mm);
      c.row("pattern_spread_relative", r.pattern_spread_relative);
    }
    c.close();
  }
  {
    detail::Csv c(dir / "band_rmse.csv", "wavelength_nm,rmse");
    for (std::size_t j = 0; j < r.wavelengths.size() && j < r.band_rmse.size(); ++j)
      c.row(r.wavelengths[j], r.band_rmse[j]);
    c.close();
  }
  {
    std::string header = "wavelength_nm,truth_mean,recon_mean";
    for (const auto& t : r.targets) header += "," + t.name + "_truth," + t.name + "_recon";
    detail::Csv c(dir / "spectra.csv", header);
    for (std::size_t j = 0; j < r.wavelengths.size(); ++j) {
      std::ostringstream s;
      s.imbue(std::locale::classic());
      s << std::setprecision(9) << r.wavelengths[j] << ',' << r.truth_mean[j] << ',' << r.recon_mean[j];
      for (const auto& t : r.targets)
        s << ',' << (j < t.truth.size() ? t.truth[j] : 0.0) << ',' << (j < t.recon.size() ? t.recon[j] : 0.0);
      c.row(s.str());
    }
    c.close();
  }
  {
    detail::Csv c(dir / "fwhm.csv", "target,center_nm,pixels,truth_fwhm_nm,recon_fwhm_nm");
    for (const auto& t : r.targets)
      c.row(t.name, t.center_nm, t.pixels, detail::opt(t.truth_fwhm), detail::opt(t.recon_fwhm));
    c.close();
  }
  {
    detail::Csv c(dir / "depth_histogram.csv", "bin_lo_mm,bin_hi_mm,count");
    double lo = 0.0;
    for (const auto& [hi, n] : r.depth_histogram) {
      c.row(lo, hi, n);
      lo = hi;
    }
    c.close();
  }
  {
    detail::Csv c(dir / "pattern_consistency.csv", "pattern,mean_abs_deviation_mm");
    if (r.consistency_pixels > 0)
      for (std::size_t i = 0; i < r.pattern_deviation_mm.size(); ++i) c.row(i + 1, r.pattern_deviation_mm[i]);
    c.close();
  }
  {
    detail::Csv c(dir / "runtimes.csv", "stage,seconds");
    for (const auto& [name, s] : r.runtimes) c.row(name, s);
    c.close();
  }

  if (spectral) {
    const double x0 = r.wavelengths.front(), x1 = r.wavelengths.back();
    double top = 0.0;
    for (std::size_t j = 0; j < r.wavelengths.size(); ++j) top = std::max({top, r.truth_mean[j], r.recon_mean[j]});
    detail::Canvas mean(480, 320);
    mean.set_range(x0, x1, 0.0, 1.05 * top);
    mean.polyline(r.wavelengths, r.truth_mean, {0, 0, 0});
    mean.polyline(r.wavelengths, r.recon_mean, detail::kPalette[0]);
    mean.save(dir / "spectra.png");

    if (!r.targets.empty()) {
      top = 0.0;
      for (const auto& t : r.targets)
        for (std::size_t j = 0; j < t.truth.size(); ++j) top = std::max({top, t.truth[j], t.recon[j]});
      detail::Canvas tg(480, 320);
      tg.set_range(x0, x1, 0.0, 1.05 * top);
      for (std::size_t k = 0; k < r.targets.size(); ++k) {
        tg.polyline(r.wavelengths, r.targets[k].truth, {160, 160, 160});
        tg.polyline(r.wavelengths, r.targets[k].recon, detail::kPalette[k % detail::kPalette.size()]);
      }
      tg.save(dir / "targets.png");
    }
  }
  if (!r.depth_histogram.empty()) {
    std::size_t most = 1;
    for (const auto& b : r.depth_histogram) most = std::max(most, b.second);
    detail::Canvas h(480, 320);
    h.set_range(0.0, r.depth_histogram.back().first, 0.0, 1.05 * static_cast<double>(most));
    double lo = 0.0;
    for (const auto& [hi, n] : r.depth_histogram) {
      h.bar(lo, hi, static_cast<double>(n), detail::kPalette[1]);
      lo = hi;
    }
    h.save(dir / "depth_histogram.png");
  }
}

}  // namespace ddsl::eval
