#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "abandonq/harness.hpp"

namespace abq {

namespace {

const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Fixed-size canvas with a margin-framed data window; callers work in data
// coordinates and the canvas maps to pixels.
struct Canvas {
  double width = 720.0, height = 480.0;
  double ml = 78.0, mr = 24.0, mt = 46.0, mb = 58.0;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  std::string body;

  double px(double x) const { return ml + (x - x0) / (x1 - x0) * (width - ml - mr); }
  double py(double y) const { return height - mb - (y - y0) / (y1 - y0) * (height - mb - mt); }

  void set_range(double ax, double bx, double ay, double by) {
    if (bx - ax < 1e-300) {
      ax -= 0.5;
      bx += 0.5;
    }
    if (by - ay < 1e-300) {
      ay -= 0.5;
      by += 0.5;
    }
    x0 = ax;
    x1 = bx;
    y0 = ay;
    y1 = by;
  }

  void line(double xa, double ya, double xb, double yb, const std::string& style) {
    body += "<line x1=\"" + g6(xa) + "\" y1=\"" + g6(ya) + "\" x2=\"" + g6(xb) + "\" y2=\"" +
            g6(yb) + "\" " + style + "/>\n";
  }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color, bool dashed = false) {
    if (xs.size() < 2) return;
    std::string pts;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      pts += g6(px(xs[i])) + "," + g6(py(ys[i])) + " ";
    }
    body += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.8\"";
    if (dashed) body += " stroke-dasharray=\"6 4\"";
    body += " points=\"" + pts + "\"/>\n";
  }

  void marker(double x, double y, const std::string& color) {
    body += "<circle cx=\"" + g6(px(x)) + "\" cy=\"" + g6(py(y)) + "\" r=\"3.2\" fill=\"" +
            color + "\"/>\n";
  }

  void text(double xpix, double ypix, const std::string& s, const std::string& extra = "",
            int size = 12) {
    body += "<text x=\"" + g6(xpix) + "\" y=\"" + g6(ypix) +
            "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) + "\" " + extra +
            ">" + s + "</text>\n";
  }

  void frame() {
    std::string st = "stroke=\"#333\" stroke-width=\"1\"";
    line(ml, mt, ml, height - mb, st);
    line(ml, height - mb, width - mr, height - mb, st);
  }

  void title(const std::string& s) {
    text(width / 2.0, mt - 18.0, s, "text-anchor=\"middle\"", 15);
  }

  void xlabel(const std::string& s) {
    text((ml + width - mr) / 2.0, height - 12.0, s, "text-anchor=\"middle\"");
  }

  void ylabel(const std::string& s) {
    double cx = 18.0, cy = (mt + height - mb) / 2.0;
    body += "<text x=\"" + g6(cx) + "\" y=\"" + g6(cy) +
            "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
            "transform=\"rotate(-90 " +
            g6(cx) + " " + g6(cy) + ")\">" + s + "</text>\n";
  }

  // decade ticks for axes holding log10-transformed data
  void log_ticks_x() {
    for (int d = static_cast<int>(std::ceil(x0 - 1e-9)); d <= std::floor(x1 + 1e-9); ++d) {
      double p = px(d);
      line(p, height - mb, p, height - mb + 5, "stroke=\"#333\"");
      line(p, mt, p, height - mb, "stroke=\"#ddd\" stroke-width=\"0.7\"");
      text(p, height - mb + 18, "1e" + std::to_string(d), "text-anchor=\"middle\"");
    }
  }

  void log_ticks_y() {
    for (int d = static_cast<int>(std::ceil(y0 - 1e-9)); d <= std::floor(y1 + 1e-9); ++d) {
      double p = py(d);
      line(ml - 5, p, ml, p, "stroke=\"#333\"");
      line(ml, p, width - mr, p, "stroke=\"#ddd\" stroke-width=\"0.7\"");
      text(ml - 8, p + 4, "1e" + std::to_string(d), "text-anchor=\"end\"");
    }
  }

  void lin_ticks_x(int count = 6) {
    for (int i = 0; i < count; ++i) {
      double v = x0 + (x1 - x0) * i / (count - 1);
      double p = px(v);
      line(p, height - mb, p, height - mb + 5, "stroke=\"#333\"");
      line(p, mt, p, height - mb, "stroke=\"#eee\" stroke-width=\"0.7\"");
      text(p, height - mb + 18, g6(v), "text-anchor=\"middle\"");
    }
  }

  void lin_ticks_y(int count = 6) {
    for (int i = 0; i < count; ++i) {
      double v = y0 + (y1 - y0) * i / (count - 1);
      double p = py(v);
      line(ml - 5, p, ml, p, "stroke=\"#333\"");
      line(ml, p, width - mr, p, "stroke=\"#eee\" stroke-width=\"0.7\"");
      text(ml - 8, p + 4, g6(v), "text-anchor=\"end\"");
    }
  }

  void legend_entry(int slot, const std::string& color, const std::string& label, bool dashed = false) {
    double x = width - mr - 180.0, y = mt + 16.0 + 18.0 * slot;
    body += "<line x1=\"" + g6(x) + "\" y1=\"" + g6(y - 4) + "\" x2=\"" + g6(x + 26) +
            "\" y2=\"" + g6(y - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2.2\"";
    if (dashed) body += " stroke-dasharray=\"6 4\"";
    body += "/>\n";
    text(x + 32, y, label);
  }

  std::string render() const {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + g6(width) +
                    "\" height=\"" + g6(height) + "\" viewBox=\"0 0 " + g6(width) + " " +
                    g6(height) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += body;
    s += "</svg>\n";
    return s;
  }
};

void write_svg(const std::filesystem::path& path, const Canvas& c) {
  std::ofstream f(path, std::ios::binary);
  f << c.render();
}

void empty_plot(const std::filesystem::path& path, const std::string& why) {
  Canvas c;
  c.text(c.width / 2.0, c.height / 2.0, why, "text-anchor=\"middle\"");
  write_svg(path, c);
}

double safe_log10(double v) { return std::log10(std::max(v, 1e-16)); }

void plot_error_vs_n(const ConvergenceReport& rep, const std::filesystem::path& path) {
  if (rep.rows.empty()) {
    empty_plot(path, "no rows to plot");
    return;
  }
  struct Series {
    std::string label;
    std::string color;
    std::vector<double> xs, ys;
  };
  std::vector<Series> series;
  std::size_t orders = rep.rows.front().moments.size();
  for (std::size_t mi = 0; mi < orders; ++mi) {
    Series s;
    s.label = "moment m = " + g6(rep.rows.front().moments[mi].m);
    s.color = kPalette[mi % 6];
    for (const ReportRow& r : rep.rows) {
      s.xs.push_back(safe_log10(static_cast<double>(r.n)));
      s.ys.push_back(safe_log10(r.moments[mi].rel_err));
    }
    series.push_back(std::move(s));
  }
  if (rep.diffusion.expect_limit > 1e-300) {
    Series s;
    s.label = "abandonment";
    s.color = kPalette[orders % 6];
    for (const ReportRow& r : rep.rows) {
      s.xs.push_back(safe_log10(static_cast<double>(r.n)));
      s.ys.push_back(safe_log10(r.pa_rel_err));
    }
    series.push_back(std::move(s));
  }
  double ax = 1e300, bx = -1e300, ay = 1e300, by = -1e300;
  for (const Series& s : series) {
    for (double v : s.xs) {
      ax = std::min(ax, v);
      bx = std::max(bx, v);
    }
    for (double v : s.ys) {
      ay = std::min(ay, v);
      by = std::max(by, v);
    }
  }
  Canvas c;
  c.set_range(ax - 0.2, bx + 0.2, ay - 0.3, by + 0.3);
  c.title("relative error vs scale parameter");
  c.xlabel("n");
  c.ylabel("relative error");
  c.log_ticks_x();
  c.log_ticks_y();
  c.frame();
  for (std::size_t i = 0; i < series.size(); ++i) {
    c.polyline(series[i].xs, series[i].ys, series[i].color);
    for (std::size_t k = 0; k < series[i].xs.size(); ++k) {
      c.marker(series[i].xs[k], series[i].ys[k], series[i].color);
    }
    c.legend_entry(static_cast<int>(i), series[i].color, series[i].label);
  }
  write_svg(path, c);
}

void plot_cdf_overlay(const ConvergenceReport& rep, const std::filesystem::path& path) {
  const CdfOverlay& ov = rep.overlay;
  if (ov.grid.size() < 2) {
    empty_plot(path, "no distribution overlay recorded");
    return;
  }
  double ks = 0.0;
  for (const ReportRow& r : rep.rows) {
    if (r.n == ov.n) ks = r.ks;
  }
  Canvas c;
  c.set_range(ov.grid.front(), ov.grid.back(), 0.0, 1.05);
  c.title("stationary distribution: simulated vs limit (n = " + std::to_string(ov.n) + ")");
  c.xlabel("scaled workload");
  c.ylabel("CDF");
  c.lin_ticks_x();
  c.lin_ticks_y();
  c.frame();
  c.polyline(ov.grid, ov.empirical, kPalette[0]);
  c.polyline(ov.grid, ov.diffusion, kPalette[1], true);
  c.legend_entry(0, kPalette[0], "simulated");
  c.legend_entry(1, kPalette[1], "limit law", true);
  c.text(c.ml + 12, c.mt + 16, "max gap on grid = " + g6(ks));
  write_svg(path, c);
}

void plot_abandonment(const ConvergenceReport& rep, const std::filesystem::path& path) {
  if (rep.rows.empty()) {
    empty_plot(path, "no rows to plot");
    return;
  }
  std::vector<double> xs, ys, lo, hi;
  for (const ReportRow& r : rep.rows) {
    xs.push_back(safe_log10(static_cast<double>(r.n)));
    ys.push_back(r.sqrtn_pa);
    lo.push_back(r.sqrtn_pa - r.pa_ci);
    hi.push_back(r.sqrtn_pa + r.pa_ci);
  }
  double eh = rep.rows.front().eh;
  double ay = eh, by = eh;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    ay = std::min(ay, lo[i]);
    by = std::max(by, hi[i]);
  }
  double pad = std::max(0.05 * (by - ay), 1e-6);
  Canvas c;
  c.set_range(xs.front() - 0.2, xs.back() + 0.2, ay - pad, by + pad);
  c.title("scaled abandonment rate vs limit prediction");
  c.xlabel("n");
  c.ylabel("sqrt(n) * abandonment fraction");
  c.log_ticks_x();
  c.lin_ticks_y();
  c.frame();
  double yref = c.py(eh);
  c.line(c.ml, yref, c.width - c.mr, yref,
         "stroke=\"" + std::string(kPalette[1]) + "\" stroke-width=\"1.6\" stroke-dasharray=\"6 4\"");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double xpix = c.px(xs[i]);
    c.line(xpix, c.py(lo[i]), xpix, c.py(hi[i]),
           "stroke=\"" + std::string(kPalette[0]) + "\" stroke-width=\"1.4\"");
    c.line(xpix - 5, c.py(lo[i]), xpix + 5, c.py(lo[i]), "stroke=\"" + std::string(kPalette[0]) + "\"");
    c.line(xpix - 5, c.py(hi[i]), xpix + 5, c.py(hi[i]), "stroke=\"" + std::string(kPalette[0]) + "\"");
    c.marker(xs[i], ys[i], kPalette[0]);
  }
  c.legend_entry(0, kPalette[0], "simulated (3-sigma CI)");
  c.legend_entry(1, kPalette[1], "limit prediction", true);
  write_svg(path, c);
}

}  // namespace

void emit_plots(const ConvergenceReport& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::filesystem::path base(dir);
  plot_error_vs_n(rep, base / "error_vs_n.svg");
  plot_cdf_overlay(rep, base / "cdf_overlay.svg");
  plot_abandonment(rep, base / "abandonment.svg");
}

}  // namespace abq
