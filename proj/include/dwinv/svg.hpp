#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dwinv/io.hpp"
#include "dwinv/util.hpp"

namespace dwinv {

struct PlotSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

namespace svgdetail {

inline constexpr double kW = 720, kH = 480;
inline constexpr double kLeft = 78, kRight = 24, kTop = 42, kBottom = 56;

inline const char* palette(size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return kColors[i % 6];
}

inline std::string px(double v) { return strfmt("%.2f", v); }

struct Axis {
  double lo = 0, hi = 1;   // data range (log10 space for log axes)
  bool log = false;
  double pixel(double v, double p0, double p1) const {
    double t = (v - lo) / (hi - lo);
    return p0 + t * (p1 - p0);
  }
};

inline Axis log_axis(double vmin, double vmax) {
  Axis a;
  a.log = true;
  a.lo = std::floor(std::log10(vmin) + 1e-12);
  a.hi = std::ceil(std::log10(vmax) - 1e-12);
  if (a.hi - a.lo < 1.0) a.hi = a.lo + 1.0;
  return a;
}

inline Axis linear_axis(double vmin, double vmax) {
  Axis a;
  if (vmin == vmax) {
    vmin -= 1.0;
    vmax += 1.0;
  }
  double pad = 0.05 * (vmax - vmin);
  a.lo = vmin - pad;
  a.hi = vmax + pad;
  return a;
}

inline double nice_step(double range, int target_ticks) {
  double raw = range / target_ticks;
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double r = raw / mag;
  double step = r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0;
  return step * mag;
}

inline std::string text_el(double x, double y, const std::string& anchor, const std::string& s,
                           int size = 12, const std::string& extra = "") {
  return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" font-family=\"monospace\" font-size=\"" +
         strfmt("%d", size) + "\" text-anchor=\"" + anchor + "\"" + extra + ">" + s + "</text>\n";
}

inline void open_svg(std::string& s, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel) {
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
       "viewBox=\"0 0 720 480\">\n";
  s += "<rect width=\"720\" height=\"480\" fill=\"white\"/>\n";
  s += "<clipPath id=\"plot\"><rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" +
       px(kW - kLeft - kRight) + "\" height=\"" + px(kH - kTop - kBottom) + "\"/></clipPath>\n";
  s += text_el(kW / 2, 24, "middle", title, 14);
  s += text_el(kLeft + (kW - kLeft - kRight) / 2, kH - 12, "middle", xlabel);
  s += text_el(16, kTop + (kH - kTop - kBottom) / 2, "middle", ylabel, 12,
               " transform=\"rotate(-90 16 " + px(kTop + (kH - kTop - kBottom) / 2) + ")\"");
  s += "<rect x=\"" + px(kLeft) + "\" y=\"" + px(kTop) + "\" width=\"" +
       px(kW - kLeft - kRight) + "\" height=\"" + px(kH - kTop - kBottom) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
}

inline void draw_tick_x(std::string& s, double xp, const std::string& label) {
  s += "<line x1=\"" + px(xp) + "\" y1=\"" + px(kH - kBottom) + "\" x2=\"" + px(xp) + "\" y2=\"" +
       px(kH - kBottom + 5) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + px(xp) + "\" y1=\"" + px(kTop) + "\" x2=\"" + px(xp) + "\" y2=\"" +
       px(kH - kBottom) + "\" stroke=\"#dddddd\"/>\n";
  s += text_el(xp, kH - kBottom + 18, "middle", label, 11);
}

inline void draw_tick_y(std::string& s, double yp, const std::string& label) {
  s += "<line x1=\"" + px(kLeft - 5) + "\" y1=\"" + px(yp) + "\" x2=\"" + px(kLeft) + "\" y2=\"" +
       px(yp) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + px(kLeft) + "\" y1=\"" + px(yp) + "\" x2=\"" + px(kW - kRight) + "\" y2=\"" +
       px(yp) + "\" stroke=\"#dddddd\"/>\n";
  s += text_el(kLeft - 8, yp + 4, "end", label, 11);
}

inline std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                            const Axis& ax, const Axis& ay, const std::string& color,
                            const std::string& dash) {
  std::string pts;
  for (size_t i = 0; i < xs.size(); ++i) {
    double vx = ax.log ? std::log10(xs[i]) : xs[i];
    double vy = ay.log ? std::log10(ys[i]) : ys[i];
    if (i) pts += ' ';
    pts += px(ax.pixel(vx, kLeft, kW - kRight)) + "," + px(ay.pixel(vy, kH - kBottom, kTop));
  }
  std::string el = "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"1.5\"";
  if (!dash.empty()) el += " stroke-dasharray=\"" + dash + "\"";
  el += " clip-path=\"url(#plot)\"/>\n";
  return el;
}

inline std::string markers(const std::vector<double>& xs, const std::vector<double>& ys,
                           const Axis& ax, const Axis& ay, const std::string& color) {
  std::string s;
  for (size_t i = 0; i < xs.size(); ++i) {
    double vx = ax.log ? std::log10(xs[i]) : xs[i];
    double vy = ay.log ? std::log10(ys[i]) : ys[i];
    s += "<circle cx=\"" + px(ax.pixel(vx, kLeft, kW - kRight)) + "\" cy=\"" +
         px(ay.pixel(vy, kH - kBottom, kTop)) + "\" r=\"3\" fill=\"" + color +
         "\" clip-path=\"url(#plot)\"/>\n";
  }
  return s;
}

inline void legend(std::string& s, const std::vector<std::string>& labels,
                   const std::vector<std::string>& colors) {
  double y = kTop + 16;
  for (size_t i = 0; i < labels.size(); ++i) {
    double x = kW - kRight - 170;
    s += "<line x1=\"" + px(x) + "\" y1=\"" + px(y - 4) + "\" x2=\"" + px(x + 24) + "\" y2=\"" +
         px(y - 4) + "\" stroke=\"" + colors[i] + "\" stroke-width=\"2\"/>\n";
    s += text_el(x + 30, y, "start", labels[i], 11);
    y += 16;
  }
}

}  // namespace svgdetail

/// Log-log convergence plot. ref_slopes adds dashed guide lines anchored at
/// the smallest-x point of the first series, each labeled "slope p".
inline void write_loglog_svg(const std::string& path, const std::string& title,
                             const std::string& xlabel, const std::string& ylabel,
                             const std::vector<PlotSeries>& series,
                             const std::vector<double>& ref_slopes = {}) {
  using namespace svgdetail;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& sr : series)
    for (size_t i = 0; i < sr.xs.size(); ++i) {
      if (sr.xs[i] <= 0.0 || sr.ys[i] <= 0.0)
        throw config_error("write_loglog_svg: data must be positive");
      xmin = std::min(xmin, sr.xs[i]);
      xmax = std::max(xmax, sr.xs[i]);
      ymin = std::min(ymin, sr.ys[i]);
      ymax = std::max(ymax, sr.ys[i]);
    }
  if (series.empty() || series[0].xs.empty())
    throw config_error("write_loglog_svg: no data");
  Axis ax = log_axis(xmin, xmax), ay = log_axis(ymin, ymax);

  std::string s;
  open_svg(s, title, xlabel, ylabel);
  int xspan = static_cast<int>(ax.hi - ax.lo);
  int xstep = std::max(1, (xspan + 7) / 8);
  for (int d = static_cast<int>(ax.lo); d <= static_cast<int>(ax.hi); d += xstep)
    draw_tick_x(s, ax.pixel(d, kLeft, kW - kRight), strfmt("1e%d", d));
  int yspan = static_cast<int>(ay.hi - ay.lo);
  int ystep = std::max(1, (yspan + 7) / 8);
  for (int d = static_cast<int>(ay.lo); d <= static_cast<int>(ay.hi); d += ystep)
    draw_tick_y(s, ay.pixel(d, kH - kBottom, kTop), strfmt("1e%d", d));

  // guide lines through the first series' smallest-x point
  size_t anchor = 0;
  for (size_t i = 1; i < series[0].xs.size(); ++i)
    if (series[0].xs[i] < series[0].xs[anchor]) anchor = i;
  double xa = series[0].xs[anchor], ya = series[0].ys[anchor];
  for (double slope : ref_slopes) {
    double y_at_min = ya * std::pow(std::pow(10.0, ax.lo) / xa, slope);
    double y_at_max = ya * std::pow(std::pow(10.0, ax.hi) / xa, slope);
    s += polyline({std::pow(10.0, ax.lo), std::pow(10.0, ax.hi)}, {y_at_min, y_at_max}, ax, ay,
                  "#888888", "6,4");
    double mx = 0.5 * (ax.lo + ax.hi);
    double my = std::log10(ya) + slope * (mx - std::log10(xa));
    s += text_el(ax.pixel(mx, kLeft, kW - kRight) + 6, ay.pixel(my, kH - kBottom, kTop) - 6,
                 "start", strfmt("slope %g", slope), 11);
  }

  std::vector<std::string> labels, colors;
  for (size_t i = 0; i < series.size(); ++i) {
    s += polyline(series[i].xs, series[i].ys, ax, ay, palette(i), "");
    s += markers(series[i].xs, series[i].ys, ax, ay, palette(i));
    labels.push_back(series[i].label);
    colors.push_back(palette(i));
  }
  legend(s, labels, colors);
  s += "</svg>\n";
  write_text_file(path, s);
}

/// Linear axes plot for profiles and traces.
inline void write_line_svg(const std::string& path, const std::string& title,
                           const std::string& xlabel, const std::string& ylabel,
                           const std::vector<PlotSeries>& series) {
  using namespace svgdetail;
  if (series.empty() || series[0].xs.empty())
    throw config_error("write_line_svg: no data");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& sr : series)
    for (size_t i = 0; i < sr.xs.size(); ++i) {
      xmin = std::min(xmin, sr.xs[i]);
      xmax = std::max(xmax, sr.xs[i]);
      ymin = std::min(ymin, sr.ys[i]);
      ymax = std::max(ymax, sr.ys[i]);
    }
  Axis ax = linear_axis(xmin, xmax), ay = linear_axis(ymin, ymax);

  std::string s;
  open_svg(s, title, xlabel, ylabel);
  double xs_step = nice_step(ax.hi - ax.lo, 6);
  for (double v = std::ceil(ax.lo / xs_step) * xs_step; v <= ax.hi + 1e-12 * xs_step; v += xs_step)
    draw_tick_x(s, ax.pixel(v, kLeft, kW - kRight), strfmt("%g", v == 0 ? 0.0 : v));
  double ys_step = nice_step(ay.hi - ay.lo, 6);
  for (double v = std::ceil(ay.lo / ys_step) * ys_step; v <= ay.hi + 1e-12 * ys_step; v += ys_step)
    draw_tick_y(s, ay.pixel(v, kH - kBottom, kTop), strfmt("%g", v == 0 ? 0.0 : v));

  std::vector<std::string> labels, colors;
  for (size_t i = 0; i < series.size(); ++i) {
    s += polyline(series[i].xs, series[i].ys, ax, ay, palette(i), "");
    s += markers(series[i].xs, series[i].ys, ax, ay, palette(i));
    labels.push_back(series[i].label);
    colors.push_back(palette(i));
  }
  legend(s, labels, colors);
  s += "</svg>\n";
  write_text_file(path, s);
}

}  // namespace dwinv
