#include "impspec/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace impspec {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

struct Bounds {
  double xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 1.0;
};

Bounds data_bounds(const SvgPlot& plot) {
  Bounds b;
  bool any = false;
  auto grow = [&](double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    if (!any) {
      b.xlo = b.xhi = x;
      b.ylo = b.yhi = y;
      any = true;
      return;
    }
    b.xlo = std::min(b.xlo, x);
    b.xhi = std::max(b.xhi, x);
    b.ylo = std::min(b.ylo, y);
    b.yhi = std::max(b.yhi, y);
  };
  for (const SvgSeries& s : plot.series) {
    for (Eigen::Index i = 0; i < s.x.size(); ++i) {
      grow(s.x[i], s.y[i]);
      if (s.lo.size() == s.x.size() && s.hi.size() == s.x.size()) {
        grow(s.x[i], s.lo[i]);
        grow(s.x[i], s.hi[i]);
      }
    }
  }
  if (!any) return b;
  const double xpad = (b.xhi - b.xlo) * 0.04 + 1e-12;
  const double ypad = (b.yhi - b.ylo) * 0.06 + 1e-12;
  b.xlo -= xpad;
  b.xhi += xpad;
  b.ylo -= ypad;
  b.yhi += ypad;
  return b;
}

}  // namespace

std::string render_svg(const SvgPlot& plot) {
  for (const SvgSeries& s : plot.series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("render_svg: series x/y size mismatch");
    if (s.lo.size() != s.hi.size())
      throw std::invalid_argument("render_svg: band lo/hi size mismatch");
    if (s.lo.size() != 0 && s.lo.size() != s.x.size())
      throw std::invalid_argument("render_svg: band size mismatch");
  }

  const double ml = 64, mr = 16, mt = 34, mb = 46;
  const double pw = plot.width - ml - mr;
  const double ph = plot.height - mt - mb;
  const Bounds b = data_bounds(plot);
  auto px = [&](double x) { return ml + (x - b.xlo) / (b.xhi - b.xlo) * pw; };
  auto py = [&](double y) { return mt + (b.yhi - y) / (b.yhi - b.ylo) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(plot.width) + "\" height=\"" + std::to_string(plot.height) +
         "\" viewBox=\"0 0 " + std::to_string(plot.width) + " " +
         std::to_string(plot.height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">" + escape(plot.title) + "</text>\n";

  // axes and ticks
  const int nticks = 5;
  for (int i = 0; i <= nticks; ++i) {
    const double fx = b.xlo + (b.xhi - b.xlo) * i / nticks;
    const double fy = b.ylo + (b.yhi - b.ylo) * i / nticks;
    out += "<line x1=\"" + fmt(px(fx)) + "\" y1=\"" + fmt(mt) + "\" x2=\"" + fmt(px(fx)) +
           "\" y2=\"" + fmt(mt + ph) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    out += "<line x1=\"" + fmt(ml) + "\" y1=\"" + fmt(py(fy)) + "\" x2=\"" + fmt(ml + pw) +
           "\" y2=\"" + fmt(py(fy)) + "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(mt + ph + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt_tick(fx) + "</text>\n";
    out += "<text x=\"" + fmt(ml - 6) + "\" y=\"" + fmt(py(fy) + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt_tick(fy) + "</text>\n";
  }
  out += "<rect x=\"" + fmt(ml) + "\" y=\"" + fmt(mt) + "\" width=\"" + fmt(pw) +
         "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out += "<text x=\"" + fmt(ml + pw / 2) + "\" y=\"" + fmt(mt + ph + 36) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         escape(plot.xlabel) + "</text>\n";
  out += "<text x=\"16\" y=\"" + fmt(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " + fmt(mt + ph / 2) + ")\">" +
         escape(plot.ylabel) + "</text>\n";

  // bands first so lines draw on top
  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const SvgSeries& s = plot.series[si];
    if (s.lo.size() == 0 || s.x.size() == 0) continue;
    const std::string color =
        s.color.empty() ? kPalette[si % kPaletteSize] : s.color;
    std::string pts;
    for (Eigen::Index i = 0; i < s.x.size(); ++i)
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.hi[i])) + " ";
    for (Eigen::Index i = s.x.size() - 1; i >= 0; --i)
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.lo[i])) + " ";
    out += "<polygon points=\"" + pts + "\" fill=\"" + color +
           "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
  }
  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const SvgSeries& s = plot.series[si];
    if (s.x.size() == 0) continue;
    const std::string color =
        s.color.empty() ? kPalette[si % kPaletteSize] : s.color;
    std::string pts;
    for (Eigen::Index i = 0; i < s.x.size(); ++i)
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
    out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
           "\" stroke-width=\"1.6\"" +
           (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + "/>\n";
  }

  // legend
  double ly = mt + 12;
  for (std::size_t si = 0; si < plot.series.size(); ++si) {
    const SvgSeries& s = plot.series[si];
    if (s.label.empty()) continue;
    const std::string color =
        s.color.empty() ? kPalette[si % kPaletteSize] : s.color;
    out += "<line x1=\"" + fmt(ml + pw - 120) + "\" y1=\"" + fmt(ly) + "\" x2=\"" +
           fmt(ml + pw - 100) + "\" y2=\"" + fmt(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"" + (s.dashed ? " stroke-dasharray=\"6 4\"" : "") +
           "/>\n";
    out += "<text x=\"" + fmt(ml + pw - 94) + "\" y=\"" + fmt(ly + 3) +
           "\" font-family=\"sans-serif\" font-size=\"10\">" + escape(s.label) +
           "</text>\n";
    ly += 14;
  }
  out += "</svg>\n";
  return out;
}

void write_svg(const SvgPlot& plot, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_svg: cannot open " + path);
  f << render_svg(plot);
}

}  // namespace impspec
