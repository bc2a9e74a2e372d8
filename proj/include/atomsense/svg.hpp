#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "atomsense/errors.hpp"

namespace atomsense::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool points = false;
  std::string color = "#1f77b4";
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

inline void write(const Plot& plot, const std::filesystem::path& path) {
  constexpr double W = 640, H = 420, L = 80, R = 20, Tp = 40, B = 60;
  auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return plot.log_y ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if ((plot.log_x && !(s.x[i] > 0)) || (plot.log_y && !(s.y[i] > 0))) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) {
    const double pad = y0 == 0 ? 1.0 : std::abs(y0) * 0.1;
    y0 -= pad, y1 += pad;
  }
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad, y1 += ypad;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - Tp - B); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(plot.title) << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << Tp << "\" width=\"" << W - L - R << "\" height=\""
      << H - Tp - B << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    const double sx = L + (W - L - R) * i / 4.0;
    const double sy = H - B - (H - Tp - B) * i / 4.0;
    out << "<text x=\"" << detail::num(sx) << "\" y=\"" << H - B + 16
        << "\" text-anchor=\"middle\">" << detail::tick_label(plot.log_x ? std::pow(10, fx) : fx)
        << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << detail::num(sy + 4)
        << "\" text-anchor=\"end\">" << detail::tick_label(plot.log_y ? std::pow(10, fy) : fy)
        << "</text>\n";
  }
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 20 << "\" text-anchor=\"middle\">"
      << detail::escape(plot.x_label) << "</text>\n";
  out << "<text transform=\"translate(16," << H / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(plot.y_label) << "</text>\n";

  double legend_y = Tp + 14;
  for (const auto& s : plot.series) {
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if ((plot.log_x && !(s.x[i] > 0)) || (plot.log_y && !(s.y[i] > 0))) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (s.points) {
        out << "<circle cx=\"" << detail::num(px(s.x[i])) << "\" cy=\"" << detail::num(py(s.y[i]))
            << "\" r=\"2\" fill=\"" << s.color << "\"/>\n";
      } else {
        pts += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i])) + " ";
      }
    }
    if (!s.points && !pts.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\""
          << pts << "\"/>\n";
    }
    if (!s.label.empty()) {
      out << "<text x=\"" << W - R - 8 << "\" y=\"" << legend_y << "\" text-anchor=\"end\" fill=\""
          << s.color << "\">" << detail::escape(s.label) << "</text>\n";
      legend_y += 14;
    }
  }
  out << "</svg>\n";
}

}  // namespace atomsense::svg
