#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dynlab/csv.hpp"
#include "dynlab/matrix.hpp"

namespace dynlab {

enum class PlotKind { trajectory2d, series, boxplot };

inline PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "trajectory2d") return PlotKind::trajectory2d;
  if (s == "series") return PlotKind::series;
  if (s == "boxplot") return PlotKind::boxplot;
  throw std::invalid_argument("unknown plot kind: " + s);
}

struct BoxStats {
  std::string label;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

namespace detail_plot {

struct Mapper {
  double lo, hi, px0, px1;
  double operator()(double v) const {
    const double span = hi - lo;
    if (span <= 0.0) return 0.5 * (px0 + px1);
    return px0 + (v - lo) / span * (px1 - px0);
  }
};

inline std::string svg_open(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " +
         std::to_string(w) + " " + std::to_string(h) + "\">\n";
}

inline void minmax(const std::vector<double>& v, double& lo, double& hi) {
  lo = *std::min_element(v.begin(), v.end());
  hi = *std::max_element(v.begin(), v.end());
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
}

}  // namespace detail_plot

// Polyline through (xs[i], ys[i]). Companion CSV holds exactly the plotted
// pairs.
inline std::string render_xy_svg(const std::vector<double>& xs, const std::vector<double>& ys,
                                 const std::string& x_label, const std::string& y_label) {
  require(!xs.empty() && xs.size() == ys.size(), "plot: empty or mismatched series");
  const int w = 640, h = 480, margin = 50;
  double xlo, xhi, ylo, yhi;
  detail_plot::minmax(xs, xlo, xhi);
  detail_plot::minmax(ys, ylo, yhi);
  const detail_plot::Mapper mx{xlo, xhi, static_cast<double>(margin), static_cast<double>(w - margin)};
  const detail_plot::Mapper my{ylo, yhi, static_cast<double>(h - margin), static_cast<double>(margin)};
  std::string svg = detail_plot::svg_open(w, h);
  svg += "<rect x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(margin) + "\" width=\"" +
         std::to_string(w - 2 * margin) + "\" height=\"" + std::to_string(h - 2 * margin) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + std::to_string(w / 2) + "\" y=\"" + std::to_string(h - 10) +
         "\" text-anchor=\"middle\" font-size=\"14\">" + x_label + "</text>\n";
  svg += "<text x=\"15\" y=\"" + std::to_string(h / 2) +
         "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 15 " +
         std::to_string(h / 2) + ")\">" + y_label + "</text>\n";
  svg += "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) svg += ' ';
    svg += format_double(mx(xs[i])) + "," + format_double(my(ys[i]));
  }
  svg += "\"/>\n</svg>\n";
  return svg;
}

inline std::string render_boxplot_svg(const std::vector<BoxStats>& boxes,
                                      const std::string& y_label) {
  require(!boxes.empty(), "plot: no boxes");
  const int w = 640, h = 480, margin = 50;
  double lo = boxes[0].min, hi = boxes[0].max;
  for (const auto& b : boxes) {
    lo = std::min(lo, b.min);
    hi = std::max(hi, b.max);
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const detail_plot::Mapper my{lo, hi, static_cast<double>(h - margin), static_cast<double>(margin)};
  const double slot = static_cast<double>(w - 2 * margin) / static_cast<double>(boxes.size());
  std::string svg = detail_plot::svg_open(w, h);
  svg += "<text x=\"15\" y=\"" + std::to_string(h / 2) +
         "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 15 " +
         std::to_string(h / 2) + ")\">" + y_label + "</text>\n";
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const double cx = margin + slot * (static_cast<double>(i) + 0.5);
    const double bw = slot * 0.4;
    const auto line = [&](double x1, double y1, double x2, double y2) {
      svg += "<line x1=\"" + format_double(x1) + "\" y1=\"" + format_double(y1) + "\" x2=\"" +
             format_double(x2) + "\" y2=\"" + format_double(y2) + "\" stroke=\"black\"/>\n";
    };
    // whiskers span min..max, box spans the quartiles, bar at the median
    line(cx, my(b.min), cx, my(b.q1));
    line(cx, my(b.q3), cx, my(b.max));
    line(cx - bw / 2, my(b.min), cx + bw / 2, my(b.min));
    line(cx - bw / 2, my(b.max), cx + bw / 2, my(b.max));
    svg += "<rect x=\"" + format_double(cx - bw / 2) + "\" y=\"" + format_double(my(b.q3)) +
           "\" width=\"" + format_double(bw) + "\" height=\"" +
           format_double(my(b.q1) - my(b.q3)) + "\" fill=\"#cfe3f2\" stroke=\"black\"/>\n";
    line(cx - bw / 2, my(b.median), cx + bw / 2, my(b.median));
    svg += "<text x=\"" + format_double(cx) + "\" y=\"" + std::to_string(h - 20) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + b.label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

struct PlotFiles {
  std::string svg;
  CsvTable csv;
};

// Renders a trajectory table (or box stats) into SVG plus the companion CSV
// of exactly the plotted values.
inline PlotFiles emit_plot(const CsvTable& data, PlotKind kind) {
  require(!data.rows.empty(), "emit_plot: empty data");
  PlotFiles out;
  switch (kind) {
    case PlotKind::trajectory2d: {
      const auto xs = data.column_values("g0");
      const auto ys = data.column_values("g1");
      out.svg = render_xy_svg(xs, ys, "g0", "g1");
      out.csv.header = {"g0", "g1"};
      for (std::size_t i = 0; i < xs.size(); ++i) out.csv.rows.push_back({xs[i], ys[i]});
      break;
    }
    case PlotKind::series: {
      const auto xs = data.column_values("iteration");
      // first non-iteration column is the plotted series
      require(data.header.size() >= 2, "emit_plot: series needs a value column");
      const std::string value_col = data.header[0] == "iteration" ? data.header[1] : data.header[0];
      const auto ys = data.column_values(value_col);
      out.svg = render_xy_svg(xs, ys, "iteration", value_col);
      out.csv.header = {"iteration", value_col};
      for (std::size_t i = 0; i < xs.size(); ++i) out.csv.rows.push_back({xs[i], ys[i]});
      break;
    }
    case PlotKind::boxplot: {
      // expects columns: group, min, q1, median, q3, max (group is an index)
      std::vector<BoxStats> boxes;
      for (const auto& row : data.rows) {
        BoxStats b;
        b.label = "run" + std::to_string(static_cast<long>(row[data.column("group")]));
        b.min = row[data.column("min")];
        b.q1 = row[data.column("q1")];
        b.median = row[data.column("median")];
        b.q3 = row[data.column("q3")];
        b.max = row[data.column("max")];
        boxes.push_back(std::move(b));
      }
      out.svg = render_boxplot_svg(boxes, "kl");
      out.csv = data;
      break;
    }
  }
  return out;
}

}  // namespace dynlab
