// Deterministic SVG output for partition figures and small line charts.
// Slice coordinates map to pixels as
//   px = margin + (u - umin) / (umax - umin) * plot_w
//   py = margin + (vmax - v) / (vmax - vmin) * plot_h   (v axis points up)
#pragma once

#include <string>
#include <vector>

#include "splinelab/boundaries.hpp"
#include "splinelab/slice.hpp"

namespace splinelab {

struct SvgMarker {
  double u = 0, v = 0;
  int cls = 0;  // indexes marker_colors
};

struct SvgStyle {
  double width = 640, height = 640, margin = 20;
  double stroke_width = 1.2;
  // First coded layer blue, second green, deeper layers cycle; the decision
  // boundary is red, matching the figure convention used throughout.
  std::vector<std::string> layer_colors = {"#1f77b4", "#2ca02c", "#9467bd",
                                           "#8c564b", "#17becf"};
  std::string decision_color = "#d62728";
  std::vector<std::string> marker_colors = {"#ff7f0e", "#7f7f7f", "#bcbd22"};
  double marker_radius = 1.5;
  bool frame = true;
};

// One <g> per (layer, unit) path group; boundary sets must come from `grid`.
std::string render_svg(const std::vector<BoundarySet>& boundaries,
                       const SliceGrid& grid, const SvgStyle& style = {},
                       const std::vector<SvgMarker>& markers = {});

// Minimal polyline chart (used for accuracy-vs-K and accuracy-vs-rho plots).
struct ChartSeries {
  std::string label;
  std::vector<double> x, y;
};
std::string render_line_chart(const std::vector<ChartSeries>& series,
                              const std::string& x_label,
                              const std::string& y_label,
                              double width = 640, double height = 420);

}  // namespace splinelab
