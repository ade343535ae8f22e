#include "splinelab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace splinelab {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_svg(const std::vector<BoundarySet>& boundaries,
                       const SliceGrid& grid, const SvgStyle& style,
                       const std::vector<SvgMarker>& markers) {
  const double pw = style.width - 2 * style.margin;
  const double ph = style.height - 2 * style.margin;
  const auto& e = grid.extent;
  auto px = [&](double u) { return style.margin + (u - e.umin) / (e.umax - e.umin) * pw; };
  auto py = [&](double v) { return style.margin + (e.vmax - v) / (e.vmax - e.vmin) * ph; };

  // Color subdivision layers by their order among the coded layers that
  // actually appear, so layer indices with pools in between still map to
  // blue, green, ...
  std::map<size_t, size_t> layer_order;
  for (const auto& bs : boundaries)
    if (bs.kind == BoundaryKind::subdivision)
      for (const auto& s : bs.segments) layer_order.emplace(s.layer, 0);
  size_t next = 0;
  for (auto& [layer, ord] : layer_order) ord = next++;

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(style.width)
     << "\" height=\"" << num(style.height) << "\" viewBox=\"0 0 "
     << num(style.width) << " " << num(style.height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (style.frame)
    os << "<rect x=\"" << num(style.margin) << "\" y=\"" << num(style.margin)
       << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
       << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

  for (const auto& m : markers) {
    const auto& c = style.marker_colors[static_cast<size_t>(m.cls) %
                                        style.marker_colors.size()];
    os << "<circle cx=\"" << num(px(m.u)) << "\" cy=\"" << num(py(m.v)) << "\" r=\""
       << num(style.marker_radius) << "\" fill=\"" << c << "\" fill-opacity=\"0.6\"/>\n";
  }

  for (const auto& bs : boundaries) {
    // segments are already canonically sorted by (layer, unit, ...)
    size_t i = 0;
    while (i < bs.segments.size()) {
      const size_t layer = bs.segments[i].layer, unit = bs.segments[i].unit;
      std::string color;
      if (bs.kind == BoundaryKind::decision) {
        color = style.decision_color;
      } else {
        color = style.layer_colors[layer_order[layer] % style.layer_colors.size()];
      }
      os << "<g id=\"" << (bs.kind == BoundaryKind::decision ? "decision" : "subdiv")
         << "-L" << layer << "-U" << unit << "\" stroke=\"" << color
         << "\" stroke-width=\"" << num(style.stroke_width) << "\" fill=\"none\">\n";
      for (; i < bs.segments.size() && bs.segments[i].layer == layer &&
             bs.segments[i].unit == unit;
           ++i) {
        const auto& s = bs.segments[i];
        os << "<path d=\"M " << num(px(s.u0)) << " " << num(py(s.v0)) << " L "
           << num(px(s.u1)) << " " << num(py(s.v1)) << "\"/>\n";
      }
      os << "</g>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string render_line_chart(const std::vector<ChartSeries>& series,
                              const std::string& x_label,
                              const std::string& y_label, double width,
                              double height) {
  const double margin = 50;
  const double pw = width - 2 * margin, ph = height - 2 * margin;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  // pad the y range a little so flat curves stay visible
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return margin + (ymax - y) / (ymax - ymin) * ph; };

  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width)
     << "\" height=\"" << num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<rect x=\"" << num(margin) << "\" y=\"" << num(margin) << "\" width=\""
     << num(pw) << "\" height=\"" << num(ph)
     << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"" << num(height - 10)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
  os << "<text x=\"14\" y=\"" << num(height / 2)
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 14 "
     << num(height / 2) << ")\">" << y_label << "</text>\n";
  // axis extents
  os << "<text x=\"" << num(margin) << "\" y=\"" << num(height - margin + 16)
     << "\" font-size=\"11\">" << num(xmin) << "</text>\n";
  os << "<text x=\"" << num(width - margin) << "\" y=\"" << num(height - margin + 16)
     << "\" text-anchor=\"end\" font-size=\"11\">" << num(xmax) << "</text>\n";
  os << "<text x=\"" << num(margin - 4) << "\" y=\"" << num(height - margin)
     << "\" text-anchor=\"end\" font-size=\"11\">" << num(ymin) << "</text>\n";
  os << "<text x=\"" << num(margin - 4) << "\" y=\"" << num(margin + 4)
     << "\" text-anchor=\"end\" font-size=\"11\">" << num(ymax) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = palette[si % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    os << "\"/>\n";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i]))
         << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << num(margin + 8) << "\" y=\"" << num(margin + 16 + 14 * static_cast<double>(si))
       << "\" font-size=\"12\" fill=\"" << color << "\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace splinelab
