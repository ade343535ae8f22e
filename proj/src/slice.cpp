#include "splinelab/slice.hpp"

#include <cmath>

namespace splinelab {

std::vector<std::vector<double>> SliceGrid::points() const {
  std::vector<std::vector<double>> pts;
  pts.reserve(n * n);
  std::vector<double> p;
  for (size_t j = 0; j < n; ++j)
    for (size_t i = 0; i < n; ++i) {
      point(i, j, p);
      pts.push_back(p);
    }
  return pts;
}

SliceGrid make_slice(std::span<const double> x0, std::span<const double> x1,
                     std::span<const double> x2, SliceExtent extent, size_t n) {
  if (x0.size() != x1.size() || x0.size() != x2.size())
    throw DimensionError("slice anchors must share one dimension");
  if (n < 2) throw ArgumentError("slice resolution must be >= 2");
  if (!(extent.umax > extent.umin) || !(extent.vmax > extent.vmin))
    throw ArgumentError("slice extent must be non-empty");

  SliceGrid g;
  g.x0.assign(x0.begin(), x0.end());
  g.du.resize(x0.size());
  g.dv.resize(x0.size());
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (size_t k = 0; k < x0.size(); ++k) {
    g.du[k] = x1[k] - x0[k];
    g.dv[k] = x2[k] - x0[k];
    uu += g.du[k] * g.du[k];
    vv += g.dv[k] * g.dv[k];
    uv += g.du[k] * g.dv[k];
  }
  // Gram determinant test for linear independence.
  const double det = uu * vv - uv * uv;
  if (!(det > 1e-12 * uu * vv) || uu == 0.0 || vv == 0.0)
    throw DegenerateSliceError("slice anchors are collinear");
  g.extent = extent;
  g.n = n;
  return g;
}

}  // namespace splinelab
