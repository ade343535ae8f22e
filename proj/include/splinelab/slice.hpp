// 2-D affine slices of input space. A slice is spanned by three anchors:
// x(u,v) = x0 + u*(x1-x0) + v*(x2-x0), sampled on an N x N lattice over a
// coefficient range. (u,v)=(0,0) maps to x0, (1,0) to x1, (0,1) to x2.
#pragma once

#include <span>
#include <vector>

#include "splinelab/errors.hpp"
#include "splinelab/tensor.hpp"

namespace splinelab {

struct SliceExtent {
  double umin = -0.25, umax = 1.25;
  double vmin = -0.25, vmax = 1.25;
};

struct SliceGrid {
  std::vector<double> x0;
  std::vector<double> du;  // x1 - x0
  std::vector<double> dv;  // x2 - x0
  SliceExtent extent;
  size_t n = 0;  // lattice points per axis

  double u_at(size_t i) const {
    return extent.umin + (extent.umax - extent.umin) * static_cast<double>(i) /
                            static_cast<double>(n - 1);
  }
  double v_at(size_t j) const {
    return extent.vmin + (extent.vmax - extent.vmin) * static_cast<double>(j) /
                            static_cast<double>(n - 1);
  }

  void point_at(double u, double v, std::vector<double>& out) const {
    out.resize(x0.size());
    for (size_t k = 0; k < x0.size(); ++k) out[k] = x0[k] + u * du[k] + v * dv[k];
  }
  void point(size_t i, size_t j, std::vector<double>& out) const {
    point_at(u_at(i), v_at(j), out);
  }

  // All n^2 lattice points, row-major over (j, i), i fastest.
  std::vector<std::vector<double>> points() const;
};

// Throws DegenerateSliceError when x1-x0 and x2-x0 are (nearly) collinear.
SliceGrid make_slice(std::span<const double> x0, std::span<const double> x1,
                     std::span<const double> x2, SliceExtent extent, size_t n);

}  // namespace splinelab
