// Rasterized partition geometry over a slice: per-unit subdivision contours
// (marching squares on the unit's pre-activation), the decision boundary,
// per-point codes and region counting.
#pragma once

#include <optional>
#include <vector>

#include "splinelab/codes.hpp"
#include "splinelab/network.hpp"
#include "splinelab/slice.hpp"

namespace splinelab {

enum class BoundaryKind { subdivision, decision };

struct Segment {
  size_t layer = 0;
  size_t unit = 0;
  double u0 = 0, v0 = 0, u1 = 0, v1 = 0;
};

struct BoundarySet {
  BoundaryKind kind = BoundaryKind::subdivision;
  std::vector<Segment> segments;
};

// Zero contours of every unit's pre-activation in `layer` over the grid.
// For conv layers each feature-map coordinate counts as one unit (flat
// index). Cells with uniform sign emit nothing; saddle cells are split by
// the cell-center sign. Segments are sorted canonically.
BoundarySet subdivision_boundaries(const Network& net, const SliceGrid& grid,
                                   size_t layer,
                                   const std::vector<size_t>* units = nullptr);

// Zero contour of logits[class_a] - logits[class_b].
BoundarySet decision_boundary(const Network& net, const SliceGrid& grid,
                              size_t class_a, size_t class_b);

// Dual-cell edges where the argmax class changes between lattice neighbours.
BoundarySet decision_boundary_argmax(const Network& net, const SliceGrid& grid);

// Number of distinct activation codes among the grid points: a lower bound
// on the number of partition regions intersecting the slice.
size_t region_count(const Network& net, const SliceGrid& grid);

// Codes restricted to one coded layer, per grid point (row-major, i fastest).
std::vector<ActivationCode> layer_codes(const Network& net, const SliceGrid& grid,
                                        size_t layer);

// CSV layout: kind,layer,unit,u0,v0,u1,v1
void boundaries_to_csv(const std::vector<BoundarySet>& sets, std::ostream& os);

}  // namespace splinelab
