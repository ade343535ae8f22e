#pragma once

#include <vector>

#include "splinelab/network.hpp"

namespace splinelab {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
// Returns eigenvalues (descending) and matching eigenvectors as rows.
// Deterministic for a given input.
struct EigenResult {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
};
EigenResult symmetric_eigen(const std::vector<double>& mat, size_t n);

// Per-layer PCA that aligns unit weight rows of different flattened sizes to
// a shared d-dimensional space for the global pruning policy.
//
// Fitting: rows are L2-normalized, mean-centered, and the top-d principal
// directions of the centered covariance are kept (Gram trick, so cost scales
// with the unit count, not the row size). When the data rank is below d the
// basis is completed deterministically from coordinate axes.
//
// Application: project(row) = basis * (row / ||row||). No centering is
// applied at projection time, so a full-rank basis acts as an isometry and
// pairwise |cos| values are preserved exactly.
struct PCAProjection {
  size_t d = 0;
  std::vector<size_t> layers;                    // prunable layer indices
  std::vector<std::vector<double>> mean;         // per layer, length rowdim
  std::vector<std::vector<double>> basis;        // per layer, d x rowdim row-major

  // `which` indexes into `layers`.
  std::vector<double> project(size_t which, const std::vector<double>& row) const;
};

// d == 0 selects the default: min over prunable layers of the flattened row
// dimension. Throws DimensionError when d exceeds that minimum.
PCAProjection fit_pca_projection(const Network& net, size_t d = 0);

}  // namespace splinelab
