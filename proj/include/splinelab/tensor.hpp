#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "splinelab/errors.hpp"

namespace splinelab {

// Dense row-major tensor of doubles. Conv feature maps use NCHW order with
// the batch dimension handled outside (shape is {C, H, W} per sample).
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<size_t> s)
      : shape(std::move(s)), data(shape_size(shape), 0.0) {}

  Tensor(std::vector<size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (shape_size(shape) != data.size())
      throw DimensionError("tensor data length does not match shape");
  }

  static size_t shape_size(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  size_t size() const { return data.size(); }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace splinelab
