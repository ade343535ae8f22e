#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splinelab/errors.hpp"
#include "splinelab/tensor.hpp"

namespace splinelab {

// In-memory dataset with row-major samples. Classification sets carry
// `labels`; regression sets carry `targets` (n x target_dim).
struct Dataset {
  std::vector<size_t> x_shape;
  std::vector<double> xs;
  std::vector<int> labels;
  std::vector<double> targets;
  size_t target_dim = 0;

  size_t x_size() const { return Tensor::shape_size(x_shape); }
  size_t size() const { return x_shape.empty() ? 0 : xs.size() / x_size(); }
  bool has_labels() const { return !labels.empty(); }

  std::span<const double> x(size_t i) const {
    return {xs.data() + i * x_size(), x_size()};
  }
  std::span<const double> target(size_t i) const {
    return {targets.data() + i * target_dim, target_dim};
  }

  Dataset subset(std::span<const size_t> idx) const {
    Dataset out;
    out.x_shape = x_shape;
    out.target_dim = target_dim;
    out.xs.reserve(idx.size() * x_size());
    for (size_t i : idx) {
      auto xi = x(i);
      out.xs.insert(out.xs.end(), xi.begin(), xi.end());
      if (has_labels()) out.labels.push_back(labels[i]);
      if (!targets.empty()) {
        auto ti = target(i);
        out.targets.insert(out.targets.end(), ti.begin(), ti.end());
      }
    }
    return out;
  }
};

}  // namespace splinelab
