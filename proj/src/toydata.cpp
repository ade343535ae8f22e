#include "splinelab/toydata.hpp"

#include <cmath>

#include "splinelab/rng.hpp"

namespace splinelab {

Dataset make_xshape(size_t n_per_class, double sigma, uint64_t seed) {
  if (n_per_class == 0) throw ArgumentError("n_per_class must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.x_shape = {2};
  d.xs.reserve(4 * n_per_class);
  d.labels.reserve(2 * n_per_class);
  for (int cls = 0; cls < 2; ++cls) {
    for (size_t i = 0; i < n_per_class; ++i) {
      const double t = rng.uniform(-1.0, 1.0);
      const double x = t + rng.normal(0.0, sigma);
      const double y = (cls == 0 ? t : -t) + rng.normal(0.0, sigma);
      d.xs.push_back(x);
      d.xs.push_back(y);
      d.labels.push_back(cls);
    }
  }
  return d;
}

double sawtooth(double x) {
  const double frac = x - std::floor(x);
  return 1.0 - std::abs(2.0 * frac - 1.0);
}

Dataset make_sawtooth_data(size_t n, size_t peaks) {
  if (n < 2 || peaks < 1) throw ArgumentError("need n >= 2 and peaks >= 1");
  Dataset d;
  d.x_shape = {1};
  d.target_dim = 1;
  for (size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(peaks) * static_cast<double>(i) /
                     static_cast<double>(n - 1);
    d.xs.push_back(x);
    d.targets.push_back(sawtooth(x));
  }
  return d;
}

Network sawtooth_network(size_t peaks) {
  if (peaks < 1) throw ArgumentError("peaks must be >= 1");
  const size_t units = 2 * peaks;
  Network net = make_mlp(1, {units}, 1, relu());
  auto& l1 = std::get<DenseLayer>(net.layers[0]);
  auto& head = std::get<DenseLayer>(net.layers[1]);
  for (size_t k = 0; k < units; ++k) {
    l1.weights[k] = 1.0;
    l1.bias[k] = -0.5 * static_cast<double>(k);
    head.weights[k] = k == 0 ? 2.0 : (k % 2 == 1 ? -4.0 : 4.0);
  }
  head.bias[0] = 0.0;
  return net;
}

}  // namespace splinelab
