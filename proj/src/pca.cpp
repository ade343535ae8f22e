#include "splinelab/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splinelab {

EigenResult symmetric_eigen(const std::vector<double>& mat, size_t n) {
  std::vector<double> a = mat;            // working copy, row-major
  std::vector<double> v(n * n, 0.0);      // accumulated rotations
  for (size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off = [&]() {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) s += a[i * n + j] * a[i * n + j];
    return s;
  };

  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off() > 1e-24; ++sweep) {
    for (size_t p = 0; p + 1 < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double app = a[p * n + p], aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t x, size_t y) {
    return a[x * n + x] > a[y * n + y];
  });

  EigenResult r;
  r.values.reserve(n);
  r.vectors.reserve(n);
  for (size_t oi : order) {
    r.values.push_back(a[oi * n + oi]);
    std::vector<double> vec(n);
    for (size_t k = 0; k < n; ++k) vec[k] = v[k * n + oi];
    r.vectors.push_back(std::move(vec));
  }
  return r;
}

namespace {

void fix_sign(std::vector<double>& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0)
        for (double& y : v) y = -y;
      return;
    }
  }
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> PCAProjection::project(size_t which,
                                           const std::vector<double>& row) const {
  const auto& b = basis.at(which);
  const size_t rowdim = row.size();
  const double nrm = norm2(row);
  std::vector<double> y(d, 0.0);
  if (nrm == 0.0) return y;
  for (size_t i = 0; i < d; ++i) {
    double s = 0.0;
    const double* bi = b.data() + i * rowdim;
    for (size_t k = 0; k < rowdim; ++k) s += bi[k] * row[k];
    y[i] = s / nrm;
  }
  return y;
}

PCAProjection fit_pca_projection(const Network& net, size_t d) {
  const auto layers = prunable_layers(net);
  if (layers.empty()) throw ArgumentError("network has no prunable layers");

  size_t min_rowdim = SIZE_MAX;
  for (size_t li : layers) {
    if (unit_count(net.layers[li]) < 1)
      throw ArgumentError("layer " + std::to_string(li) + " has no units");
    min_rowdim = std::min(min_rowdim, unit_row(net, li, 0).size());
  }
  if (d == 0) d = min_rowdim;
  if (d > min_rowdim)
    throw DimensionError("pca dim " + std::to_string(d) +
                         " exceeds smallest flattened row dim " +
                         std::to_string(min_rowdim));

  PCAProjection proj;
  proj.d = d;
  proj.layers = layers;

  for (size_t li : layers) {
    const size_t m = unit_count(net.layers[li]);
    const size_t rowdim = unit_row(net, li, 0).size();

    // L2-normalized rows; zero rows stay zero and simply do not contribute.
    std::vector<std::vector<double>> rows(m);
    for (size_t u = 0; u < m; ++u) {
      rows[u] = unit_row(net, li, u);
      const double nrm = norm2(rows[u]);
      if (nrm > 0)
        for (double& x : rows[u]) x /= nrm;
    }
    std::vector<double> mean(rowdim, 0.0);
    for (const auto& r : rows)
      for (size_t k = 0; k < rowdim; ++k) mean[k] += r[k];
    for (double& x : mean) x /= static_cast<double>(m);

    // Gram trick: eigenvectors of the m x m centered Gram matrix give the
    // principal directions without forming a rowdim x rowdim covariance.
    std::vector<std::vector<double>> centered(m, std::vector<double>(rowdim));
    for (size_t u = 0; u < m; ++u)
      for (size_t k = 0; k < rowdim; ++k) centered[u][k] = rows[u][k] - mean[k];
    std::vector<double> gram(m * m, 0.0);
    for (size_t ui = 0; ui < m; ++ui)
      for (size_t uj = ui; uj < m; ++uj) {
        double s = 0.0;
        for (size_t k = 0; k < rowdim; ++k) s += centered[ui][k] * centered[uj][k];
        gram[ui * m + uj] = s;
        gram[uj * m + ui] = s;
      }
    const EigenResult eg = symmetric_eigen(gram, m);

    std::vector<double> basis;  // d x rowdim
    basis.reserve(d * rowdim);
    size_t have = 0;
    const double lam_tol = 1e-12 * std::max(1.0, eg.values.empty() ? 0.0 : eg.values[0]);
    for (size_t e = 0; e < m && have < d; ++e) {
      if (!(eg.values[e] > lam_tol)) break;
      std::vector<double> dir(rowdim, 0.0);
      for (size_t u = 0; u < m; ++u)
        for (size_t k = 0; k < rowdim; ++k) dir[k] += eg.vectors[e][u] * centered[u][k];
      const double nrm = norm2(dir);
      if (nrm <= 1e-12) continue;
      for (double& x : dir) x /= nrm;
      fix_sign(dir);
      basis.insert(basis.end(), dir.begin(), dir.end());
      ++have;
    }
    // Deterministic completion from coordinate axes when rank < d.
    for (size_t axis = 0; axis < rowdim && have < d; ++axis) {
      std::vector<double> dir(rowdim, 0.0);
      dir[axis] = 1.0;
      for (size_t e = 0; e < have; ++e) {
        const double* be = basis.data() + e * rowdim;
        double dot = 0.0;
        for (size_t k = 0; k < rowdim; ++k) dot += be[k] * dir[k];
        for (size_t k = 0; k < rowdim; ++k) dir[k] -= dot * be[k];
      }
      const double nrm = norm2(dir);
      if (nrm <= 1e-8) continue;
      for (double& x : dir) x /= nrm;
      fix_sign(dir);
      basis.insert(basis.end(), dir.begin(), dir.end());
      ++have;
    }
    if (have < d)
      throw DimensionError("could not build a rank-" + std::to_string(d) +
                           " basis for layer " + std::to_string(li));
    proj.mean.push_back(std::move(mean));
    proj.basis.push_back(std::move(basis));
  }
  return proj;
}

}  // namespace splinelab
