#include "splinelab/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "splinelab/rng.hpp"

namespace splinelab {

namespace {

double dist2(const double* a, const double* b, size_t dim) {
  double s = 0.0;
  for (size_t k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

size_t nearest(const double* p, const std::vector<double>& centroids, size_t dim,
               double* best_out = nullptr) {
  const size_t k = centroids.size() / dim;
  size_t arg = 0;
  double best = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < k; ++c) {
    const double d = dist2(p, centroids.data() + c * dim, dim);
    if (d < best) {
      best = d;
      arg = c;
    }
  }
  if (best_out) *best_out = best;
  return arg;
}

}  // namespace

GMMSpec gmm_lattice_spec(size_t k_true, uint64_t seed, double sigma_factor,
                         double jitter) {
  if (k_true < 1) throw ArgumentError("k_true must be >= 1");
  GMMSpec spec;
  spec.k_true = k_true;
  spec.dim = 2;
  const size_t side = static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(k_true))));
  Rng rng(seed);
  spec.means.reserve(k_true * 2);
  for (size_t i = 0; i < k_true; ++i) {
    const double gx = static_cast<double>(i % side);
    const double gy = static_cast<double>(i / side);
    spec.means.push_back(gx + rng.uniform(-jitter, jitter));
    spec.means.push_back(gy + rng.uniform(-jitter, jitter));
  }
  spec.sigma = sigma_factor;  // lattice spacing is 1
  return spec;
}

LabeledPoints sample_gmm(const GMMSpec& spec, size_t n, uint64_t seed) {
  if (n < spec.k_true) throw ArgumentError("need at least one point per component");
  Rng rng(seed);
  LabeledPoints d;
  d.dim = spec.dim;
  d.x.reserve(n * spec.dim);
  d.label.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t c = rng.index(spec.k_true);
    d.label.push_back(static_cast<int>(c));
    for (size_t k = 0; k < spec.dim; ++k)
      d.x.push_back(spec.means[c * spec.dim + k] + rng.normal(0.0, spec.sigma));
  }
  return d;
}

std::vector<double> kmeanspp_init(const LabeledPoints& data, size_t k, uint64_t seed) {
  if (k < 1 || k > data.size())
    throw ArgumentError("kmeans++ needs 1 <= k <= n, got k=" + std::to_string(k));
  Rng rng(seed);
  const size_t dim = data.dim;
  std::vector<double> centroids;
  centroids.reserve(k * dim);

  const size_t first = rng.index(data.size());
  centroids.insert(centroids.end(), data.point(first), data.point(first) + dim);

  std::vector<double> d2(data.size());
  for (size_t i = 0; i < data.size(); ++i)
    d2[i] = dist2(data.point(i), centroids.data(), dim);

  while (centroids.size() / dim < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    size_t pick;
    if (total <= 0.0) {
      // all remaining points coincide with chosen centroids
      pick = rng.index(data.size());
    } else {
      double r = rng.uniform() * total;
      pick = data.size() - 1;
      for (size_t i = 0; i < data.size(); ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    }
    const double* p = data.point(pick);
    centroids.insert(centroids.end(), p, p + dim);
    const double* c = centroids.data() + centroids.size() - dim;
    for (size_t i = 0; i < data.size(); ++i)
      d2[i] = std::min(d2[i], dist2(data.point(i), c, dim));
  }
  return centroids;
}

std::vector<double> random_init(const LabeledPoints& data, size_t k, uint64_t seed) {
  if (k < 1 || k > data.size())
    throw ArgumentError("random init needs 1 <= k <= n, got k=" + std::to_string(k));
  Rng rng(seed);
  // sample k distinct indices
  std::vector<size_t> idx(data.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<double> centroids;
  centroids.reserve(k * data.dim);
  for (size_t i = 0; i < k; ++i)
    centroids.insert(centroids.end(), data.point(idx[i]), data.point(idx[i]) + data.dim);
  return centroids;
}

KMeansModel lloyd_fit(const LabeledPoints& data, std::vector<double> centroids,
                      size_t max_iter, double tol) {
  if (centroids.empty() || centroids.size() % data.dim != 0)
    throw ArgumentError("bad centroid buffer");
  KMeansModel model;
  model.dim = data.dim;
  model.centroids = std::move(centroids);
  const size_t k = model.k();
  const size_t dim = data.dim;

  std::vector<size_t> assign(data.size());
  model.counts.assign(k, 0);

  for (size_t iter = 0; iter < max_iter; ++iter) {
    double inertia = 0.0;
    std::fill(model.counts.begin(), model.counts.end(), size_t{0});
    for (size_t i = 0; i < data.size(); ++i) {
      double d = 0.0;
      assign[i] = nearest(data.point(i), model.centroids, dim, &d);
      model.counts[assign[i]] += 1;
      inertia += d;
    }
    model.inertia_history.push_back(inertia);

    std::vector<double> sums(k * dim, 0.0);
    for (size_t i = 0; i < data.size(); ++i) {
      const double* p = data.point(i);
      double* s = sums.data() + assign[i] * dim;
      for (size_t t = 0; t < dim; ++t) s[t] += p[t];
    }
    double max_shift = 0.0;
    for (size_t c = 0; c < k; ++c) {
      if (model.counts[c] == 0) {
        // re-seed an empty cluster to the point farthest from its centroid
        size_t far = 0;
        double best = -1.0;
        for (size_t i = 0; i < data.size(); ++i) {
          const double d = dist2(data.point(i), model.centroids.data() + assign[i] * dim, dim);
          if (d > best) {
            best = d;
            far = i;
          }
        }
        for (size_t t = 0; t < dim; ++t)
          model.centroids[c * dim + t] = data.point(far)[t];
        max_shift = std::numeric_limits<double>::infinity();
        continue;
      }
      for (size_t t = 0; t < dim; ++t) {
        const double nv = sums[c * dim + t] / static_cast<double>(model.counts[c]);
        max_shift = std::max(max_shift, std::abs(nv - model.centroids[c * dim + t]));
        model.centroids[c * dim + t] = nv;
      }
    }
    if (max_shift < tol) break;
  }

  // final assignment so counts match the returned centroids
  std::fill(model.counts.begin(), model.counts.end(), size_t{0});
  double inertia = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    double d = 0.0;
    const size_t a = nearest(data.point(i), model.centroids, dim, &d);
    model.counts[a] += 1;
    inertia += d;
  }
  model.inertia_history.push_back(inertia);
  return model;
}

void prune_centroids(KMeansModel& model, size_t k_target) {
  if (k_target < 1) throw ArgumentError("k_target must be >= 1");
  if (k_target > model.k()) throw ArgumentError("k_target exceeds current k");
  const size_t dim = model.dim;
  while (model.k() > k_target) {
    const size_t k = model.k();
    size_t pa = 0, pb = 1;
    double best = std::numeric_limits<double>::infinity();
    for (size_t a = 0; a + 1 < k; ++a)
      for (size_t b = a + 1; b < k; ++b) {
        const double d =
            dist2(model.centroids.data() + a * dim, model.centroids.data() + b * dim, dim);
        if (d < best) {
          best = d;
          pa = a;
          pb = b;
        }
      }
    // victim: fewer assigned points; ties remove the lower index
    size_t victim = pa, survivor = pb;
    if (model.counts[pb] < model.counts[pa]) {
      victim = pb;
      survivor = pa;
    }
    model.counts[survivor] += model.counts[victim];
    model.centroids.erase(model.centroids.begin() + static_cast<long>(victim * dim),
                          model.centroids.begin() + static_cast<long>((victim + 1) * dim));
    model.counts.erase(model.counts.begin() + static_cast<long>(victim));
  }
}

double clustering_accuracy(const KMeansModel& model, const LabeledPoints& data) {
  if (data.size() == 0) throw ArgumentError("empty dataset");
  const size_t k = model.k();
  std::vector<size_t> assign(data.size());
  std::vector<std::map<int, size_t>> votes(k);
  for (size_t i = 0; i < data.size(); ++i) {
    assign[i] = nearest(data.point(i), model.centroids, model.dim);
    votes[assign[i]][data.label[i]] += 1;
  }
  std::vector<int> cluster_label(k, -1);
  for (size_t c = 0; c < k; ++c) {
    size_t best = 0;
    for (const auto& [lab, cnt] : votes[c]) {  // map order breaks ties by smaller label
      if (cnt > best) {
        best = cnt;
        cluster_label[c] = lab;
      }
    }
  }
  size_t correct = 0;
  for (size_t i = 0; i < data.size(); ++i)
    if (cluster_label[assign[i]] == data.label[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace splinelab
