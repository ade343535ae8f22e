// K-means test bed: GMM sampling, random / kmeans++ seeding, Lloyd fitting,
// closest-pair centroid pruning and clustering accuracy. Used to study the
// overparametrize-then-prune recipe against a data-aware initialization.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splinelab/errors.hpp"

namespace splinelab {

struct GMMSpec {
  size_t k_true = 64;
  size_t dim = 2;
  std::vector<double> means;  // k_true x dim row-major
  double sigma = 0.1;         // shared spherical std; uniform cluster prior
};

// True means on a jittered sqrt(k) x sqrt(k) lattice (unit spacing), sigma
// defaulting to 0.2 * spacing so components stay well separated.
GMMSpec gmm_lattice_spec(size_t k_true = 64, uint64_t seed = 0,
                         double sigma_factor = 0.2, double jitter = 0.15);

struct LabeledPoints {
  size_t dim = 0;
  std::vector<double> x;   // n x dim row-major
  std::vector<int> label;  // true component per point

  size_t size() const { return label.size(); }
  const double* point(size_t i) const { return x.data() + i * dim; }
};

LabeledPoints sample_gmm(const GMMSpec& spec, size_t n, uint64_t seed);

enum class InitScheme { random_data_points, kmeanspp };

// First centroid uniform over data, each next drawn proportional to the
// squared distance to the nearest chosen centroid.
std::vector<double> kmeanspp_init(const LabeledPoints& data, size_t k, uint64_t seed);
// Distinct data points drawn uniformly.
std::vector<double> random_init(const LabeledPoints& data, size_t k, uint64_t seed);

struct KMeansModel {
  size_t dim = 0;
  std::vector<double> centroids;        // k x dim
  std::vector<size_t> counts;           // last-assignment cluster sizes
  std::vector<double> inertia_history;  // per Lloyd iteration (non-increasing)
  InitScheme init_scheme = InitScheme::random_data_points;

  size_t k() const { return dim == 0 ? 0 : centroids.size() / dim; }
};

// Lloyd iterations until the max centroid shift drops below tol or max_iter.
// Empty clusters are re-seeded to the point farthest from its centroid.
KMeansModel lloyd_fit(const LabeledPoints& data, std::vector<double> centroids,
                      size_t max_iter = 100, double tol = 1e-9);

// Repeatedly removes one member of the closest centroid pair (the one whose
// cluster holds fewer points; ties remove the lower index) until k_target
// remain. The survivor absorbs the removed cluster's count.
void prune_centroids(KMeansModel& model, size_t k_target);

// Nearest-centroid assignment, majority true label per centroid, fraction of
// correctly labeled points.
double clustering_accuracy(const KMeansModel& model, const LabeledPoints& data);

}  // namespace splinelab
