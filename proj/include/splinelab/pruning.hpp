// Structured pruning built on the pairwise redundancy of unit weight rows:
//   N(k,k') = (1 - |cos(W_k, W_k')|) + rho * |b_k - b_k'|
// plus magnitude/random baselines, unstructured lottery masks, and the
// partition-preservation check for exactly redundant pairs. All policies
// produce structurally consistent networks and an auditable PrunePlan.
#pragma once

#include <optional>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "splinelab/network.hpp"
#include "splinelab/pca.hpp"
#include "splinelab/slice.hpp"

namespace splinelab {

struct RedundancyScore {
  size_t layer = 0, k = 0, k2 = 0;
  double angle_term = 0.0;  // 1 - |cos|, in [0,1]
  double bias_term = 0.0;   // |b_k - b_k2|
  double total = 0.0;       // angle_term + rho * bias_term
  double rho = 0.0;
};

// Throws DegenerateUnitError on zero-norm rows (such units are pruned
// unconditionally by the policy drivers before scores are taken).
RedundancyScore redundancy(const Network& net, size_t layer, size_t k, size_t k2,
                           double rho);

// Global minimum over unordered pairs; ties resolved to the
// lexicographically smallest (k, k2). Throws ArgumentError with < 2 units.
std::tuple<size_t, size_t, double> most_redundant_pair(const Network& net,
                                                       size_t layer, double rho);

enum class Compensation { none, merge_outgoing };
enum class PruneScope { layer, global };

struct Removal {
  size_t layer = 0;
  size_t removed = 0;                 // original unit index
  std::optional<size_t> survivor;     // original index of the kept partner
  std::optional<size_t> survivor_layer;  // set when it differs from `layer`
  double score = 0.0;
};

struct PrunePlan {
  // Original kept unit indices per network layer (all indices for untouched
  // linear layers, empty for pool stages).
  std::vector<std::vector<size_t>> kept;
  std::vector<Removal> log;
  Compensation compensation = Compensation::none;
  bool clamp_warning = false;  // some layer was clamped to keep one unit

  nlohmann::json to_json() const;
  static PrunePlan from_json(const nlohmann::json& j);
};

// Removes one unit from a hidden affine layer and the matching inputs of the
// next affine layer (pool stages in between are transparent). With
// merge_outgoing the survivor's outgoing weights absorb the victim's, which
// preserves the function exactly for exact duplicates.
void remove_unit(Network& net, size_t layer, size_t unit,
                 std::optional<size_t> survivor, Compensation comp);

// Greedy sequential spline pruning per layer: repeatedly remove the
// smaller-norm member of the most redundant pair until
// ceil((1-ratio) * units) remain. Scores are recomputed after every removal.
PrunePlan layerwise_spline_prune(Network& net, double ratio, double rho,
                                 Compensation comp = Compensation::merge_outgoing);

// Global variant: rows from all hidden layers are PCA-aligned to d dims
// (d = 0 picks the smallest flattened row dim) and pairs are searched across
// layers; biases compare raw. Every layer keeps at least one unit.
PrunePlan global_spline_prune(Network& net, double ratio, double rho, size_t d = 0);

// Baselines. Magnitude removes the smallest L1 rows (ties: lowest index
// first); random removes uniformly, deterministic per seed.
PrunePlan magnitude_prune(Network& net, double ratio, PruneScope scope);
PrunePlan random_prune(Network& net, double ratio, PruneScope scope, uint64_t seed);

// Replays a plan's removal log against a fresh copy of the original network.
void apply_plan(Network& net, const PrunePlan& plan);

// Unstructured lottery mask: keep the top `keep_ratio` fraction of trained
// weights by magnitude (global over all affine layers), apply that mask to
// the initialization weights ("rewind"). Masked weights are zeroed.
Network lottery_mask_and_rewind(const Network& net_init, const Network& net_trained,
                                double keep_ratio);

struct Prop1Report {
  bool applicable = false;             // pair is an exact duplicate
  bool antiparallel_zero_bias = false; // hyperplanes coincide with opposite sign
  size_t grid_points = 0;
  size_t distinct_full = 0;     // distinct layer codes with all units
  size_t distinct_dropped = 0;  // distinct layer codes with unit k2's bits dropped
  size_t diff_count = 0;        // distinct_full - distinct_dropped (0 = partition unchanged)
};

// Measures whether dropping unit k2's bits changes the layer-level partition
// of the grid. Non-duplicate pairs are reported (applicable = false), never
// rejected.
Prop1Report verify_prop1(const Network& net, size_t layer, size_t k, size_t k2,
                         const SliceGrid& grid);

}  // namespace splinelab
