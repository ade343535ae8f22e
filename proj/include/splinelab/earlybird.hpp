// Partition drift between training snapshots, measured as the normalized
// hamming distance between activation-code sets, and the early-bird stopping
// rule built on it. The detector sees nothing but code sets, so the trigger
// cannot depend on any downstream pruning choice.
#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "json.hpp"
#include "splinelab/codes.hpp"

namespace splinelab {

// Fraction of differing bits across all aligned data; in [0,1], symmetric.
// Throws AlignmentError on mismatched datum ids or code lengths.
double hamming_distance(const ActivationCodeSet& a, const ActivationCodeSet& b);

struct DistanceMatrix {
  std::vector<size_t> epochs;
  std::vector<double> values;  // row-major size() x size()

  size_t size() const { return epochs.size(); }
  double at(size_t i, size_t j) const { return values[i * size() + j]; }
};

DistanceMatrix distance_matrix(const std::vector<ActivationCodeSet>& snapshots);
void distance_matrix_to_csv(const DistanceMatrix& m, std::ostream& os);

struct EBConfig {
  // Consecutive-epoch distance threshold. 0 disables triggering (distances
  // are never < 0).
  double threshold = 0.15;
  size_t window = 2;       // consecutive pair-distances required below threshold
  size_t probe_size = 1024;

  void validate() const;
};

struct EBReport {
  std::optional<size_t> trigger_epoch;
  std::vector<size_t> epochs;          // snapshot labels, in arrival order
  std::vector<double> distance_trace;  // consecutive distances, one per epoch after the first
  double threshold = 0.15;
  size_t window = 2;

  nlohmann::json to_json() const;
};

// Sequential state machine fed one snapshot per epoch.
class EBDetector {
 public:
  explicit EBDetector(EBConfig cfg);

  // Returns true exactly once, at the epoch completing the window.
  bool push(const ActivationCodeSet& snapshot);
  bool triggered() const { return report_.trigger_epoch.has_value(); }
  const EBReport& report() const { return report_; }

 private:
  EBConfig cfg_;
  std::optional<ActivationCodeSet> prev_;
  size_t below_ = 0;
  EBReport report_;
};

// Batch convenience over an ordered snapshot list.
EBReport eb_detect(const std::vector<ActivationCodeSet>& snapshots,
                   const EBConfig& cfg);

}  // namespace splinelab
