#include "splinelab/earlybird.hpp"

#include <bit>
#include <ostream>

namespace splinelab {

double hamming_distance(const ActivationCodeSet& a, const ActivationCodeSet& b) {
  if (a.size() != b.size())
    throw AlignmentError("code sets hold different datum counts");
  if (a.datum_ids != b.datum_ids)
    throw AlignmentError("code sets cover different datum ids");
  if (a.size() == 0) throw AlignmentError("empty code sets");
  size_t total_bits = 0, diff = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& ca = a.codes[i];
    const auto& cb = b.codes[i];
    if (ca.nbits != cb.nbits)
      throw AlignmentError("code length mismatch at datum " + std::to_string(i));
    for (size_t w = 0; w < ca.words.size(); ++w)
      diff += static_cast<size_t>(std::popcount(ca.words[w] ^ cb.words[w]));
    total_bits += ca.nbits;
  }
  if (total_bits == 0) throw AlignmentError("zero-length codes");
  return static_cast<double>(diff) / static_cast<double>(total_bits);
}

DistanceMatrix distance_matrix(const std::vector<ActivationCodeSet>& snapshots) {
  if (snapshots.size() < 2)
    throw ArgumentError("distance matrix needs >= 2 snapshots");
  DistanceMatrix m;
  m.epochs.reserve(snapshots.size());
  for (const auto& s : snapshots) m.epochs.push_back(s.epoch);
  const size_t e = snapshots.size();
  m.values.assign(e * e, 0.0);
  for (size_t i = 0; i < e; ++i)
    for (size_t j = i + 1; j < e; ++j) {
      const double d = hamming_distance(snapshots[i], snapshots[j]);
      m.values[i * e + j] = d;
      m.values[j * e + i] = d;
    }
  return m;
}

void distance_matrix_to_csv(const DistanceMatrix& m, std::ostream& os) {
  os << "epoch";
  for (size_t e : m.epochs) os << "," << e;
  os << "\n";
  for (size_t i = 0; i < m.size(); ++i) {
    os << m.epochs[i];
    for (size_t j = 0; j < m.size(); ++j) os << "," << m.at(i, j);
    os << "\n";
  }
}

void EBConfig::validate() const {
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("eb threshold must be in [0,1]");
  if (window < 1) throw ConfigError("eb window must be >= 1");
  if (probe_size < 1) throw ConfigError("eb probe size must be >= 1");
}

EBDetector::EBDetector(EBConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  report_.threshold = cfg_.threshold;
  report_.window = cfg_.window;
}

bool EBDetector::push(const ActivationCodeSet& snapshot) {
  report_.epochs.push_back(snapshot.epoch);
  bool fired = false;
  if (prev_) {
    const double d = hamming_distance(*prev_, snapshot);
    report_.distance_trace.push_back(d);
    if (d < cfg_.threshold)
      ++below_;
    else
      below_ = 0;
    if (!triggered() && below_ >= cfg_.window) {
      report_.trigger_epoch = snapshot.epoch;
      fired = true;
    }
  }
  prev_ = snapshot;
  return fired;
}

EBReport eb_detect(const std::vector<ActivationCodeSet>& snapshots,
                   const EBConfig& cfg) {
  EBDetector det(cfg);
  for (const auto& s : snapshots) det.push(s);
  return det.report();
}

nlohmann::json EBReport::to_json() const {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["window"] = window;
  j["epochs"] = epochs;
  j["distances"] = distance_trace;
  if (trigger_epoch)
    j["trigger_epoch"] = *trigger_epoch;
  else
    j["trigger_epoch"] = nullptr;
  return j;
}

}  // namespace splinelab
