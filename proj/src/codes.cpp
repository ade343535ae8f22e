#include "splinelab/codes.hpp"

#include <numeric>
#include <ostream>

namespace splinelab {

size_t ActivationCode::hash() const {
  // FNV-1a over the packed words; the tail word is already zero-padded.
  uint64_t h = 1469598103934665603ull;
  for (uint64_t w : words) {
    for (int i = 0; i < 8; ++i) {
      h ^= (w >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return static_cast<size_t>(h ^ nbits);
}

std::string ActivationCode::hex() const {
  static const char* digits = "0123456789abcdef";
  const size_t n = (nbits + 3) / 4;
  std::string s(n, '0');
  for (size_t d = 0; d < n; ++d) {
    unsigned v = 0;
    for (size_t b = 0; b < 4; ++b) {
      const size_t i = 4 * d + b;
      if (i < nbits && bit(i)) v |= 1u << b;
    }
    s[d] = digits[v];
  }
  return s;
}

ActivationCode code_of(const Network& net, std::span<const double> x,
                       FwdScratch& scratch) {
  forward_sample(net, x, scratch);
  const auto coded = coded_layers(net);
  ActivationCode code;
  size_t total = 0;
  code.layer_offsets.reserve(coded.size());
  for (size_t li : coded) {
    code.layer_offsets.push_back(total);
    total += scratch.preact[li].size();
  }
  code.resize(total);
  size_t bitpos = 0;
  for (size_t li : coded)
    for (double p : scratch.preact[li]) code.set_bit(bitpos++, p >= 0.0);
  return code;
}

ActivationCode code_of(const Network& net, const Tensor& x) {
  FwdScratch scratch;
  return code_of(net, x.data, scratch);
}

ActivationCodeSet codes_of_batch(const Network& net, const Dataset& data,
                                 std::span<const size_t> indices, size_t epoch) {
  if (indices.empty()) throw ArgumentError("codes_of_batch: empty batch");
  ActivationCodeSet set;
  set.epoch = epoch;
  set.codes.reserve(indices.size());
  set.datum_ids.reserve(indices.size());
  FwdScratch scratch;
  for (size_t i : indices) {
    set.codes.push_back(code_of(net, data.x(i), scratch));
    set.datum_ids.push_back(i);
  }
  return set;
}

ActivationCodeSet codes_of_batch(const Network& net, const Dataset& data,
                                 size_t epoch) {
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  return codes_of_batch(net, data, idx, epoch);
}

void codes_to_csv(const ActivationCodeSet& set, std::ostream& os) {
  os << "datum_id,epoch,code_hex\n";
  for (size_t i = 0; i < set.codes.size(); ++i)
    os << set.datum_ids[i] << "," << set.epoch << "," << set.codes[i].hex() << "\n";
}

}  // namespace splinelab
