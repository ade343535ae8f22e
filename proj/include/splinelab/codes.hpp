// Activation codes: the binary fingerprint of the input-space partition.
// One bit per hidden unit coordinate (conv layers contribute one bit per
// feature-map entry), concatenated layer-major over all coded layers.
// Bit = 1 iff the pre-activation is >= 0; the head layer is excluded.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "splinelab/dataset.hpp"
#include "splinelab/engine.hpp"
#include "splinelab/network.hpp"

namespace splinelab {

struct ActivationCode {
  std::vector<uint64_t> words;
  size_t nbits = 0;
  std::vector<size_t> layer_offsets;  // start bit of each coded layer

  void resize(size_t bits) {
    nbits = bits;
    words.assign((bits + 63) / 64, 0);
  }
  bool bit(size_t i) const { return (words[i >> 6] >> (i & 63)) & 1; }
  void set_bit(size_t i, bool v) {
    if (v)
      words[i >> 6] |= uint64_t{1} << (i & 63);
    else
      words[i >> 6] &= ~(uint64_t{1} << (i & 63));
  }

  bool operator==(const ActivationCode& o) const {
    return nbits == o.nbits && words == o.words;
  }
  size_t hash() const;
  // Hex packing for the CSV layout: bits 0..3 form the first hex digit
  // (bit 0 least significant), left to right.
  std::string hex() const;
};

struct ActivationCodeSet {
  std::vector<ActivationCode> codes;
  size_t epoch = 0;
  std::vector<uint64_t> datum_ids;

  size_t size() const { return codes.size(); }
};

ActivationCode code_of(const Network& net, const Tensor& x);
// Scratch-reusing variant for bulk extraction.
ActivationCode code_of(const Network& net, std::span<const double> x, FwdScratch& scratch);

// Codes for every sample, datum_ids 0..n-1 unless explicit ids are given.
ActivationCodeSet codes_of_batch(const Network& net, const Dataset& data,
                                 size_t epoch = 0);
ActivationCodeSet codes_of_batch(const Network& net, const Dataset& data,
                                 std::span<const size_t> indices, size_t epoch);

// CSV layout: header "datum_id,epoch,code_hex", one row per datum.
void codes_to_csv(const ActivationCodeSet& set, std::ostream& os);

}  // namespace splinelab
