// Exception taxonomy for the toolkit. Failure modes map to distinct types so
// callers can match on class instead of parsing messages.
#pragma once

#include <stdexcept>

namespace splinelab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape mismatch; message names the offending layer.
struct DimensionError : Error { using Error::Error; };
// Invalid class label for the configured loss.
struct LabelError : Error { using Error::Error; };
// Non-finite loss or gradient; runs abort, values are never clamped.
struct DivergenceError : Error { using Error::Error; };
// Bad argument values (ratios, class indices, K ranges, ...).
struct ArgumentError : Error { using Error::Error; };
// Mismatched datum ids, code lengths, or architectures.
struct AlignmentError : Error { using Error::Error; };
// Slice anchors are collinear.
struct DegenerateSliceError : Error { using Error::Error; };
// Zero-norm unit row where a direction is required.
struct DegenerateUnitError : Error { using Error::Error; };
// Malformed binary or text input; message carries the byte offset.
struct FormatError : Error { using Error::Error; };
// Invalid experiment configuration.
struct ConfigError : Error { using Error::Error; };

}  // namespace splinelab
