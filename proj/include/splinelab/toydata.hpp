// The two toy problems used throughout: the X-shape 2-class task and the
// univariate sawtooth regression, plus the explicit 2P-unit network that
// fits the sawtooth exactly.
#pragma once

#include <cstdint>

#include "splinelab/dataset.hpp"
#include "splinelab/network.hpp"

namespace splinelab {

// Two classes along the diagonals of [-1,1]^2, each a segment plus Gaussian
// noise. Labels 0 (y = x diagonal) and 1 (y = -x).
Dataset make_xshape(size_t n_per_class, double sigma, uint64_t seed);

// Period-1 triangle wave with range [0,1]: peaks at half-integers, zeros at
// integers; P peaks on [0,P].
double sawtooth(double x);

// Uniform n-point grid on [0, peaks] with sawtooth targets (1-D regression).
Dataset make_sawtooth_data(size_t n, size_t peaks);

// Explicit construction fitting the sawtooth with exactly 2P ReLU units:
// first layer w=1, thresholds at k/2; second layer slope corrections
// +2, -4, +4, -4, ... so the slope alternates between +2 and -2.
Network sawtooth_network(size_t peaks);

}  // namespace splinelab
