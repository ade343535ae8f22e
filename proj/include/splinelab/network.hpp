// Network model: a stack of affine layers (dense or 2-D convolution), each
// paired with a coordinate-wise max activation (identity / ReLU / leaky
// ReLU), plus optional 2x2/stride-2 max-pool stages. The final affine layer
// acts as the prediction head. With these operators the network is a
// continuous piecewise-affine map of its input.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "splinelab/errors.hpp"
#include "splinelab/tensor.hpp"

namespace splinelab {

enum class ActKind { identity, relu, leaky_relu };

// Per-coordinate two-piece max activation: relu(z) = max(0, z),
// leaky(z) = max(alpha*z, z) with alpha in (0,1).
struct Activation {
  ActKind kind = ActKind::identity;
  double alpha = 0.0;

  double operator()(double z) const {
    switch (kind) {
      case ActKind::identity: return z;
      case ActKind::relu: return z >= 0.0 ? z : 0.0;
      case ActKind::leaky_relu: return z >= 0.0 ? z : alpha * z;
    }
    return z;
  }

  // Slope of the active piece. The z == 0 kink takes the upper branch,
  // matching the sign(0) = +1 convention used for activation codes.
  double slope(double z) const {
    switch (kind) {
      case ActKind::identity: return 1.0;
      case ActKind::relu: return z >= 0.0 ? 1.0 : 0.0;
      case ActKind::leaky_relu: return z >= 0.0 ? 1.0 : alpha;
    }
    return 1.0;
  }
};

Activation relu();
Activation leaky_relu(double alpha);
Activation identity();

std::string act_name(ActKind kind);
ActKind act_from_name(const std::string& name);

struct DenseLayer {
  size_t in_dim = 0;
  size_t out_dim = 0;
  std::vector<double> weights;  // out_dim x in_dim, row-major
  std::vector<double> bias;     // out_dim
  std::vector<uint8_t> mask;    // empty, or same layout as weights with {0,1}
  Activation act;

  double w(size_t o, size_t i) const {
    const size_t idx = o * in_dim + i;
    return mask.empty() ? weights[idx] : weights[idx] * mask[idx];
  }
};

struct ConvLayer {
  size_t in_ch = 0, out_ch = 0;
  size_t kh = 1, kw = 1;
  size_t stride = 1, pad = 0;
  std::vector<double> kernels;  // out_ch x in_ch x kh x kw, row-major
  std::vector<double> bias;     // out_ch
  std::vector<uint8_t> mask;    // empty, or same layout as kernels
  Activation act;

  size_t kidx(size_t oc, size_t ic, size_t y, size_t x) const {
    return ((oc * in_ch + ic) * kh + y) * kw + x;
  }
  double k(size_t idx) const {
    return mask.empty() ? kernels[idx] : kernels[idx] * mask[idx];
  }
};

// Fixed 2x2 window, stride 2. Odd trailing rows/columns are dropped. The
// selection pattern is not part of activation codes.
struct PoolLayer {};

using Layer = std::variant<DenseLayer, ConvLayer, PoolLayer>;

struct Network {
  std::vector<size_t> input_shape;  // {d} for dense input, {c, h, w} for conv
  std::vector<Layer> layers;
};

bool is_linear(const Layer& layer);
// Units of a linear layer: dense rows or conv output channels. 0 for pool.
size_t unit_count(const Layer& layer);
const Activation* layer_activation(const Layer& layer);

// Output shape of every layer given the network input shape. Throws
// DimensionError naming the first offending layer.
std::vector<std::vector<size_t>> layer_output_shapes(const Network& net);

// Index of the last affine layer (the prediction head).
size_t head_index(const Network& net);

// Linear layers that contribute activation-code bits: every affine layer
// except the head. Pool stages never contribute bits.
std::vector<size_t> coded_layers(const Network& net);

// Total code bits: sum over coded layers of the flattened output size.
size_t code_bit_count(const Network& net);

// Prunable layers: affine layers except the head.
std::vector<size_t> prunable_layers(const Network& net);

// Flattened weight row of one unit (dense row / conv kernel of one output
// channel), with the mask applied when present.
std::vector<double> unit_row(const Network& net, size_t layer, size_t unit);
double unit_bias(const Network& net, size_t layer, size_t unit);

// Convenience builders.
Network make_mlp(size_t in_dim, const std::vector<size_t>& hidden,
                 size_t out_dim, Activation hidden_act = relu());

// Weight interchange: text header plus little-endian float64 payload.
// Exact byte layout documented in docs/weights_format.md.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace splinelab
