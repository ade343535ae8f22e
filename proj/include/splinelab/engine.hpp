// Forward/backward evaluation, SGD with momentum and weight decay, Kaiming
// init, the training loop, and MAC counting. Gradients are exact analytic
// derivatives of the mean batch loss; there is no graph autodiff here, just
// the two layer kinds this toolkit supports.
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "splinelab/dataset.hpp"
#include "splinelab/network.hpp"
#include "splinelab/rng.hpp"

namespace splinelab {

enum class LossKind { cross_entropy, mse };

struct ForwardResult {
  Tensor output;
  // Pre-activation (affine output before the coordinate-wise max) per layer;
  // empty tensor for pool stages.
  std::vector<Tensor> preacts;
};

ForwardResult forward(const Network& net, const Tensor& x);

// Scratch for repeated forward passes without reallocation.
struct FwdScratch {
  // Per layer: preact values (linear layers), outputs, pool argmax.
  std::vector<std::vector<double>> preact;
  std::vector<std::vector<double>> out;
  std::vector<std::vector<uint32_t>> argmax;
  std::vector<std::vector<size_t>> shapes;
  bool ready = false;
};

// Low-level single-sample forward; `x` must match the network input size.
// Results live in `scratch` until the next call.
void forward_sample(const Network& net, std::span<const double> x, FwdScratch& scratch);

struct Grads {
  std::vector<std::vector<double>> weight;  // per layer; empty for pool
  std::vector<std::vector<double>> bias;

  static Grads zeros_like(const Network& net);
  void scale(double s);
  bool all_finite() const;
};

struct BatchStats {
  double loss = 0.0;
  size_t correct = 0;  // classification only
  size_t count = 0;
};

// Mean-batch loss and exact gradients over the given sample indices.
// Masked weights receive exactly zero gradient.
BatchStats loss_and_grads(const Network& net, const Dataset& data,
                          std::span<const size_t> batch, LossKind loss,
                          Grads& grads);

// Whole-dataset convenience overload.
BatchStats loss_and_grads(const Network& net, const Dataset& data,
                          LossKind loss, Grads& grads);

struct EvalStats {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalStats evaluate(const Network& net, const Dataset& data, LossKind loss);

struct SgdState {
  std::vector<std::vector<double>> vel_w, vel_b;
  static SgdState zeros_like(const Network& net);
};

// v <- momentum*v - lr*(grad + weight_decay*param); param <- param + v.
// Masked entries stay exactly zero. Throws DivergenceError on non-finite
// gradients.
void sgd_step(Network& net, const Grads& grads, double lr, double momentum,
              double weight_decay, SgdState& state);

// Kaiming-normal init: weights ~ N(0, 2/fan_in), biases zero. Deterministic
// per seed.
void init_kaiming(Network& net, uint64_t seed);

struct TrainConfig {
  size_t epochs = 10;
  size_t batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;       // Appendix-style defaults: 0.9 / 1e-4
  double weight_decay = 1e-4;
  // (epoch, factor): lr is multiplied by `factor` when `epoch` begins.
  // Epochs must be strictly increasing and < epochs.
  std::vector<std::pair<size_t, double>> lr_schedule;
  uint64_t seed = 0;
  LossKind loss = LossKind::cross_entropy;

  void validate() const;
  double lr_at(size_t epoch) const;
  // Standard schedule: divide by 10 at 50% and 75% of the run.
  static std::vector<std::pair<size_t, double>> step_decay(size_t epochs);
};

struct EpochMetrics {
  size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;  // NaN for regression
  double test_loss = 0.0;
  double test_acc = 0.0;
  bool has_test = false;
};

// Return true to request an early stop after this epoch.
using EpochCallback = std::function<bool(const Network&, const EpochMetrics&)>;

std::vector<EpochMetrics> train(Network& net, const Dataset& data,
                                const TrainConfig& cfg,
                                const std::vector<EpochCallback>& callbacks = {},
                                const Dataset* test = nullptr);

// Multiply-accumulate count of one forward pass, counting only unmasked
// weights / kept units. Pool stages cost no MACs.
size_t flops_estimate(const Network& net);

}  // namespace splinelab
