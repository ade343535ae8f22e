#include <cmath>
#include <cstring>

#include "doctest.h"
#include "splinelab/codes.hpp"
#include "splinelab/engine.hpp"
#include "splinelab/rng.hpp"
#include "splinelab/toydata.hpp"

using namespace splinelab;

namespace {

Network two_unit_relu() {
  // hidden 2->2 identity-weight relu + passthrough head
  Network net = make_mlp(2, {2}, 2, relu());
  auto& h = std::get<DenseLayer>(net.layers[0]);
  h.weights = {1, 0, 0, 1};
  auto& head = std::get<DenseLayer>(net.layers[1]);
  head.weights = {1, 0, 0, 1};
  return net;
}

Network random_mlp(const std::vector<size_t>& dims, uint64_t seed,
                   Activation act = relu()) {
  std::vector<size_t> hidden(dims.begin() + 1, dims.end() - 1);
  Network net = make_mlp(dims.front(), hidden, dims.back(), act);
  init_kaiming(net, seed);
  // nonzero biases so kinks do not all pass through the origin
  Rng rng(seed + 1);
  for (Layer& l : net.layers)
    if (auto* d = std::get_if<DenseLayer>(&l))
      for (double& b : d->bias) b = rng.uniform(-0.3, 0.3);
  return net;
}

std::vector<double*> all_params(Network& net) {
  std::vector<double*> out;
  for (Layer& l : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      for (double& w : d->weights) out.push_back(&w);
      for (double& b : d->bias) out.push_back(&b);
    } else if (auto* c = std::get_if<ConvLayer>(&l)) {
      for (double& w : c->kernels) out.push_back(&w);
      for (double& b : c->bias) out.push_back(&b);
    }
  }
  return out;
}

std::vector<double> flat_grads(const Grads& g) {
  std::vector<double> out;
  for (size_t i = 0; i < g.weight.size(); ++i) {
    out.insert(out.end(), g.weight[i].begin(), g.weight[i].end());
    out.insert(out.end(), g.bias[i].begin(), g.bias[i].end());
  }
  return out;
}

bool near_kink(const Network& net, const Dataset& ds, double tol) {
  FwdScratch s;
  for (size_t i = 0; i < ds.size(); ++i) {
    forward_sample(net, ds.x(i), s);
    for (size_t li = 0; li < net.layers.size(); ++li)
      for (double p : s.preact[li])
        if (std::abs(p) < tol) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("forward: identity relu layer") {
  Network net = two_unit_relu();
  const auto r = forward(net, Tensor({2}, {-1.0, 2.0}));
  CHECK(r.output.data == std::vector<double>{0.0, 2.0});
  CHECK(r.preacts[0].data == std::vector<double>{-1.0, 2.0});
}

TEST_CASE("forward: leaky relu") {
  Network net = two_unit_relu();
  std::get<DenseLayer>(net.layers[0]).act = leaky_relu(0.1);
  const auto r = forward(net, Tensor({2}, {-1.0, 2.0}));
  CHECK(r.output.data[0] == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(r.output.data[1] == doctest::Approx(2.0));
}

TEST_CASE("forward: shape mismatch names the layer") {
  Network net = two_unit_relu();
  CHECK_THROWS_AS(forward(net, Tensor({3}, {1, 2, 3})), DimensionError);
  std::get<DenseLayer>(net.layers[1]).in_dim = 5;  // corrupt topology
  CHECK_THROWS_WITH_AS(layer_output_shapes(net),
                       doctest::Contains("layer 1"), DimensionError);
}

TEST_CASE("forward: explicit sawtooth construction matches the target") {
  const Network net = sawtooth_network(2);
  FwdScratch s;
  // spot value
  forward_sample(net, std::vector<double>{1.5}, s);
  CHECK(s.out.back()[0] == doctest::Approx(sawtooth(1.5)).epsilon(1e-12));
  // 1000-point grid oracle
  double mse = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = 2.0 * i / 999.0;
    forward_sample(net, std::vector<double>{x}, s);
    const double e = s.out.back()[0] - sawtooth(x);
    mse += e * e;
  }
  mse /= 1000.0;
  CHECK(mse < 1e-10);
}

TEST_CASE("loss_and_grads: single linear unit quadratic by hand") {
  Network net = make_mlp(1, {}, 1, relu());
  auto& head = std::get<DenseLayer>(net.layers[0]);
  head.weights = {2.0};
  Dataset ds;
  ds.x_shape = {1};
  ds.xs = {1.0};
  ds.targets = {0.0};
  ds.target_dim = 1;
  Grads g = Grads::zeros_like(net);
  const auto st = loss_and_grads(net, ds, LossKind::mse, g);
  CHECK(st.loss == doctest::Approx(4.0));
  CHECK(g.weight[0][0] == doctest::Approx(4.0));
  CHECK(g.bias[0][0] == doctest::Approx(4.0));
}

TEST_CASE("loss_and_grads: finite-difference oracle on a random relu net") {
  size_t checked = 0;
  for (uint64_t seed = 0; seed < 4; ++seed) {
    Network net = random_mlp({3, 6, 4}, 40 + seed);
    Dataset ds;
    ds.x_shape = {3};
    Rng rng(seed);
    for (int i = 0; i < 8; ++i) {
      for (int k = 0; k < 3; ++k) ds.xs.push_back(rng.uniform(-1, 1));
      ds.labels.push_back(static_cast<int>(rng.index(4)));
    }
    if (near_kink(net, ds, 1e-6)) continue;  // resample policy: skip this seed

    Grads g = Grads::zeros_like(net);
    loss_and_grads(net, ds, LossKind::cross_entropy, g);
    const auto analytic = flat_grads(g);
    auto params = all_params(net);
    const double h = 1e-5;
    Grads scratch = Grads::zeros_like(net);
    for (size_t pi = 0; pi < params.size(); pi += 3) {
      const double saved = *params[pi];
      *params[pi] = saved + h;
      const double lp = loss_and_grads(net, ds, LossKind::cross_entropy, scratch).loss;
      *params[pi] = saved - h;
      const double lm = loss_and_grads(net, ds, LossKind::cross_entropy, scratch).loss;
      *params[pi] = saved;
      const double fd = (lp - lm) / (2 * h);
      const double rel = std::abs(analytic[pi] - fd) /
                         std::max({std::abs(analytic[pi]), std::abs(fd), 1e-8});
      CHECK(rel < 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 20);
}

TEST_CASE("loss_and_grads: fully masked layer gets zero weight grads") {
  Network net = random_mlp({2, 4, 2}, 7);
  auto& h = std::get<DenseLayer>(net.layers[0]);
  h.mask.assign(h.weights.size(), 0);
  Dataset ds;
  ds.x_shape = {2};
  ds.xs = {0.3, -0.2, 0.9, 0.1};
  ds.labels = {0, 1};
  Grads g = Grads::zeros_like(net);
  loss_and_grads(net, ds, LossKind::cross_entropy, g);
  for (double w : g.weight[0]) CHECK(w == 0.0);
}

TEST_CASE("loss_and_grads: bad label") {
  Network net = random_mlp({2, 4, 2}, 8);
  Dataset ds;
  ds.x_shape = {2};
  ds.xs = {0.1, 0.2};
  ds.labels = {5};
  Grads g = Grads::zeros_like(net);
  CHECK_THROWS_AS(loss_and_grads(net, ds, LossKind::cross_entropy, g), LabelError);
}

TEST_CASE("sgd_step: plain step") {
  Network net = make_mlp(1, {}, 1, relu());
  SgdState st = SgdState::zeros_like(net);
  Grads g = Grads::zeros_like(net);
  g.weight[0][0] = 1.0;
  sgd_step(net, g, 0.1, 0.0, 0.0, st);
  CHECK(std::get<DenseLayer>(net.layers[0]).weights[0] == doctest::Approx(-0.1));
}

TEST_CASE("sgd_step: two momentum steps, hand-iterated") {
  Network net = make_mlp(1, {}, 1, relu());
  SgdState st = SgdState::zeros_like(net);
  Grads g = Grads::zeros_like(net);
  g.weight[0][0] = 1.0;
  sgd_step(net, g, 0.1, 0.9, 0.0, st);
  sgd_step(net, g, 0.1, 0.9, 0.0, st);
  CHECK(std::get<DenseLayer>(net.layers[0]).weights[0] == doctest::Approx(-0.29));
}

TEST_CASE("sgd_step: masked entries stay zero; non-finite grads abort") {
  Network net = make_mlp(2, {}, 1, relu());
  auto& d = std::get<DenseLayer>(net.layers[0]);
  d.weights = {0.0, 0.5};
  d.mask = {0, 1};
  SgdState st = SgdState::zeros_like(net);
  Grads g = Grads::zeros_like(net);
  g.weight[0] = {3.0, 1.0};
  sgd_step(net, g, 0.1, 0.9, 1e-4, st);
  CHECK(std::get<DenseLayer>(net.layers[0]).weights[0] == 0.0);

  g.weight[0][1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sgd_step(net, g, 0.1, 0.9, 0.0, st), DivergenceError);
}

TEST_CASE("init_kaiming: variance, determinism, zero biases") {
  // fan_in = 2 -> target weight variance 2/2 = 1
  Network net = make_mlp(2, {25000}, 1, relu());
  init_kaiming(net, 123);
  const auto& d = std::get<DenseLayer>(net.layers[0]);
  double mean = 0.0;
  for (double w : d.weights) mean += w;
  mean /= static_cast<double>(d.weights.size());
  double var = 0.0;
  for (double w : d.weights) var += (w - mean) * (w - mean);
  var /= static_cast<double>(d.weights.size());
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  for (double b : d.bias) CHECK(b == 0.0);

  Network net2 = make_mlp(2, {25000}, 1, relu());
  init_kaiming(net2, 123);
  CHECK(std::get<DenseLayer>(net2.layers[0]).weights == d.weights);
}

TEST_CASE("train: zero epochs leaves the net untouched") {
  Network net = random_mlp({2, 4, 2}, 3);
  const Network before = net;
  Dataset ds = make_xshape(10, 0.05, 1);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto metrics = train(net, ds, cfg);
  CHECK(metrics.empty());
  CHECK(std::get<DenseLayer>(net.layers[0]).weights ==
        std::get<DenseLayer>(before.layers[0]).weights);
}

TEST_CASE("train: X-shape 2x20 FCNet reaches > 0.95 after 10000 iterations") {
  Dataset ds = make_xshape(1000, 0.08, 5);
  Network net = make_mlp(2, {20, 20}, 2, relu());
  init_kaiming(net, 5);
  TrainConfig cfg;
  cfg.epochs = 320;  // 2000 samples / batch 64 -> ~31 iterations per epoch
  cfg.batch_size = 64;
  cfg.lr = 0.1;
  cfg.lr_schedule = TrainConfig::step_decay(cfg.epochs);
  cfg.seed = 5;
  const auto metrics = train(net, ds, cfg);
  CHECK(metrics.back().train_acc > 0.95);
}

TEST_CASE("train: EB callback with zero threshold never stops early") {
  Dataset ds = make_xshape(100, 0.08, 2);
  Network net = make_mlp(2, {8}, 2, relu());
  init_kaiming(net, 2);
  size_t calls = 0;
  EpochCallback cb = [&](const Network&, const EpochMetrics&) {
    ++calls;
    return false;  // threshold 0 is unreachable: distances are never < 0
  };
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.lr_schedule.clear();
  const auto metrics = train(net, ds, cfg, {cb});
  CHECK(metrics.size() == 12);
  CHECK(calls == 12);
}

TEST_CASE("train: divergence aborts with an error") {
  Dataset ds = make_xshape(50, 0.08, 3);
  Network net = make_mlp(2, {8}, 2, relu());
  init_kaiming(net, 3);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.lr = 1e12;  // guaranteed blow-up
  cfg.lr_schedule.clear();
  CHECK_THROWS_AS(train(net, ds, cfg), DivergenceError);
}

TEST_CASE("flops_estimate") {
  SUBCASE("dense 2->3") {
    Network net = make_mlp(2, {}, 3, relu());
    CHECK(flops_estimate(net) == 6);
  }
  SUBCASE("pruning half the units halves the layer's MACs") {
    Network net = make_mlp(4, {10}, 2, relu());
    const size_t full = flops_estimate(net);    // 40 + 20
    Network small = make_mlp(4, {5}, 2, relu());
    const size_t half = flops_estimate(small);  // 20 + 10
    CHECK(full == 60);
    CHECK(half == 30);
  }
  SUBCASE("conv 1->1, 3x3, 8x8 input, stride 1, pad 1") {
    Network net;
    net.input_shape = {1, 8, 8};
    ConvLayer c;
    c.in_ch = 1;
    c.out_ch = 1;
    c.kh = c.kw = 3;
    c.stride = 1;
    c.pad = 1;
    c.kernels.assign(9, 0.1);
    c.bias.assign(1, 0.0);
    c.act = relu();
    net.layers.emplace_back(std::move(c));
    CHECK(flops_estimate(net) == 576);
  }
}

TEST_CASE("invariant: CPA region affineness") {
  Rng rng(99);
  size_t done = 0, attempts = 0;
  FwdScratch s;
  while (done < 100 && attempts < 2000) {
    ++attempts;
    Network net = random_mlp({2, 8, 8, 2}, 1000 + attempts);
    std::vector<double> a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    FwdScratch sn;  // fresh scratch per net
    const ActivationCode ca = code_of(net, a, sn);
    // walk toward a nearby point with the same code
    std::vector<double> b = a;
    double step = 1e-2;
    const double dx = rng.uniform(-1, 1), dy = rng.uniform(-1, 1);
    bool found = false;
    for (int t = 0; t < 30 && !found; ++t, step *= 0.5) {
      b = {a[0] + step * dx, a[1] + step * dy};
      found = code_of(net, b, sn) == ca;
    }
    if (!found) continue;

    forward_sample(net, a, sn);
    const std::vector<double> fa = sn.out.back();
    forward_sample(net, b, sn);
    const std::vector<double> fb = sn.out.back();
    double scale = 1.0;
    for (double v : fa) scale = std::max(scale, std::abs(v));
    for (double v : fb) scale = std::max(scale, std::abs(v));

    bool codes_constant = true;
    for (double lam : {0.25, 0.5, 0.75}) {
      const std::vector<double> m = {lam * a[0] + (1 - lam) * b[0],
                                     lam * a[1] + (1 - lam) * b[1]};
      if (!(code_of(net, m, sn) == ca)) {
        codes_constant = false;
        break;
      }
      forward_sample(net, m, sn);
      for (size_t k = 0; k < fa.size(); ++k) {
        const double lerp = lam * fa[k] + (1 - lam) * fb[k];
        CHECK(std::abs(sn.out.back()[k] - lerp) <= 1e-6 * scale);
      }
    }
    if (codes_constant) ++done;
  }
  (void)s;
  CHECK(done == 100);
}

TEST_CASE("invariant: training determinism is bit-for-bit") {
  auto run = [] {
    Dataset ds = make_xshape(100, 0.08, 11);
    Network net = make_mlp(2, {10, 10}, 2, relu());
    init_kaiming(net, 11);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.seed = 11;
    cfg.lr_schedule = TrainConfig::step_decay(cfg.epochs);
    train(net, ds, cfg);
    return net;
  };
  const Network n1 = run(), n2 = run();
  for (size_t i = 0; i < n1.layers.size(); ++i) {
    const auto& a = std::get<DenseLayer>(n1.layers[i]);
    const auto& b = std::get<DenseLayer>(n2.layers[i]);
    CHECK(std::memcmp(a.weights.data(), b.weights.data(),
                      a.weights.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.bias.data(), b.bias.data(), a.bias.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("invariant: mask permanence through training") {
  Dataset ds = make_xshape(100, 0.08, 13);
  Network net = make_mlp(2, {10}, 2, relu());
  init_kaiming(net, 13);
  auto& h = std::get<DenseLayer>(net.layers[0]);
  h.mask.assign(h.weights.size(), 1);
  Rng rng(13);
  for (size_t i = 0; i < h.mask.size(); ++i)
    if (rng.uniform() < 0.5) {
      h.mask[i] = 0;
      h.weights[i] = 0.0;
    }
  const auto mask = h.mask;
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 13;
  cfg.lr_schedule.clear();
  train(net, ds, cfg);
  const auto& ht = std::get<DenseLayer>(net.layers[0]);
  for (size_t i = 0; i < mask.size(); ++i)
    if (!mask[i]) CHECK(ht.weights[i] == 0.0);
}

TEST_CASE("weight interchange round-trips bit-exactly") {
  Network net;
  net.input_shape = {1, 8, 8};
  ConvLayer c;
  c.in_ch = 1;
  c.out_ch = 3;
  c.kh = c.kw = 3;
  c.stride = 1;
  c.pad = 1;
  c.kernels.assign(27, 0.0);
  c.bias.assign(3, 0.0);
  c.act = leaky_relu(0.1);
  net.layers.emplace_back(std::move(c));
  net.layers.emplace_back(PoolLayer{});
  DenseLayer d;
  d.in_dim = 3 * 4 * 4;
  d.out_dim = 5;
  d.weights.assign(d.in_dim * d.out_dim, 0.0);
  d.bias.assign(5, 0.0);
  d.act = identity();
  net.layers.emplace_back(std::move(d));
  init_kaiming(net, 77);

  const std::string path = "/tmp/splinelab_test_weights.net";
  save_network(net, path);
  const Network back = load_network(path);
  CHECK(back.input_shape == net.input_shape);
  const auto& c0 = std::get<ConvLayer>(net.layers[0]);
  const auto& c1 = std::get<ConvLayer>(back.layers[0]);
  CHECK(c0.kernels == c1.kernels);
  CHECK(c1.act.kind == ActKind::leaky_relu);
  CHECK(c1.act.alpha == 0.1);
  const auto& d0 = std::get<DenseLayer>(net.layers[2]);
  const auto& d1 = std::get<DenseLayer>(back.layers[2]);
  CHECK(d0.weights == d1.weights);
  CHECK(d0.bias == d1.bias);
}
