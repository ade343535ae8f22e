#include "splinelab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splinelab {

// ---------------------------------------------------------------------------
// Forward

static void dense_forward(const DenseLayer& d, std::span<const double> in,
                          std::vector<double>& pre, std::vector<double>& out) {
  pre.resize(d.out_dim);
  out.resize(d.out_dim);
  if (d.mask.empty()) {
    for (size_t o = 0; o < d.out_dim; ++o) {
      const double* w = d.weights.data() + o * d.in_dim;
      double s = d.bias[o];
      for (size_t i = 0; i < d.in_dim; ++i) s += w[i] * in[i];
      pre[o] = s;
      out[o] = d.act(s);
    }
  } else {
    for (size_t o = 0; o < d.out_dim; ++o) {
      const double* w = d.weights.data() + o * d.in_dim;
      const uint8_t* m = d.mask.data() + o * d.in_dim;
      double s = d.bias[o];
      for (size_t i = 0; i < d.in_dim; ++i) s += (m[i] ? w[i] : 0.0) * in[i];
      pre[o] = s;
      out[o] = d.act(s);
    }
  }
}

static void conv_forward(const ConvLayer& c, std::span<const double> in,
                         size_t h, size_t w, size_t oh, size_t ow,
                         std::vector<double>& pre, std::vector<double>& out) {
  pre.assign(c.out_ch * oh * ow, 0.0);
  out.resize(pre.size());
  const long hi = static_cast<long>(h), wi = static_cast<long>(w);
  for (size_t oc = 0; oc < c.out_ch; ++oc) {
    const double b = c.bias[oc];
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        double s = b;
        const long y0 = static_cast<long>(oy * c.stride) - static_cast<long>(c.pad);
        const long x0 = static_cast<long>(ox * c.stride) - static_cast<long>(c.pad);
        for (size_t ic = 0; ic < c.in_ch; ++ic) {
          const double* plane = in.data() + ic * h * w;
          for (size_t ky = 0; ky < c.kh; ++ky) {
            const long iy = y0 + static_cast<long>(ky);
            if (iy < 0 || iy >= hi) continue;
            const size_t krow = c.kidx(oc, ic, ky, 0);
            const double* irow = plane + static_cast<size_t>(iy) * w;
            for (size_t kx = 0; kx < c.kw; ++kx) {
              const long ix = x0 + static_cast<long>(kx);
              if (ix < 0 || ix >= wi) continue;
              s += c.k(krow + kx) * irow[static_cast<size_t>(ix)];
            }
          }
        }
        const size_t oi = (oc * oh + oy) * ow + ox;
        pre[oi] = s;
        out[oi] = c.act(s);
      }
    }
  }
}

static void pool_forward(std::span<const double> in, size_t ch, size_t h, size_t w,
                         size_t oh, size_t ow, std::vector<double>& out,
                         std::vector<uint32_t>& argmax) {
  out.resize(ch * oh * ow);
  argmax.resize(out.size());
  for (size_t c = 0; c < ch; ++c) {
    const double* plane = in.data() + c * h * w;
    for (size_t oy = 0; oy < oh; ++oy) {
      for (size_t ox = 0; ox < ow; ++ox) {
        // 2x2 window; ties keep the first element in scan order.
        size_t best = (2 * oy) * w + 2 * ox;
        double bv = plane[best];
        const size_t cand[3] = {(2 * oy) * w + 2 * ox + 1, (2 * oy + 1) * w + 2 * ox,
                                (2 * oy + 1) * w + 2 * ox + 1};
        for (size_t k : cand) {
          if (plane[k] > bv) {
            bv = plane[k];
            best = k;
          }
        }
        const size_t oi = (c * oh + oy) * ow + ox;
        out[oi] = bv;
        argmax[oi] = static_cast<uint32_t>(c * h * w + best);
      }
    }
  }
}

void forward_sample(const Network& net, std::span<const double> x, FwdScratch& s) {
  if (!s.ready) {
    s.shapes = layer_output_shapes(net);
    s.preact.assign(net.layers.size(), {});
    s.out.assign(net.layers.size(), {});
    s.argmax.assign(net.layers.size(), {});
    s.ready = true;
  }
  if (x.size() != Tensor::shape_size(net.input_shape))
    throw DimensionError("input size " + std::to_string(x.size()) +
                         " != network input size " +
                         std::to_string(Tensor::shape_size(net.input_shape)));
  std::span<const double> cur = x;
  const std::vector<size_t>* cur_shape = &net.input_shape;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      dense_forward(*d, cur, s.preact[i], s.out[i]);
    } else if (const auto* c = std::get_if<ConvLayer>(&l)) {
      conv_forward(*c, cur, (*cur_shape)[1], (*cur_shape)[2], s.shapes[i][1],
                   s.shapes[i][2], s.preact[i], s.out[i]);
    } else {
      pool_forward(cur, (*cur_shape)[0], (*cur_shape)[1], (*cur_shape)[2],
                   s.shapes[i][1], s.shapes[i][2], s.out[i], s.argmax[i]);
      s.preact[i].clear();
    }
    cur = s.out[i];
    cur_shape = &s.shapes[i];
  }
}

ForwardResult forward(const Network& net, const Tensor& x) {
  FwdScratch s;
  forward_sample(net, x.data, s);
  ForwardResult r;
  r.output = Tensor(s.shapes.back(), s.out.back());
  r.preacts.reserve(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (s.preact[i].empty())
      r.preacts.emplace_back();
    else
      r.preacts.emplace_back(s.shapes[i], s.preact[i]);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Backward

Grads Grads::zeros_like(const Network& net) {
  Grads g;
  g.weight.resize(net.layers.size());
  g.bias.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* d = std::get_if<DenseLayer>(&net.layers[i])) {
      g.weight[i].assign(d->weights.size(), 0.0);
      g.bias[i].assign(d->bias.size(), 0.0);
    } else if (const auto* c = std::get_if<ConvLayer>(&net.layers[i])) {
      g.weight[i].assign(c->kernels.size(), 0.0);
      g.bias[i].assign(c->bias.size(), 0.0);
    }
  }
  return g;
}

void Grads::scale(double s) {
  for (auto& v : weight)
    for (double& x : v) x *= s;
  for (auto& v : bias)
    for (double& x : v) x *= s;
}

bool Grads::all_finite() const {
  for (const auto& v : weight)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  for (const auto& v : bias)
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

// dcur holds dL/d(output of layer i) on entry; on exit dprev holds
// dL/d(input of layer i). Parameter grads accumulate into g.
static void backward_sample(const Network& net, std::span<const double> x,
                            const FwdScratch& t, std::vector<double>& dcur,
                            std::vector<double>& dprev, Grads& g) {
  for (size_t i = net.layers.size(); i-- > 0;) {
    std::span<const double> in =
        i == 0 ? x : std::span<const double>(t.out[i - 1]);
    const Layer& l = net.layers[i];
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      const auto& pre = t.preact[i];
      // Fold the activation slope into dcur, making it dL/dpre.
      for (size_t o = 0; o < d->out_dim; ++o) dcur[o] *= d->act.slope(pre[o]);
      dprev.assign(d->in_dim, 0.0);
      double* gw = g.weight[i].data();
      for (size_t o = 0; o < d->out_dim; ++o) {
        const double dp = dcur[o];
        g.bias[i][o] += dp;
        const double* w = d->weights.data() + o * d->in_dim;
        double* gwo = gw + o * d->in_dim;
        if (dp != 0.0) {
          for (size_t k = 0; k < d->in_dim; ++k) {
            gwo[k] += dp * in[k];
            dprev[k] += w[k] * dp;
          }
        }
      }
      if (!d->mask.empty()) {
        // Effective weight is w*m, so masked dprev contributions must go;
        // recompute dprev with the mask applied.
        dprev.assign(d->in_dim, 0.0);
        for (size_t o = 0; o < d->out_dim; ++o) {
          const double dp = dcur[o];
          if (dp == 0.0) continue;
          const double* w = d->weights.data() + o * d->in_dim;
          const uint8_t* m = d->mask.data() + o * d->in_dim;
          for (size_t k = 0; k < d->in_dim; ++k)
            if (m[k]) dprev[k] += w[k] * dp;
        }
      }
    } else if (const auto* c = std::get_if<ConvLayer>(&l)) {
      const auto& pre = t.preact[i];
      const auto& in_shape = i == 0 ? net.input_shape : t.shapes[i - 1];
      const size_t h = in_shape[1], w = in_shape[2];
      const size_t oh = t.shapes[i][1], ow = t.shapes[i][2];
      const long hi = static_cast<long>(h), wi = static_cast<long>(w);
      for (size_t k = 0; k < dcur.size(); ++k) dcur[k] *= c->act.slope(pre[k]);
      dprev.assign(c->in_ch * h * w, 0.0);
      for (size_t oc = 0; oc < c->out_ch; ++oc) {
        for (size_t oy = 0; oy < oh; ++oy) {
          for (size_t ox = 0; ox < ow; ++ox) {
            const double dp = dcur[(oc * oh + oy) * ow + ox];
            if (dp == 0.0) continue;
            g.bias[i][oc] += dp;
            const long y0 = static_cast<long>(oy * c->stride) - static_cast<long>(c->pad);
            const long x0 = static_cast<long>(ox * c->stride) - static_cast<long>(c->pad);
            for (size_t ic = 0; ic < c->in_ch; ++ic) {
              const double* iplane = in.data() + ic * h * w;
              double* dplane = dprev.data() + ic * h * w;
              for (size_t ky = 0; ky < c->kh; ++ky) {
                const long iy = y0 + static_cast<long>(ky);
                if (iy < 0 || iy >= hi) continue;
                const size_t krow = c->kidx(oc, ic, ky, 0);
                const size_t irow = static_cast<size_t>(iy) * w;
                for (size_t kx = 0; kx < c->kw; ++kx) {
                  const long ix = x0 + static_cast<long>(kx);
                  if (ix < 0 || ix >= wi) continue;
                  g.weight[i][krow + kx] += dp * iplane[irow + static_cast<size_t>(ix)];
                  dplane[irow + static_cast<size_t>(ix)] += c->k(krow + kx) * dp;
                }
              }
            }
          }
        }
      }
    } else {
      const auto& in_shape = i == 0 ? net.input_shape : t.shapes[i - 1];
      dprev.assign(Tensor::shape_size(in_shape), 0.0);
      const auto& amax = t.argmax[i];
      for (size_t k = 0; k < dcur.size(); ++k) dprev[amax[k]] += dcur[k];
    }
    std::swap(dcur, dprev);
  }
}

// Per-sample loss and output gradient. MSE is the per-sample sum of squared
// errors; cross-entropy is -log softmax[label].
static double output_loss(std::span<const double> out, const Dataset& data,
                          size_t sample, LossKind loss, std::vector<double>& dout,
                          bool& correct) {
  dout.resize(out.size());
  correct = false;
  if (loss == LossKind::mse) {
    if (data.target_dim != out.size())
      throw DimensionError("target dim " + std::to_string(data.target_dim) +
                           " != output dim " + std::to_string(out.size()));
    auto t = data.target(sample);
    double l = 0.0;
    for (size_t j = 0; j < out.size(); ++j) {
      const double e = out[j] - t[j];
      l += e * e;
      dout[j] = 2.0 * e;
    }
    return l;
  }
  if (!data.has_labels()) throw LabelError("cross_entropy needs labels");
  const int y = data.labels[sample];
  if (y < 0 || static_cast<size_t>(y) >= out.size())
    throw LabelError("label " + std::to_string(y) + " out of range for " +
                     std::to_string(out.size()) + " classes");
  double mx = out[0];
  size_t arg = 0;
  for (size_t j = 1; j < out.size(); ++j)
    if (out[j] > mx) { mx = out[j]; arg = j; }
  double z = 0.0;
  for (size_t j = 0; j < out.size(); ++j) z += std::exp(out[j] - mx);
  const double logz = std::log(z) + mx;
  for (size_t j = 0; j < out.size(); ++j)
    dout[j] = std::exp(out[j] - logz) - (static_cast<int>(j) == y ? 1.0 : 0.0);
  correct = arg == static_cast<size_t>(y);
  return logz - out[static_cast<size_t>(y)];
}

static void zero_masked_grads(const Network& net, Grads& g) {
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const std::vector<uint8_t>* mask = nullptr;
    if (const auto* d = std::get_if<DenseLayer>(&net.layers[i])) {
      if (!d->mask.empty()) mask = &d->mask;
    } else if (const auto* c = std::get_if<ConvLayer>(&net.layers[i])) {
      if (!c->mask.empty()) mask = &c->mask;
    }
    if (mask)
      for (size_t k = 0; k < mask->size(); ++k)
        if (!(*mask)[k]) g.weight[i][k] = 0.0;
  }
}

BatchStats loss_and_grads(const Network& net, const Dataset& data,
                          std::span<const size_t> batch, LossKind loss,
                          Grads& grads) {
  if (batch.empty()) throw ArgumentError("empty batch");
  for (auto& v : grads.weight) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : grads.bias) std::fill(v.begin(), v.end(), 0.0);
  FwdScratch scratch;
  std::vector<double> dout, dprev;
  BatchStats stats;
  for (size_t s : batch) {
    forward_sample(net, data.x(s), scratch);
    bool correct = false;
    stats.loss += output_loss(scratch.out.back(), data, s, loss, dout, correct);
    stats.correct += correct ? 1 : 0;
    backward_sample(net, data.x(s), scratch, dout, dprev, grads);
  }
  stats.count = batch.size();
  stats.loss /= static_cast<double>(batch.size());
  grads.scale(1.0 / static_cast<double>(batch.size()));
  zero_masked_grads(net, grads);
  return stats;
}

BatchStats loss_and_grads(const Network& net, const Dataset& data,
                          LossKind loss, Grads& grads) {
  std::vector<size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  return loss_and_grads(net, data, idx, loss, grads);
}

EvalStats evaluate(const Network& net, const Dataset& data, LossKind loss) {
  if (data.size() == 0) throw ArgumentError("empty dataset");
  FwdScratch scratch;
  std::vector<double> dout;
  EvalStats es;
  size_t correct = 0;
  for (size_t s = 0; s < data.size(); ++s) {
    forward_sample(net, data.x(s), scratch);
    bool c = false;
    es.loss += output_loss(scratch.out.back(), data, s, loss, dout, c);
    correct += c ? 1 : 0;
  }
  es.loss /= static_cast<double>(data.size());
  es.accuracy = data.has_labels()
                    ? static_cast<double>(correct) / static_cast<double>(data.size())
                    : std::numeric_limits<double>::quiet_NaN();
  return es;
}

// ---------------------------------------------------------------------------
// SGD

SgdState SgdState::zeros_like(const Network& net) {
  Grads g = Grads::zeros_like(net);
  SgdState s;
  s.vel_w = std::move(g.weight);
  s.vel_b = std::move(g.bias);
  return s;
}

void sgd_step(Network& net, const Grads& grads, double lr, double momentum,
              double weight_decay, SgdState& state) {
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient");
  for (size_t i = 0; i < net.layers.size(); ++i) {
    std::vector<double>* wp = nullptr;
    std::vector<double>* bp = nullptr;
    const std::vector<uint8_t>* mask = nullptr;
    if (auto* d = std::get_if<DenseLayer>(&net.layers[i])) {
      wp = &d->weights;
      bp = &d->bias;
      if (!d->mask.empty()) mask = &d->mask;
    } else if (auto* c = std::get_if<ConvLayer>(&net.layers[i])) {
      wp = &c->kernels;
      bp = &c->bias;
      if (!c->mask.empty()) mask = &c->mask;
    } else {
      continue;
    }
    auto& vw = state.vel_w[i];
    auto& vb = state.vel_b[i];
    if (vw.size() != wp->size() || vb.size() != bp->size())
      throw DimensionError("sgd state does not match layer " + std::to_string(i));
    for (size_t k = 0; k < wp->size(); ++k) {
      if (mask && !(*mask)[k]) {
        (*wp)[k] = 0.0;
        vw[k] = 0.0;
        continue;
      }
      vw[k] = momentum * vw[k] - lr * (grads.weight[i][k] + weight_decay * (*wp)[k]);
      (*wp)[k] += vw[k];
    }
    for (size_t k = 0; k < bp->size(); ++k) {
      vb[k] = momentum * vb[k] - lr * (grads.bias[i][k] + weight_decay * (*bp)[k]);
      (*bp)[k] += vb[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Init

void init_kaiming(Network& net, uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : net.layers) {
    if (auto* d = std::get_if<DenseLayer>(&layer)) {
      const double stddev = std::sqrt(2.0 / static_cast<double>(d->in_dim));
      for (double& w : d->weights) w = rng.normal(0.0, stddev);
      std::fill(d->bias.begin(), d->bias.end(), 0.0);
      if (!d->mask.empty())
        for (size_t k = 0; k < d->mask.size(); ++k)
          if (!d->mask[k]) d->weights[k] = 0.0;
    } else if (auto* c = std::get_if<ConvLayer>(&layer)) {
      const double fan_in = static_cast<double>(c->in_ch * c->kh * c->kw);
      const double stddev = std::sqrt(2.0 / fan_in);
      for (double& w : c->kernels) w = rng.normal(0.0, stddev);
      std::fill(c->bias.begin(), c->bias.end(), 0.0);
      if (!c->mask.empty())
        for (size_t k = 0; k < c->mask.size(); ++k)
          if (!c->mask[k]) c->kernels[k] = 0.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  // lr == 0 is allowed: it freezes the parameters, which the convergence
  // sanity checks rely on.
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  size_t prev = 0;
  bool first = true;
  for (const auto& [e, f] : lr_schedule) {
    if (!first && e <= prev) throw ConfigError("lr schedule epochs must be strictly increasing");
    if (e >= epochs) throw ConfigError("lr schedule epoch beyond training length");
    if (!(f > 0.0)) throw ConfigError("lr schedule factor must be positive");
    prev = e;
    first = false;
  }
}

double TrainConfig::lr_at(size_t epoch) const {
  double v = lr;
  for (const auto& [e, f] : lr_schedule)
    if (e <= epoch) v *= f;
  return v;
}

std::vector<std::pair<size_t, double>> TrainConfig::step_decay(size_t epochs) {
  std::vector<std::pair<size_t, double>> s;
  const size_t a = epochs / 2, b = (3 * epochs) / 4;
  if (a > 0 && a < epochs) s.emplace_back(a, 0.1);
  if (b > a && b < epochs) s.emplace_back(b, 0.1);
  return s;
}

std::vector<EpochMetrics> train(Network& net, const Dataset& data,
                                const TrainConfig& cfg,
                                const std::vector<EpochCallback>& callbacks,
                                const Dataset* test) {
  cfg.validate();
  if (data.size() == 0) throw ArgumentError("empty dataset");
  layer_output_shapes(net);  // validate topology before touching anything
  std::vector<EpochMetrics> metrics;
  if (cfg.epochs == 0) return metrics;

  Rng rng(cfg.seed);
  SgdState state = SgdState::zeros_like(net);
  Grads grads = Grads::zeros_like(net);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    rng.shuffle(order);
    double loss_sum = 0.0;
    size_t correct = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t len = std::min(cfg.batch_size, order.size() - start);
      std::span<const size_t> batch(order.data() + start, len);
      const BatchStats bs = loss_and_grads(net, data, batch, cfg.loss, grads);
      if (!std::isfinite(bs.loss))
        throw DivergenceError("loss diverged at epoch " + std::to_string(epoch));
      sgd_step(net, grads, lr, cfg.momentum, cfg.weight_decay, state);
      loss_sum += bs.loss * static_cast<double>(len);
      correct += bs.correct;
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(data.size());
    m.train_acc = data.has_labels()
                      ? static_cast<double>(correct) / static_cast<double>(data.size())
                      : std::numeric_limits<double>::quiet_NaN();
    if (test) {
      const EvalStats es = evaluate(net, *test, cfg.loss);
      m.test_loss = es.loss;
      m.test_acc = es.accuracy;
      m.has_test = true;
    }
    metrics.push_back(m);
    bool stop = false;
    for (const auto& cb : callbacks)
      if (cb(net, m)) stop = true;
    if (stop) break;
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// MAC accounting

size_t flops_estimate(const Network& net) {
  const auto shapes = layer_output_shapes(net);
  size_t macs = 0;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* d = std::get_if<DenseLayer>(&net.layers[i])) {
      if (d->mask.empty()) {
        macs += d->out_dim * d->in_dim;
      } else {
        for (uint8_t m : d->mask) macs += m ? 1 : 0;
      }
    } else if (const auto* c = std::get_if<ConvLayer>(&net.layers[i])) {
      // Uniform per-position count; zero padding is not discounted.
      size_t per_pos = 0;
      if (c->mask.empty()) {
        per_pos = c->out_ch * c->in_ch * c->kh * c->kw;
      } else {
        for (uint8_t m : c->mask) per_pos += m ? 1 : 0;
      }
      macs += per_pos * shapes[i][1] * shapes[i][2];
    }
  }
  return macs;
}

}  // namespace splinelab
