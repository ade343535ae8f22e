#include "splinelab/network.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace splinelab {

Activation relu() { return {ActKind::relu, 0.0}; }
Activation leaky_relu(double alpha) { return {ActKind::leaky_relu, alpha}; }
Activation identity() { return {ActKind::identity, 0.0}; }

std::string act_name(ActKind kind) {
  switch (kind) {
    case ActKind::identity: return "identity";
    case ActKind::relu: return "relu";
    case ActKind::leaky_relu: return "leaky_relu";
  }
  return "identity";
}

ActKind act_from_name(const std::string& name) {
  if (name == "identity") return ActKind::identity;
  if (name == "relu") return ActKind::relu;
  if (name == "leaky_relu") return ActKind::leaky_relu;
  throw ArgumentError("unknown activation: " + name);
}

bool is_linear(const Layer& layer) {
  return !std::holds_alternative<PoolLayer>(layer);
}

size_t unit_count(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->out_dim;
  if (const auto* c = std::get_if<ConvLayer>(&layer)) return c->out_ch;
  return 0;
}

const Activation* layer_activation(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return &d->act;
  if (const auto* c = std::get_if<ConvLayer>(&layer)) return &c->act;
  return nullptr;
}

static std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

std::vector<std::vector<size_t>> layer_output_shapes(const Network& net) {
  std::vector<std::vector<size_t>> shapes;
  shapes.reserve(net.layers.size());
  std::vector<size_t> cur = net.input_shape;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      // Dense layers flatten whatever comes in.
      if (Tensor::shape_size(cur) != d->in_dim)
        throw DimensionError("layer " + std::to_string(i) + " (dense): input size " +
                             std::to_string(Tensor::shape_size(cur)) + " != in_dim " +
                             std::to_string(d->in_dim));
      cur = {d->out_dim};
    } else if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      if (cur.size() != 3 || cur[0] != c->in_ch)
        throw DimensionError("layer " + std::to_string(i) + " (conv): input shape " +
                             shape_str(cur) + " incompatible with in_ch " +
                             std::to_string(c->in_ch));
      const size_t h = cur[1], w = cur[2];
      if (h + 2 * c->pad < c->kh || w + 2 * c->pad < c->kw)
        throw DimensionError("layer " + std::to_string(i) + " (conv): kernel exceeds padded input");
      const size_t oh = (h + 2 * c->pad - c->kh) / c->stride + 1;
      const size_t ow = (w + 2 * c->pad - c->kw) / c->stride + 1;
      if (oh < 1 || ow < 1)
        throw DimensionError("layer " + std::to_string(i) + " (conv): empty output");
      cur = {c->out_ch, oh, ow};
    } else {
      if (cur.size() != 3)
        throw DimensionError("layer " + std::to_string(i) + " (pool): needs (c,h,w) input, got " +
                             shape_str(cur));
      const size_t oh = cur[1] / 2, ow = cur[2] / 2;
      if (oh < 1 || ow < 1)
        throw DimensionError("layer " + std::to_string(i) + " (pool): input too small " +
                             shape_str(cur));
      cur = {cur[0], oh, ow};
    }
    shapes.push_back(cur);
  }
  return shapes;
}

size_t head_index(const Network& net) {
  for (size_t i = net.layers.size(); i-- > 0;)
    if (is_linear(net.layers[i])) return i;
  throw ArgumentError("network has no affine layer");
}

std::vector<size_t> coded_layers(const Network& net) {
  const size_t head = head_index(net);
  std::vector<size_t> out;
  for (size_t i = 0; i < net.layers.size(); ++i)
    if (i != head && is_linear(net.layers[i])) out.push_back(i);
  return out;
}

size_t code_bit_count(const Network& net) {
  const auto shapes = layer_output_shapes(net);
  size_t bits = 0;
  for (size_t i : coded_layers(net)) bits += Tensor::shape_size(shapes[i]);
  return bits;
}

std::vector<size_t> prunable_layers(const Network& net) {
  return coded_layers(net);
}

std::vector<double> unit_row(const Network& net, size_t layer, size_t unit) {
  const Layer& l = net.layers.at(layer);
  if (const auto* d = std::get_if<DenseLayer>(&l)) {
    std::vector<double> row(d->in_dim);
    for (size_t i = 0; i < d->in_dim; ++i) row[i] = d->w(unit, i);
    return row;
  }
  if (const auto* c = std::get_if<ConvLayer>(&l)) {
    const size_t n = c->in_ch * c->kh * c->kw;
    std::vector<double> row(n);
    for (size_t i = 0; i < n; ++i) row[i] = c->k(unit * n + i);
    return row;
  }
  throw ArgumentError("layer " + std::to_string(layer) + " has no unit rows");
}

double unit_bias(const Network& net, size_t layer, size_t unit) {
  const Layer& l = net.layers.at(layer);
  if (const auto* d = std::get_if<DenseLayer>(&l)) return d->bias.at(unit);
  if (const auto* c = std::get_if<ConvLayer>(&l)) return c->bias.at(unit);
  throw ArgumentError("layer " + std::to_string(layer) + " has no biases");
}

Network make_mlp(size_t in_dim, const std::vector<size_t>& hidden,
                 size_t out_dim, Activation hidden_act) {
  Network net;
  net.input_shape = {in_dim};
  size_t prev = in_dim;
  for (size_t h : hidden) {
    DenseLayer d;
    d.in_dim = prev;
    d.out_dim = h;
    d.weights.assign(h * prev, 0.0);
    d.bias.assign(h, 0.0);
    d.act = hidden_act;
    net.layers.emplace_back(std::move(d));
    prev = h;
  }
  DenseLayer head;
  head.in_dim = prev;
  head.out_dim = out_dim;
  head.weights.assign(out_dim * prev, 0.0);
  head.bias.assign(out_dim, 0.0);
  head.act = identity();
  net.layers.emplace_back(std::move(head));
  return net;
}

// ---------------------------------------------------------------------------
// Weight interchange (docs/weights_format.md)

static void put_f64le(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

static double get_f64le(std::istream& is, size_t& offset) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (is.gcount() != 8)
    throw FormatError("weights file truncated at byte " + std::to_string(offset));
  offset += 8;
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

void save_network(const Network& net, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for write: " + path);
  os << "splinelab-weights 1\n";
  os << "input_shape " << net.input_shape.size();
  for (size_t d : net.input_shape) os << " " << d;
  os << "\n";
  os << "layers " << net.layers.size() << "\n";
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      os << "layer " << i << " dense in " << d->in_dim << " out " << d->out_dim
         << " act " << act_name(d->act.kind) << " alpha " << d->act.alpha
         << " mask " << (d->mask.empty() ? 0 : 1) << "\n";
    } else if (const auto* c = std::get_if<ConvLayer>(&l)) {
      os << "layer " << i << " conv in_ch " << c->in_ch << " out_ch " << c->out_ch
         << " kh " << c->kh << " kw " << c->kw << " stride " << c->stride
         << " pad " << c->pad << " act " << act_name(c->act.kind) << " alpha "
         << c->act.alpha << " mask " << (c->mask.empty() ? 0 : 1) << "\n";
    } else {
      os << "layer " << i << " pool\n";
    }
  }
  os << "end\n";
  for (const Layer& l : net.layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      for (double v : d->weights) put_f64le(os, v);
      for (double v : d->bias) put_f64le(os, v);
      if (!d->mask.empty())
        os.write(reinterpret_cast<const char*>(d->mask.data()),
                 static_cast<std::streamsize>(d->mask.size()));
    } else if (const auto* c = std::get_if<ConvLayer>(&l)) {
      for (double v : c->kernels) put_f64le(os, v);
      for (double v : c->bias) put_f64le(os, v);
      if (!c->mask.empty())
        os.write(reinterpret_cast<const char*>(c->mask.data()),
                 static_cast<std::streamsize>(c->mask.size()));
    }
  }
  if (!os) throw Error("write failed: " + path);
}

Network load_network(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path);
  std::string line;
  size_t offset = 0;
  auto next_line = [&]() {
    if (!std::getline(is, line))
      throw FormatError("weights header truncated at byte " + std::to_string(offset));
    offset += line.size() + 1;
  };

  next_line();
  if (line != "splinelab-weights 1")
    throw FormatError("bad weights magic at byte 0: \"" + line + "\"");

  Network net;
  next_line();
  {
    std::istringstream ls(line);
    std::string tag;
    size_t k = 0;
    ls >> tag >> k;
    if (tag != "input_shape" || !ls)
      throw FormatError("expected input_shape line at byte " + std::to_string(offset - line.size() - 1));
    net.input_shape.resize(k);
    for (size_t i = 0; i < k; ++i) ls >> net.input_shape[i];
    if (!ls) throw FormatError("short input_shape line");
  }

  size_t n_layers = 0;
  next_line();
  {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag >> n_layers;
    if (tag != "layers" || !ls) throw FormatError("expected layers line");
  }

  std::vector<bool> has_mask;
  for (size_t i = 0; i < n_layers; ++i) {
    next_line();
    std::istringstream ls(line);
    std::string tag, kind;
    size_t idx;
    ls >> tag >> idx >> kind;
    if (tag != "layer" || !ls || idx != i)
      throw FormatError("bad layer line " + std::to_string(i) + ": \"" + line + "\"");
    auto expect = [&](const char* key) {
      std::string k;
      ls >> k;
      if (k != key) throw FormatError("layer " + std::to_string(i) + ": expected key '" +
                                      key + "' in \"" + line + "\"");
    };
    if (kind == "dense") {
      DenseLayer d;
      std::string aname;
      int m = 0;
      expect("in"); ls >> d.in_dim;
      expect("out"); ls >> d.out_dim;
      expect("act"); ls >> aname;
      expect("alpha"); ls >> d.act.alpha;
      expect("mask"); ls >> m;
      if (!ls) throw FormatError("short dense layer line " + std::to_string(i));
      d.act.kind = act_from_name(aname);
      d.weights.assign(d.out_dim * d.in_dim, 0.0);
      d.bias.assign(d.out_dim, 0.0);
      has_mask.push_back(m != 0);
      net.layers.emplace_back(std::move(d));
    } else if (kind == "conv") {
      ConvLayer c;
      std::string aname;
      int m = 0;
      expect("in_ch"); ls >> c.in_ch;
      expect("out_ch"); ls >> c.out_ch;
      expect("kh"); ls >> c.kh;
      expect("kw"); ls >> c.kw;
      expect("stride"); ls >> c.stride;
      expect("pad"); ls >> c.pad;
      expect("act"); ls >> aname;
      expect("alpha"); ls >> c.act.alpha;
      expect("mask"); ls >> m;
      if (!ls) throw FormatError("short conv layer line " + std::to_string(i));
      c.act.kind = act_from_name(aname);
      c.kernels.assign(c.out_ch * c.in_ch * c.kh * c.kw, 0.0);
      c.bias.assign(c.out_ch, 0.0);
      has_mask.push_back(m != 0);
      net.layers.emplace_back(std::move(c));
    } else if (kind == "pool") {
      has_mask.push_back(false);
      net.layers.emplace_back(PoolLayer{});
    } else {
      throw FormatError("unknown layer kind '" + kind + "' at line " + std::to_string(i));
    }
  }
  next_line();
  if (line != "end") throw FormatError("expected 'end' after layer list");

  for (size_t i = 0; i < net.layers.size(); ++i) {
    Layer& l = net.layers[i];
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      for (double& v : d->weights) v = get_f64le(is, offset);
      for (double& v : d->bias) v = get_f64le(is, offset);
      if (has_mask[i]) {
        d->mask.resize(d->weights.size());
        is.read(reinterpret_cast<char*>(d->mask.data()),
                static_cast<std::streamsize>(d->mask.size()));
        if (is.gcount() != static_cast<std::streamsize>(d->mask.size()))
          throw FormatError("weights file truncated at byte " + std::to_string(offset));
        offset += d->mask.size();
      }
    } else if (auto* c = std::get_if<ConvLayer>(&l)) {
      for (double& v : c->kernels) v = get_f64le(is, offset);
      for (double& v : c->bias) v = get_f64le(is, offset);
      if (has_mask[i]) {
        c->mask.resize(c->kernels.size());
        is.read(reinterpret_cast<char*>(c->mask.data()),
                static_cast<std::streamsize>(c->mask.size()));
        if (is.gcount() != static_cast<std::streamsize>(c->mask.size()))
          throw FormatError("weights file truncated at byte " + std::to_string(offset));
        offset += c->mask.size();
      }
    }
  }
  layer_output_shapes(net);  // validate
  return net;
}

}  // namespace splinelab
