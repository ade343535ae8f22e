#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "splinelab/boundaries.hpp"
#include "splinelab/codes.hpp"
#include "splinelab/engine.hpp"
#include "splinelab/rng.hpp"
#include "splinelab/svg.hpp"
#include "splinelab/toydata.hpp"

using namespace splinelab;

namespace {

Network hidden_units_net(const std::vector<std::vector<double>>& rows,
                         const std::vector<double>& biases, size_t head_out = 1) {
  // one relu hidden layer with explicit rows + zero head
  const size_t in = rows[0].size();
  Network net = make_mlp(in, {rows.size()}, head_out, relu());
  auto& h = std::get<DenseLayer>(net.layers[0]);
  for (size_t k = 0; k < rows.size(); ++k) {
    for (size_t i = 0; i < in; ++i) h.weights[k * in + i] = rows[k][i];
    h.bias[k] = biases[k];
  }
  return net;
}

SliceGrid unit_grid(size_t n, double lo = 0.0, double hi = 1.0) {
  const std::vector<double> o = {0, 0}, e1 = {1, 0}, e2 = {0, 1};
  return make_slice(o, e1, e2, {lo, hi, lo, hi}, n);
}

Network random_mlp2(const std::vector<size_t>& dims, uint64_t seed) {
  std::vector<size_t> hidden(dims.begin() + 1, dims.end() - 1);
  Network net = make_mlp(dims.front(), hidden, dims.back(), relu());
  init_kaiming(net, seed);
  Rng rng(seed + 1);
  for (Layer& l : net.layers)
    if (auto* d = std::get_if<DenseLayer>(&l))
      for (double& b : d->bias) b = rng.uniform(-0.4, 0.4);
  return net;
}

// cell coordinates of a segment, from its midpoint
std::pair<long, long> segment_cell(const SliceGrid& g, const Segment& s) {
  const double du = g.u_at(1) - g.u_at(0);
  const double dv = g.v_at(1) - g.v_at(0);
  const double mu = 0.5 * (s.u0 + s.u1), mv = 0.5 * (s.v0 + s.v1);
  return {static_cast<long>(std::floor((mu - g.extent.umin) / du)),
          static_cast<long>(std::floor((mv - g.extent.vmin) / dv))};
}

}  // namespace

TEST_CASE("code_of: sign bits of the hidden layer, head excluded") {
  Network net = hidden_units_net({{1, 0}, {0, 1}}, {0, 0});
  const ActivationCode c = code_of(net, Tensor({2}, {1.0, -1.0}));
  CHECK(c.nbits == 2);
  CHECK(c.bit(0) == true);
  CHECK(c.bit(1) == false);
}

TEST_CASE("code_of: same region, same code") {
  Network net = hidden_units_net({{1, 0}, {0, 1}}, {0, 0});
  const ActivationCode a = code_of(net, Tensor({2}, {1.0, 2.0}));
  const ActivationCode b = code_of(net, Tensor({2}, {3.0, 4.0}));
  CHECK(a == b);
}

TEST_CASE("code_of: sign(0) counts as +1") {
  Network net = hidden_units_net({{1, 0}}, {0});
  const ActivationCode c = code_of(net, Tensor({2}, {0.0, 5.0}));
  CHECK(c.bit(0) == true);
}

TEST_CASE("codes_of_batch: order, ids, duplicates") {
  Network net = hidden_units_net({{1, 0}, {0, 1}}, {0, 0});
  Dataset ds;
  ds.x_shape = {2};
  ds.xs = {1, -1, 1, -1};  // duplicated datum
  ds.labels = {0, 0};
  const auto set = codes_of_batch(net, ds, 3);
  CHECK(set.size() == 2);
  CHECK(set.epoch == 3);
  CHECK(set.datum_ids == std::vector<uint64_t>{0, 1});
  CHECK(set.codes[0] == set.codes[1]);
  CHECK(set.codes[0] == code_of(net, Tensor({2}, {1.0, -1.0})));
}

TEST_CASE("codes_of_batch: codes move during training") {
  Dataset ds = make_xshape(100, 0.08, 21);
  Network net = make_mlp(2, {10}, 2, relu());
  init_kaiming(net, 21);
  const auto before = codes_of_batch(net, ds, 0);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 21;
  cfg.lr_schedule.clear();
  train(net, ds, cfg);
  const auto after = codes_of_batch(net, ds, 5);
  size_t diff = 0;
  for (size_t i = 0; i < before.size(); ++i)
    for (size_t b = 0; b < before.codes[i].nbits; ++b)
      diff += before.codes[i].bit(b) != after.codes[i].bit(b);
  CHECK(diff >= 1);
}

TEST_CASE("make_slice: 2x2 lattice") {
  const std::vector<double> o = {0, 0}, e1 = {1, 0}, e2 = {0, 1};
  const SliceGrid g = make_slice(o, e1, e2, {0, 1, 0, 1}, 2);
  const auto pts = g.points();
  REQUIRE(pts.size() == 4);
  CHECK(pts[0] == std::vector<double>{0, 0});
  CHECK(pts[1] == std::vector<double>{1, 0});
  CHECK(pts[2] == std::vector<double>{0, 1});
  CHECK(pts[3] == std::vector<double>{1, 1});
}

TEST_CASE("make_slice: corner of an off-center extent") {
  const std::vector<double> o = {0, 0}, e1 = {1, 0}, e2 = {0, 1};
  const SliceGrid g = make_slice(o, e1, e2, {-0.5, 1.5, -0.5, 1.5}, 101);
  CHECK(g.points().size() == 10201);
  std::vector<double> p;
  g.point(0, 0, p);
  CHECK(p[0] == doctest::Approx(-0.5));
  CHECK(p[1] == doctest::Approx(-0.5));
}

TEST_CASE("make_slice: collinear anchors rejected") {
  const std::vector<double> o = {0, 0}, a = {1, 1}, b = {2, 2};
  CHECK_THROWS_AS(make_slice(o, a, b, {0, 1, 0, 1}, 10), DegenerateSliceError);
}

TEST_CASE("subdivision_boundaries: hyperplane gives a straight vertical line") {
  Network net = hidden_units_net({{1, 0}, {0, 1}}, {-0.5, 10.0});
  const SliceGrid g = unit_grid(11);
  const BoundarySet bs = subdivision_boundaries(net, g, 0);
  size_t unit0 = 0, unit1 = 0;
  for (const Segment& s : bs.segments) {
    if (s.unit == 0) {
      ++unit0;
      CHECK(s.u0 == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(s.u1 == doctest::Approx(0.5).epsilon(1e-12));
    } else {
      ++unit1;
    }
  }
  CHECK(unit0 == 10);  // one segment per cell row
  CHECK(unit1 == 0);   // all-positive unit emits nothing
}

TEST_CASE("subdivision_boundaries: layer-2 contour bends sit on layer-1 lines") {
  // layer 1: kinks at x=0.5 and y=0.5; layer 2 unit: relu(x-.5) - relu(y-.5)
  Network net = make_mlp(2, {2, 1}, 1, relu());
  auto& l1 = std::get<DenseLayer>(net.layers[0]);
  l1.weights = {1, 0, 0, 1};
  l1.bias = {-0.5, -0.5};
  auto& l2 = std::get<DenseLayer>(net.layers[1]);
  l2.weights = {1, -1};
  l2.bias = {0};
  const SliceGrid g = unit_grid(21);
  const BoundarySet b1 = subdivision_boundaries(net, g, 0);
  const BoundarySet b2 = subdivision_boundaries(net, g, 1);
  REQUIRE(!b2.segments.empty());

  std::set<std::pair<long, long>> l1_cells;
  for (const Segment& s : b1.segments) l1_cells.insert(segment_cell(g, s));

  // find bends: endpoints shared by two segments with different directions
  const auto& segs = b2.segments;
  size_t bends = 0;
  for (size_t i = 0; i < segs.size(); ++i)
    for (size_t j = i + 1; j < segs.size(); ++j) {
      const Segment &a = segs[i], &b = segs[j];
      const double pairs[4][4] = {{a.u0, a.v0, b.u0, b.v0},
                                  {a.u0, a.v0, b.u1, b.v1},
                                  {a.u1, a.v1, b.u0, b.v0},
                                  {a.u1, a.v1, b.u1, b.v1}};
      bool shared = false;
      double su = 0, sv = 0;
      for (const auto& p : pairs)
        if (std::abs(p[0] - p[2]) < 1e-9 && std::abs(p[1] - p[3]) < 1e-9) {
          shared = true;
          su = p[0];
          sv = p[1];
        }
      if (!shared) continue;
      const double da[2] = {a.u1 - a.u0, a.v1 - a.v0};
      const double db[2] = {b.u1 - b.u0, b.v1 - b.v0};
      const double cross = da[0] * db[1] - da[1] * db[0];
      const double norm = std::hypot(da[0], da[1]) * std::hypot(db[0], db[1]);
      if (norm == 0.0 || std::abs(cross) < 1e-6 * norm) continue;  // collinear, not a bend
      ++bends;
      // the bend must lie within one cell of a layer-1 crossing cell
      const double du = g.u_at(1) - g.u_at(0), dv = g.v_at(1) - g.v_at(0);
      const long cu = static_cast<long>(std::floor((su - g.extent.umin) / du));
      const long cv = static_cast<long>(std::floor((sv - g.extent.vmin) / dv));
      bool close = false;
      for (long ou = -1; ou <= 1 && !close; ++ou)
        for (long ov = -1; ov <= 1 && !close; ++ov)
          close = l1_cells.count({cu + ou, cv + ov}) > 0;
      CHECK(close);
    }
  CHECK(bends > 0);
}

TEST_CASE("decision_boundary: logit difference contour") {
  // head only: g0 = x, g1 = 0.5 -> boundary at u = 0.5
  Network net = make_mlp(2, {}, 2, relu());
  auto& head = std::get<DenseLayer>(net.layers[0]);
  head.weights = {1, 0, 0, 0};
  head.bias = {0, 0.5};
  head.act = identity();
  const SliceGrid g = unit_grid(11);
  const BoundarySet bs = decision_boundary(net, g, 0, 1);
  REQUIRE(!bs.segments.empty());
  for (const Segment& s : bs.segments) {
    CHECK(s.u0 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.u1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.layer == 0);
  }
}

TEST_CASE("decision_boundary: single-output head is rejected") {
  Network net = make_mlp(2, {4}, 1, relu());
  init_kaiming(net, 1);
  const SliceGrid g = unit_grid(5);
  CHECK_THROWS_AS(decision_boundary(net, g, 0, 1), ArgumentError);
  CHECK_THROWS_AS(decision_boundary_argmax(net, g), ArgumentError);
  Network net2 = make_mlp(2, {4}, 3, relu());
  init_kaiming(net2, 1);
  CHECK_THROWS_AS(decision_boundary(net2, g, 0, 3), ArgumentError);
  CHECK_THROWS_AS(decision_boundary(net2, g, 1, 1), ArgumentError);
}

TEST_CASE("decision_boundary: trained X-shape boundary crosses the border 4 times") {
  Dataset ds = make_xshape(1000, 0.08, 31);
  Network net = make_mlp(2, {20, 20}, 2, relu());
  init_kaiming(net, 31);
  TrainConfig cfg;
  cfg.epochs = 160;
  cfg.seed = 31;
  cfg.lr_schedule = TrainConfig::step_decay(cfg.epochs);
  const auto metrics = train(net, ds, cfg);
  REQUIRE(metrics.back().train_acc > 0.9);

  const std::vector<double> o = {0, 0}, e1 = {1, 0}, e2 = {0, 1};
  const SliceGrid g = make_slice(o, e1, e2, {-1.0, 1.0, -1.0, 1.0}, 101);
  // walk the border, count argmax transitions; an X-shaped boundary enters
  // and leaves the box four times
  FwdScratch s;
  std::vector<double> p;
  std::vector<int> border_argmax;
  auto push = [&](size_t i, size_t j) {
    g.point(i, j, p);
    forward_sample(net, p, s);
    border_argmax.push_back(s.out.back()[0] > s.out.back()[1] ? 0 : 1);
  };
  const size_t n = g.n;
  for (size_t i = 0; i < n; ++i) push(i, 0);
  for (size_t j = 1; j < n; ++j) push(n - 1, j);
  for (size_t i = n - 1; i-- > 0;) push(i, n - 1);
  for (size_t j = n - 1; j-- > 0;) push(0, j);
  size_t transitions = 0;
  for (size_t i = 0; i < border_argmax.size(); ++i)
    if (border_argmax[i] != border_argmax[(i + 1) % border_argmax.size()]) ++transitions;
  CHECK(transitions == 4);
}

TEST_CASE("region_count: crossing hyperplanes, zero nets, brute force") {
  SUBCASE("two crossing hyperplanes make 4 regions") {
    Network net = hidden_units_net({{1, 0}, {0, 1}}, {-0.5, -0.5});
    CHECK(region_count(net, unit_grid(21)) == 4);
  }
  SUBCASE("zero weights collapse to one region") {
    Network net = hidden_units_net({{0, 0}, {0, 0}}, {0, 0});
    CHECK(region_count(net, unit_grid(11)) == 1);
  }
  SUBCASE("matches an independent distinct-code tally") {
    Network net = random_mlp2({2, 20, 20, 2}, 77);
    const SliceGrid g = unit_grid(30, -2.0, 2.0);
    // independent implementation: string keys in an ordered set
    std::set<std::string> distinct;
    FwdScratch s;
    std::vector<double> p;
    for (size_t j = 0; j < g.n; ++j)
      for (size_t i = 0; i < g.n; ++i) {
        g.point(i, j, p);
        const ActivationCode c = code_of(net, p, s);
        std::string key;
        key.reserve(c.nbits);
        for (size_t b = 0; b < c.nbits; ++b) key.push_back(c.bit(b) ? '1' : '0');
        distinct.insert(key);
      }
    CHECK(region_count(net, g) == distinct.size());
  }
}

TEST_CASE("render_svg: empty sets give a valid document") {
  const SliceGrid g = unit_grid(5);
  const std::string svg = render_svg({}, g);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<path") == std::string::npos);
}

TEST_CASE("render_svg: one segment maps to one path with the right endpoints") {
  const SliceGrid g = unit_grid(5);
  BoundarySet bs;
  bs.kind = BoundaryKind::subdivision;
  bs.segments.push_back({0, 0, 0.0, 0.0, 1.0, 1.0});
  SvgStyle style;
  style.width = 100;
  style.height = 100;
  style.margin = 0;
  style.frame = false;
  const std::string svg = render_svg({bs}, g, style);
  CHECK(svg.find("M 0.0000 100.0000 L 100.0000 0.0000") != std::string::npos);
  CHECK(svg.find("subdiv-L0-U0") != std::string::npos);
}

TEST_CASE("invariant: contour soundness on a random net") {
  Network net = random_mlp2({2, 12, 3}, 55);
  const SliceGrid g = unit_grid(25, -1.5, 1.5);
  const BoundarySet bs = subdivision_boundaries(net, g, 0);

  // recompute the pre-activation field per unit
  const size_t units = unit_count(net.layers[0]);
  std::vector<std::vector<double>> field(units, std::vector<double>(g.n * g.n));
  FwdScratch s;
  std::vector<double> p;
  for (size_t j = 0; j < g.n; ++j)
    for (size_t i = 0; i < g.n; ++i) {
      g.point(i, j, p);
      forward_sample(net, p, s);
      for (size_t k = 0; k < units; ++k) field[k][j * g.n + i] = s.preact[0][k];
    }

  auto cell_has_sign_change = [&](size_t k, long ci, long cj) {
    const double a = field[k][cj * g.n + ci];
    const double b = field[k][cj * g.n + ci + 1];
    const double c = field[k][(cj + 1) * g.n + ci + 1];
    const double d = field[k][(cj + 1) * g.n + ci];
    const int pos = (a >= 0) + (b >= 0) + (c >= 0) + (d >= 0);
    return pos != 0 && pos != 4;
  };

  // every segment lies in a sign-change cell
  std::set<std::tuple<size_t, long, long>> covered;
  for (const Segment& seg : bs.segments) {
    const auto [ci, cj] = segment_cell(g, seg);
    CHECK(ci >= 0);
    CHECK(cj >= 0);
    CHECK(cell_has_sign_change(seg.unit, ci, cj));
    covered.insert({seg.unit, ci, cj});
  }
  // no sign-change cell is skipped
  for (size_t k = 0; k < units; ++k)
    for (long cj = 0; cj + 1 < static_cast<long>(g.n); ++cj)
      for (long ci = 0; ci + 1 < static_cast<long>(g.n); ++ci)
        if (cell_has_sign_change(k, ci, cj)) CHECK(covered.count({k, ci, cj}) == 1);
}

TEST_CASE("invariant: slice affinity (grid points vs explicit materialization)") {
  Network net = random_mlp2({4, 8, 2}, 66);
  Rng rng(66);
  std::vector<double> x0(4), x1(4), x2(4);
  for (size_t k = 0; k < 4; ++k) {
    x0[k] = rng.uniform(-1, 1);
    x1[k] = rng.uniform(-1, 1);
    x2[k] = rng.uniform(-1, 1);
  }
  const SliceGrid g = make_slice(x0, x1, x2, {-0.25, 1.25, -0.25, 1.25}, 7);
  FwdScratch s;
  std::vector<double> p;
  for (size_t j = 0; j < g.n; ++j)
    for (size_t i = 0; i < g.n; ++i) {
      g.point(i, j, p);
      const double u = g.u_at(i), v = g.v_at(j);
      std::vector<double> q(4);
      for (size_t k = 0; k < 4; ++k)
        q[k] = x0[k] + u * (x1[k] - x0[k]) + v * (x2[k] - x0[k]);
      CHECK(code_of(net, p, s) == code_of(net, q, s));
    }
}

TEST_CASE("invariant: layer-1 contours of a dense layer are straight") {
  Network net = random_mlp2({2, 10, 2}, 88);
  const SliceGrid g = unit_grid(40, -2.0, 2.0);
  const BoundarySet bs = subdivision_boundaries(net, g, 0);
  for (size_t unit = 0; unit < 10; ++unit) {
    std::vector<const Segment*> segs;
    for (const Segment& s : bs.segments)
      if (s.unit == unit) segs.push_back(&s);
    if (segs.size() < 2) continue;
    const double ax = segs[0]->u0, ay = segs[0]->v0;
    double dx = segs[0]->u1 - ax, dy = segs[0]->v1 - ay;
    const double n0 = std::hypot(dx, dy);
    dx /= n0;
    dy /= n0;
    for (const Segment* s : segs) {
      for (const auto& [pu, pv] : {std::pair{s->u0, s->v0}, std::pair{s->u1, s->v1}}) {
        const double cross = (pu - ax) * dy - (pv - ay) * dx;
        CHECK(std::abs(cross) <= 1e-9 * std::max(1.0, std::hypot(pu - ax, pv - ay)));
      }
    }
  }
}

TEST_CASE("invariant: equal-code lattice neighbours share the affine map") {
  Network net = random_mlp2({2, 10, 10, 2}, 44);
  const SliceGrid g = unit_grid(15, -1.0, 1.0);
  FwdScratch s;
  std::vector<double> pa, pb, pm;
  size_t checked = 0;
  for (size_t j = 0; j < g.n; ++j)
    for (size_t i = 0; i + 1 < g.n; ++i) {
      g.point(i, j, pa);
      g.point(i + 1, j, pb);
      const ActivationCode ca = code_of(net, pa, s);
      if (!(ca == code_of(net, pb, s))) continue;
      pm = {0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])};
      if (!(code_of(net, pm, s) == ca)) continue;
      forward_sample(net, pa, s);
      const auto fa = s.out.back();
      forward_sample(net, pb, s);
      const auto fb = s.out.back();
      forward_sample(net, pm, s);
      for (size_t k = 0; k < fa.size(); ++k) {
        const double lerp = 0.5 * (fa[k] + fb[k]);
        const double scale = std::max({1.0, std::abs(fa[k]), std::abs(fb[k])});
        CHECK(std::abs(s.out.back()[k] - lerp) <= 1e-6 * scale);
      }
      ++checked;
    }
  CHECK(checked > 50);
}

TEST_CASE("codes CSV layout") {
  Network net = hidden_units_net({{1, 0}, {0, 1}}, {0, 0});
  Dataset ds;
  ds.x_shape = {2};
  ds.xs = {1, -1};
  ds.labels = {0};
  const auto set = codes_of_batch(net, ds, 7);
  std::ostringstream os;
  codes_to_csv(set, os);
  CHECK(os.str() == "datum_id,epoch,code_hex\n0,7,1\n");
}
