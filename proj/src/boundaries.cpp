#include "splinelab/boundaries.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_set>

namespace splinelab {

namespace {

struct Pt {
  double u, v;
};

// Linear zero crossing on the edge p -> q; vp and vq have opposite signs
// under the (value >= 0) convention, so vp - vq is never zero here.
Pt lerp_zero(Pt p, double vp, Pt q, double vq) {
  const double t = vp / (vp - vq);
  return {p.u + t * (q.u - p.u), p.v + t * (q.v - p.v)};
}

void normalize(Segment& s) {
  if (s.v1 < s.v0 || (s.v1 == s.v0 && s.u1 < s.u0)) {
    std::swap(s.u0, s.u1);
    std::swap(s.v0, s.v1);
  }
}

void sort_canonical(std::vector<Segment>& segs) {
  for (Segment& s : segs) normalize(s);
  std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) {
    return std::tie(a.layer, a.unit, a.v0, a.u0, a.v1, a.u1) <
           std::tie(b.layer, b.unit, b.v0, b.u0, b.v1, b.u1);
  });
}

// Marching squares on one cell. Corners in (u,v):
//   A=(i,j) B=(i+1,j) C=(i+1,j+1) D=(i,j+1), values a,b,c,d.
void march_cell(Pt A, Pt B, Pt C, Pt D, double a, double b, double c, double d,
                size_t layer, size_t unit, std::vector<Segment>& out) {
  const int code = (a >= 0 ? 1 : 0) | (b >= 0 ? 2 : 0) | (c >= 0 ? 4 : 0) |
                   (d >= 0 ? 8 : 0);
  if (code == 0 || code == 15) return;
  auto emit = [&](Pt p, Pt q) {
    // a contour touching a single corner point is not a segment
    if (p.u == q.u && p.v == q.v) return;
    out.push_back({layer, unit, p.u, p.v, q.u, q.v});
  };
  const auto ab = [&] { return lerp_zero(A, a, B, b); };
  const auto bc = [&] { return lerp_zero(B, b, C, c); };
  const auto cd = [&] { return lerp_zero(C, c, D, d); };
  const auto da = [&] { return lerp_zero(D, d, A, a); };
  switch (code) {
    case 1: case 14: emit(ab(), da()); break;          // A isolated
    case 2: case 13: emit(ab(), bc()); break;          // B isolated
    case 4: case 11: emit(bc(), cd()); break;          // C isolated
    case 8: case 7:  emit(cd(), da()); break;          // D isolated
    case 3: case 12: emit(da(), bc()); break;          // horizontal split
    case 6: case 9:  emit(ab(), cd()); break;          // vertical split
    case 5: {  // A,C inside; saddle resolved by the cell-center sign
      const double center = 0.25 * (a + b + c + d);
      if (center >= 0) {
        emit(ab(), bc());
        emit(cd(), da());
      } else {
        emit(ab(), da());
        emit(bc(), cd());
      }
      break;
    }
    case 10: {  // B,D inside
      const double center = 0.25 * (a + b + c + d);
      if (center >= 0) {
        emit(ab(), da());
        emit(bc(), cd());
      } else {
        emit(ab(), bc());
        emit(cd(), da());
      }
      break;
    }
    default: break;
  }
}

// Evaluates a whole grid row of some per-point vector quantity, streaming two
// rows at a time so conv layers with many coordinates stay in memory bounds.
template <class RowFn>
void for_each_cell_row(const SliceGrid& grid, RowFn&& fill_row,
                       const std::function<void(size_t /*j*/, const std::vector<double>& /*row j*/,
                                                const std::vector<double>& /*row j+1*/)>& body) {
  std::vector<double> cur, next;
  fill_row(0, cur);
  for (size_t j = 0; j + 1 < grid.n; ++j) {
    fill_row(j + 1, next);
    body(j, cur, next);
    std::swap(cur, next);
  }
}

}  // namespace

BoundarySet subdivision_boundaries(const Network& net, const SliceGrid& grid,
                                   size_t layer,
                                   const std::vector<size_t>* units) {
  const auto coded = coded_layers(net);
  if (std::find(coded.begin(), coded.end(), layer) == coded.end())
    throw ArgumentError("layer " + std::to_string(layer) + " is not a coded layer");

  FwdScratch scratch;
  std::vector<double> point;
  size_t dim = 0;
  // row layout: unit-major, row[k*n + i] = preact of unit k at column i
  auto fill_row = [&](size_t j, std::vector<double>& row) {
    for (size_t i = 0; i < grid.n; ++i) {
      grid.point(i, j, point);
      forward_sample(net, point, scratch);
      const auto& pre = scratch.preact[layer];
      if (dim == 0) {
        dim = pre.size();
        row.resize(dim * grid.n);
      }
      if (row.size() != dim * grid.n) row.resize(dim * grid.n);
      for (size_t k = 0; k < dim; ++k) row[k * grid.n + i] = pre[k];
    }
  };

  std::vector<size_t> all_units;
  BoundarySet bs;
  bs.kind = BoundaryKind::subdivision;
  for_each_cell_row(
      grid, fill_row,
      [&](size_t j, const std::vector<double>& cur, const std::vector<double>& next) {
        if (all_units.empty() && !units) {
          all_units.resize(dim);
          for (size_t k = 0; k < dim; ++k) all_units[k] = k;
        }
        const std::vector<size_t>& us = units ? *units : all_units;
        const double vj = grid.v_at(j), vj1 = grid.v_at(j + 1);
        for (size_t k : us) {
          const double* c = cur.data() + k * grid.n;
          const double* nx = next.data() + k * grid.n;
          for (size_t i = 0; i + 1 < grid.n; ++i) {
            const double ui = grid.u_at(i), ui1 = grid.u_at(i + 1);
            march_cell({ui, vj}, {ui1, vj}, {ui1, vj1}, {ui, vj1}, c[i], c[i + 1],
                       nx[i + 1], nx[i], layer, k, bs.segments);
          }
        }
      });
  sort_canonical(bs.segments);
  return bs;
}

BoundarySet decision_boundary(const Network& net, const SliceGrid& grid,
                              size_t class_a, size_t class_b) {
  const size_t head = head_index(net);
  const auto shapes = layer_output_shapes(net);
  const size_t classes = Tensor::shape_size(shapes[head]);
  if (classes < 2) throw ArgumentError("decision boundary needs >= 2 outputs");
  if (class_a >= classes || class_b >= classes || class_a == class_b)
    throw ArgumentError("invalid class pair (" + std::to_string(class_a) + "," +
                        std::to_string(class_b) + ") for " + std::to_string(classes) +
                        " classes");

  FwdScratch scratch;
  std::vector<double> point;
  auto fill_row = [&](size_t j, std::vector<double>& row) {
    row.resize(grid.n);
    for (size_t i = 0; i < grid.n; ++i) {
      grid.point(i, j, point);
      forward_sample(net, point, scratch);
      const auto& out = scratch.out.back();
      row[i] = out[class_a] - out[class_b];
    }
  };

  BoundarySet bs;
  bs.kind = BoundaryKind::decision;
  for_each_cell_row(
      grid, fill_row,
      [&](size_t j, const std::vector<double>& cur, const std::vector<double>& next) {
        const double vj = grid.v_at(j), vj1 = grid.v_at(j + 1);
        for (size_t i = 0; i + 1 < grid.n; ++i) {
          const double ui = grid.u_at(i), ui1 = grid.u_at(i + 1);
          march_cell({ui, vj}, {ui1, vj}, {ui1, vj1}, {ui, vj1}, cur[i], cur[i + 1],
                     next[i + 1], next[i], head, 0, bs.segments);
        }
      });
  sort_canonical(bs.segments);
  return bs;
}

BoundarySet decision_boundary_argmax(const Network& net, const SliceGrid& grid) {
  const size_t head = head_index(net);
  const auto shapes = layer_output_shapes(net);
  const size_t classes = Tensor::shape_size(shapes[head]);
  if (classes < 2) throw ArgumentError("decision boundary needs >= 2 outputs");

  FwdScratch scratch;
  std::vector<double> point;
  auto fill_row = [&](size_t j, std::vector<double>& row) {
    row.resize(grid.n);
    for (size_t i = 0; i < grid.n; ++i) {
      grid.point(i, j, point);
      forward_sample(net, point, scratch);
      const auto& out = scratch.out.back();
      size_t arg = 0;
      for (size_t k = 1; k < out.size(); ++k)
        if (out[k] > out[arg]) arg = k;
      row[i] = static_cast<double>(arg);
    }
  };

  BoundarySet bs;
  bs.kind = BoundaryKind::decision;
  const double hu = 0.5 * (grid.u_at(1) - grid.u_at(0));
  const double hv = 0.5 * (grid.v_at(1) - grid.v_at(0));
  auto clamp_u = [&](double u) { return std::clamp(u, grid.extent.umin, grid.extent.umax); };
  auto clamp_v = [&](double v) { return std::clamp(v, grid.extent.vmin, grid.extent.vmax); };

  std::vector<double> prev_row;
  std::vector<double> row;
  for (size_t j = 0; j < grid.n; ++j) {
    fill_row(j, row);
    for (size_t i = 0; i + 1 < grid.n; ++i) {
      if (row[i] != row[i + 1]) {
        const double um = 0.5 * (grid.u_at(i) + grid.u_at(i + 1));
        bs.segments.push_back({head, 0, um, clamp_v(grid.v_at(j) - hv), um,
                               clamp_v(grid.v_at(j) + hv)});
      }
    }
    if (j > 0) {
      for (size_t i = 0; i < grid.n; ++i) {
        if (prev_row[i] != row[i]) {
          const double vm = 0.5 * (grid.v_at(j - 1) + grid.v_at(j));
          bs.segments.push_back({head, 0, clamp_u(grid.u_at(i) - hu), vm,
                                 clamp_u(grid.u_at(i) + hu), vm});
        }
      }
    }
    std::swap(prev_row, row);
  }
  sort_canonical(bs.segments);
  return bs;
}

size_t region_count(const Network& net, const SliceGrid& grid) {
  struct Hash {
    size_t operator()(const ActivationCode& c) const { return c.hash(); }
  };
  std::unordered_set<ActivationCode, Hash> distinct;
  FwdScratch scratch;
  std::vector<double> point;
  for (size_t j = 0; j < grid.n; ++j)
    for (size_t i = 0; i < grid.n; ++i) {
      grid.point(i, j, point);
      distinct.insert(code_of(net, point, scratch));
    }
  return distinct.size();
}

std::vector<ActivationCode> layer_codes(const Network& net, const SliceGrid& grid,
                                        size_t layer) {
  const auto coded = coded_layers(net);
  if (std::find(coded.begin(), coded.end(), layer) == coded.end())
    throw ArgumentError("layer " + std::to_string(layer) + " is not a coded layer");
  std::vector<ActivationCode> out;
  out.reserve(grid.n * grid.n);
  FwdScratch scratch;
  std::vector<double> point;
  for (size_t j = 0; j < grid.n; ++j)
    for (size_t i = 0; i < grid.n; ++i) {
      grid.point(i, j, point);
      forward_sample(net, point, scratch);
      const auto& pre = scratch.preact[layer];
      ActivationCode c;
      c.resize(pre.size());
      c.layer_offsets = {0};
      for (size_t k = 0; k < pre.size(); ++k) c.set_bit(k, pre[k] >= 0.0);
      out.push_back(std::move(c));
    }
  return out;
}

void boundaries_to_csv(const std::vector<BoundarySet>& sets, std::ostream& os) {
  os << "kind,layer,unit,u0,v0,u1,v1\n";
  for (const auto& bs : sets) {
    const char* kind = bs.kind == BoundaryKind::subdivision ? "subdivision" : "decision";
    for (const auto& s : bs.segments)
      os << kind << "," << s.layer << "," << s.unit << "," << s.u0 << "," << s.v0
         << "," << s.u1 << "," << s.v1 << "\n";
  }
}

}  // namespace splinelab
