#include "splinelab/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "splinelab/boundaries.hpp"
#include "splinelab/rng.hpp"

namespace splinelab {

namespace {

double row_l2(const Network& net, size_t layer, size_t unit) {
  double s = 0.0;
  for (double x : unit_row(net, layer, unit)) s += x * x;
  return std::sqrt(s);
}

double row_l1(const Network& net, size_t layer, size_t unit) {
  double s = 0.0;
  for (double x : unit_row(net, layer, unit)) s += std::abs(x);
  return s;
}

void check_prunable(const Network& net, size_t layer) {
  const auto p = prunable_layers(net);
  if (std::find(p.begin(), p.end(), layer) == p.end())
    throw ArgumentError("layer " + std::to_string(layer) + " is not prunable");
}

size_t next_linear(const Network& net, size_t layer) {
  for (size_t i = layer + 1; i < net.layers.size(); ++i)
    if (is_linear(net.layers[i])) return i;
  throw ArgumentError("layer " + std::to_string(layer) + " has no downstream affine layer");
}

// ceil((1 - ratio) * units), clamped to keep at least one unit.
size_t keep_target(size_t units, double ratio, bool* clamped) {
  const double raw = std::ceil((1.0 - ratio) * static_cast<double>(units));
  size_t t = raw <= 0.0 ? 0 : static_cast<size_t>(raw);
  if (t == 0) {
    t = 1;
    if (clamped) *clamped = true;
  }
  return std::min(t, units);
}

double pair_cos_abs(const std::vector<double>& a, const std::vector<double>& b,
                    bool* degenerate) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  if (degenerate) *degenerate = false;
  // rounding can push |cos| a hair past 1; clamp so the angle term stays >= 0
  return std::min(1.0, std::abs(dot) / (std::sqrt(na) * std::sqrt(nb)));
}

}  // namespace

RedundancyScore redundancy(const Network& net, size_t layer, size_t k, size_t k2,
                           double rho) {
  check_prunable(net, layer);
  if (k == k2) throw ArgumentError("redundancy needs two distinct units");
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  const size_t units = unit_count(net.layers[layer]);
  if (k >= units || k2 >= units)
    throw ArgumentError("unit index out of range for layer " + std::to_string(layer));
  const auto ra = unit_row(net, layer, k);
  const auto rb = unit_row(net, layer, k2);
  bool degenerate = false;
  const double cosv = pair_cos_abs(ra, rb, &degenerate);
  if (degenerate)
    throw DegenerateUnitError("zero-norm unit row in layer " + std::to_string(layer));
  RedundancyScore s;
  s.layer = layer;
  s.k = k;
  s.k2 = k2;
  s.rho = rho;
  s.angle_term = 1.0 - cosv;
  s.bias_term = std::abs(unit_bias(net, layer, k) - unit_bias(net, layer, k2));
  s.total = s.angle_term + rho * s.bias_term;
  return s;
}

std::tuple<size_t, size_t, double> most_redundant_pair(const Network& net,
                                                       size_t layer, double rho) {
  check_prunable(net, layer);
  const size_t units = unit_count(net.layers[layer]);
  if (units < 2)
    throw ArgumentError("layer " + std::to_string(layer) + " has fewer than 2 units");
  size_t bk = 0, bk2 = 1;
  double best = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k + 1 < units; ++k)
    for (size_t k2 = k + 1; k2 < units; ++k2) {
      const double t = redundancy(net, layer, k, k2, rho).total;
      if (t < best) {  // strict: ties keep the lexicographically smallest pair
        best = t;
        bk = k;
        bk2 = k2;
      }
    }
  return {bk, bk2, best};
}

// ---------------------------------------------------------------------------
// Surgery

void remove_unit(Network& net, size_t layer, size_t unit,
                 std::optional<size_t> survivor, Compensation comp) {
  check_prunable(net, layer);
  const size_t units = unit_count(net.layers[layer]);
  if (unit >= units) throw ArgumentError("victim unit out of range");
  if (units < 2) throw ArgumentError("cannot remove the last unit of a layer");
  if (survivor && (*survivor >= units || *survivor == unit))
    throw ArgumentError("invalid survivor unit");

  const auto shapes = layer_output_shapes(net);
  const size_t m = next_linear(net, layer);
  const bool from_conv = std::holds_alternative<ConvLayer>(net.layers[layer]);

  // --- downstream layer: absorb (optionally) and drop the victim's inputs
  if (auto* dm = std::get_if<DenseLayer>(&net.layers[m])) {
    // Block of columns fed by one upstream unit: H*W after a conv (pools in
    // between shrink H and W but keep the channel-major flatten order), 1
    // after a dense layer.
    const auto& in_shape = shapes[m - 1];
    const size_t block = from_conv ? in_shape[1] * in_shape[2] : 1;
    if (Tensor::shape_size(in_shape) != dm->in_dim)
      throw DimensionError("flatten mismatch entering layer " + std::to_string(m));
    if (comp == Compensation::merge_outgoing && survivor) {
      const bool masked = !dm->mask.empty();
      for (size_t o = 0; o < dm->out_dim; ++o)
        for (size_t b = 0; b < block; ++b) {
          const size_t cs = o * dm->in_dim + *survivor * block + b;
          const size_t cv = o * dm->in_dim + unit * block + b;
          const double eff_s = masked ? dm->weights[cs] * dm->mask[cs] : dm->weights[cs];
          const double eff_v = masked ? dm->weights[cv] * dm->mask[cv] : dm->weights[cv];
          dm->weights[cs] = eff_s + eff_v;
          if (masked) dm->mask[cs] = 1;
        }
    }
    const size_t new_in = dm->in_dim - block;
    std::vector<double> w;
    w.reserve(dm->out_dim * new_in);
    std::vector<uint8_t> mk;
    if (!dm->mask.empty()) mk.reserve(dm->out_dim * new_in);
    for (size_t o = 0; o < dm->out_dim; ++o)
      for (size_t i = 0; i < dm->in_dim; ++i) {
        if (i >= unit * block && i < (unit + 1) * block) continue;
        w.push_back(dm->weights[o * dm->in_dim + i]);
        if (!dm->mask.empty()) mk.push_back(dm->mask[o * dm->in_dim + i]);
      }
    dm->weights = std::move(w);
    dm->mask = std::move(mk);
    dm->in_dim = new_in;
  } else if (auto* cm = std::get_if<ConvLayer>(&net.layers[m])) {
    if (!from_conv)
      throw ArgumentError("dense layer feeding a conv layer is not supported");
    if (comp == Compensation::merge_outgoing && survivor) {
      const bool masked = !cm->mask.empty();
      for (size_t oc = 0; oc < cm->out_ch; ++oc)
        for (size_t t = 0; t < cm->kh * cm->kw; ++t) {
          const size_t cs = (oc * cm->in_ch + *survivor) * cm->kh * cm->kw + t;
          const size_t cv = (oc * cm->in_ch + unit) * cm->kh * cm->kw + t;
          const double eff_s = masked ? cm->kernels[cs] * cm->mask[cs] : cm->kernels[cs];
          const double eff_v = masked ? cm->kernels[cv] * cm->mask[cv] : cm->kernels[cv];
          cm->kernels[cs] = eff_s + eff_v;
          if (masked) cm->mask[cs] = 1;
        }
    }
    const size_t kk = cm->kh * cm->kw;
    std::vector<double> kn;
    kn.reserve(cm->out_ch * (cm->in_ch - 1) * kk);
    std::vector<uint8_t> mk;
    if (!cm->mask.empty()) mk.reserve(kn.capacity());
    for (size_t oc = 0; oc < cm->out_ch; ++oc)
      for (size_t ic = 0; ic < cm->in_ch; ++ic) {
        if (ic == unit) continue;
        const size_t base = (oc * cm->in_ch + ic) * kk;
        for (size_t t = 0; t < kk; ++t) {
          kn.push_back(cm->kernels[base + t]);
          if (!cm->mask.empty()) mk.push_back(cm->mask[base + t]);
        }
      }
    cm->kernels = std::move(kn);
    cm->mask = std::move(mk);
    cm->in_ch -= 1;
  }

  // --- the pruned layer itself: drop the victim's row / channel
  if (auto* dl = std::get_if<DenseLayer>(&net.layers[layer])) {
    dl->weights.erase(dl->weights.begin() + static_cast<long>(unit * dl->in_dim),
                      dl->weights.begin() + static_cast<long>((unit + 1) * dl->in_dim));
    if (!dl->mask.empty())
      dl->mask.erase(dl->mask.begin() + static_cast<long>(unit * dl->in_dim),
                     dl->mask.begin() + static_cast<long>((unit + 1) * dl->in_dim));
    dl->bias.erase(dl->bias.begin() + static_cast<long>(unit));
    dl->out_dim -= 1;
  } else if (auto* cl = std::get_if<ConvLayer>(&net.layers[layer])) {
    const size_t slab = cl->in_ch * cl->kh * cl->kw;
    cl->kernels.erase(cl->kernels.begin() + static_cast<long>(unit * slab),
                      cl->kernels.begin() + static_cast<long>((unit + 1) * slab));
    if (!cl->mask.empty())
      cl->mask.erase(cl->mask.begin() + static_cast<long>(unit * slab),
                     cl->mask.begin() + static_cast<long>((unit + 1) * slab));
    cl->bias.erase(cl->bias.begin() + static_cast<long>(unit));
    cl->out_ch -= 1;
  }
}

// ---------------------------------------------------------------------------
// Plans

namespace {

PrunePlan fresh_plan(const Network& net, Compensation comp) {
  PrunePlan plan;
  plan.compensation = comp;
  plan.kept.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const size_t u = unit_count(net.layers[i]);
    plan.kept[i].resize(u);
    for (size_t k = 0; k < u; ++k) plan.kept[i][k] = k;
  }
  return plan;
}

// current index -> original index bookkeeping lives in plan.kept
void log_removal(PrunePlan& plan, size_t layer, size_t victim_cur,
                 std::optional<size_t> survivor_cur, double score,
                 std::optional<size_t> survivor_layer = std::nullopt) {
  Removal r;
  r.layer = layer;
  r.removed = plan.kept[layer][victim_cur];
  if (survivor_cur) {
    const size_t sl = survivor_layer.value_or(layer);
    r.survivor = plan.kept[sl][*survivor_cur];
    if (sl != layer) r.survivor_layer = sl;
  }
  r.score = score;
  plan.log.push_back(r);
  plan.kept[layer].erase(plan.kept[layer].begin() + static_cast<long>(victim_cur));
}

// Drops zero-norm rows first (lowest index first) until the target is met or
// none remain. Such rows contribute nothing to the partition.
void prune_degenerate_rows(Network& net, size_t layer, size_t target,
                           PrunePlan& plan, Compensation comp) {
  bool removed = true;
  while (removed && unit_count(net.layers[layer]) > std::max<size_t>(target, 1)) {
    removed = false;
    const size_t units = unit_count(net.layers[layer]);
    for (size_t k = 0; k < units; ++k) {
      if (row_l2(net, layer, k) == 0.0) {
        remove_unit(net, layer, k, std::nullopt, comp);
        log_removal(plan, layer, k, std::nullopt, 0.0);
        removed = true;
        break;
      }
    }
  }
}

// Victim choice inside a pair: the smaller-L2-row unit goes; equal norms drop
// the higher index so the earlier unit survives.
std::pair<size_t, size_t> victim_and_survivor(const Network& net, size_t layer,
                                              size_t k, size_t k2) {
  const double na = row_l2(net, layer, k), nb = row_l2(net, layer, k2);
  if (na < nb) return {k, k2};
  if (nb < na) return {k2, k};
  return {std::max(k, k2), std::min(k, k2)};
}

}  // namespace

PrunePlan layerwise_spline_prune(Network& net, double ratio, double rho,
                                 Compensation comp) {
  if (ratio < 0.0 || ratio >= 1.0) throw ArgumentError("ratio must be in [0,1)");
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  PrunePlan plan = fresh_plan(net, comp);
  for (size_t layer : prunable_layers(net)) {
    const size_t units = unit_count(net.layers[layer]);
    const size_t target = keep_target(units, ratio, &plan.clamp_warning);
    prune_degenerate_rows(net, layer, target, plan, comp);
    while (unit_count(net.layers[layer]) > target) {
      const auto [k, k2, score] = most_redundant_pair(net, layer, rho);
      const auto [victim, survivor] = victim_and_survivor(net, layer, k, k2);
      remove_unit(net, layer, victim, survivor, comp);
      // log_removal maps through the pre-removal kept list, so current
      // indices are passed unshifted
      log_removal(plan, layer, victim, survivor, score);
    }
  }
  return plan;
}

namespace {

struct GlobalUnit {
  size_t layer_pos;  // index into prunable layer list
  size_t layer;
  size_t unit;       // current index
};

}  // namespace

PrunePlan global_spline_prune(Network& net, double ratio, double rho, size_t d) {
  if (ratio < 0.0 || ratio >= 1.0) throw ArgumentError("ratio must be in [0,1)");
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  const auto layers = prunable_layers(net);
  PrunePlan plan = fresh_plan(net, Compensation::none);

  size_t total = 0;
  for (size_t li : layers) total += unit_count(net.layers[li]);
  const size_t target = keep_target(total, ratio, &plan.clamp_warning);

  auto find_degenerate = [&]() -> std::optional<std::pair<size_t, size_t>> {
    for (size_t li : layers) {
      if (unit_count(net.layers[li]) <= 1) continue;
      for (size_t k = 0; k < unit_count(net.layers[li]); ++k)
        if (row_l2(net, li, k) == 0.0) return std::make_pair(li, k);
    }
    return std::nullopt;
  };

  while (true) {
    size_t live_total = 0;
    for (size_t li : layers) live_total += unit_count(net.layers[li]);
    if (live_total <= target) break;

    // degenerate rows go first, lowest (layer, index) first
    if (const auto deg = find_degenerate()) {
      remove_unit(net, deg->first, deg->second, std::nullopt, Compensation::none);
      log_removal(plan, deg->first, deg->second, std::nullopt, 0.0);
      continue;
    }

    // Re-fit the projection after every removal: greedy sequential scores.
    const PCAProjection proj = fit_pca_projection(net, d);
    std::vector<GlobalUnit> all;
    std::vector<std::vector<double>> rows;
    std::vector<double> biases;
    for (size_t lp = 0; lp < layers.size(); ++lp) {
      const size_t li = layers[lp];
      for (size_t u = 0; u < unit_count(net.layers[li]); ++u) {
        all.push_back({lp, li, u});
        rows.push_back(proj.project(lp, unit_row(net, li, u)));
        biases.push_back(unit_bias(net, li, u));
      }
    }

    double best = std::numeric_limits<double>::infinity();
    size_t ba = SIZE_MAX, bb = SIZE_MAX;
    for (size_t a = 0; a + 1 < all.size(); ++a)
      for (size_t b = a + 1; b < all.size(); ++b) {
        // both members' layers must allow a removal
        const bool a_fixed = unit_count(net.layers[all[a].layer]) <= 1;
        const bool b_fixed = unit_count(net.layers[all[b].layer]) <= 1;
        if (a_fixed && b_fixed) continue;
        bool degenerate = false;
        const double cosv = pair_cos_abs(rows[a], rows[b], &degenerate);
        if (degenerate) continue;  // projected away; cannot measure an angle
        const double score = (1.0 - cosv) + rho * std::abs(biases[a] - biases[b]);
        if (score < best) {
          best = score;
          ba = a;
          bb = b;
        }
      }
    if (ba == SIZE_MAX) break;  // nothing measurable left

    const GlobalUnit& ua = all[ba];
    const GlobalUnit& ub = all[bb];
    const double na = row_l2(net, ua.layer, ua.unit);
    const double nb = row_l2(net, ub.layer, ub.unit);
    // same intra-pair rule as layerwise; a member whose layer is at one unit
    // cannot be the victim
    const GlobalUnit* victim = &ua;
    const GlobalUnit* survivor = &ub;
    if (na > nb || (na == nb && std::tie(ua.layer, ua.unit) < std::tie(ub.layer, ub.unit))) {
      victim = &ub;
      survivor = &ua;
    }
    if (unit_count(net.layers[victim->layer]) <= 1) std::swap(victim, survivor);

    remove_unit(net, victim->layer, victim->unit, std::nullopt, Compensation::none);
    log_removal(plan, victim->layer, victim->unit, survivor->unit, best,
                survivor->layer);
  }
  return plan;
}

PrunePlan magnitude_prune(Network& net, double ratio, PruneScope scope) {
  if (ratio < 0.0 || ratio >= 1.0) throw ArgumentError("ratio must be in [0,1)");
  PrunePlan plan = fresh_plan(net, Compensation::none);
  const auto layers = prunable_layers(net);
  if (scope == PruneScope::layer) {
    for (size_t layer : layers) {
      const size_t target =
          keep_target(unit_count(net.layers[layer]), ratio, &plan.clamp_warning);
      while (unit_count(net.layers[layer]) > target) {
        size_t victim = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < unit_count(net.layers[layer]); ++k) {
          const double n = row_l1(net, layer, k);
          if (n < best) {
            best = n;
            victim = k;
          }
        }
        remove_unit(net, layer, victim, std::nullopt, Compensation::none);
        log_removal(plan, layer, victim, std::nullopt, best);
      }
    }
  } else {
    size_t total = 0;
    for (size_t li : layers) total += unit_count(net.layers[li]);
    const size_t target = keep_target(total, ratio, &plan.clamp_warning);
    size_t live = total;
    while (live > target) {
      size_t vl = SIZE_MAX, vu = 0;
      double best = std::numeric_limits<double>::infinity();
      for (size_t li : layers) {
        if (unit_count(net.layers[li]) <= 1) continue;
        for (size_t k = 0; k < unit_count(net.layers[li]); ++k) {
          const double n = row_l1(net, li, k);
          if (n < best) {
            best = n;
            vl = li;
            vu = k;
          }
        }
      }
      if (vl == SIZE_MAX) break;
      remove_unit(net, vl, vu, std::nullopt, Compensation::none);
      log_removal(plan, vl, vu, std::nullopt, best);
      --live;
    }
  }
  return plan;
}

PrunePlan random_prune(Network& net, double ratio, PruneScope scope, uint64_t seed) {
  if (ratio < 0.0 || ratio >= 1.0) throw ArgumentError("ratio must be in [0,1)");
  PrunePlan plan = fresh_plan(net, Compensation::none);
  Rng rng(seed);
  const auto layers = prunable_layers(net);
  if (scope == PruneScope::layer) {
    for (size_t layer : layers) {
      const size_t target =
          keep_target(unit_count(net.layers[layer]), ratio, &plan.clamp_warning);
      while (unit_count(net.layers[layer]) > target) {
        const size_t victim = rng.index(unit_count(net.layers[layer]));
        remove_unit(net, layer, victim, std::nullopt, Compensation::none);
        log_removal(plan, layer, victim, std::nullopt, 0.0);
      }
    }
  } else {
    size_t total = 0;
    for (size_t li : layers) total += unit_count(net.layers[li]);
    const size_t target = keep_target(total, ratio, &plan.clamp_warning);
    size_t live = total;
    while (live > target) {
      std::vector<std::pair<size_t, size_t>> candidates;
      for (size_t li : layers)
        if (unit_count(net.layers[li]) > 1)
          for (size_t k = 0; k < unit_count(net.layers[li]); ++k)
            candidates.emplace_back(li, k);
      if (candidates.empty()) break;
      const auto [vl, vu] = candidates[rng.index(candidates.size())];
      remove_unit(net, vl, vu, std::nullopt, Compensation::none);
      log_removal(plan, vl, vu, std::nullopt, 0.0);
      --live;
    }
  }
  return plan;
}

void apply_plan(Network& net, const PrunePlan& plan) {
  // live original indices per layer, mirroring the bookkeeping that built
  // the plan
  std::vector<std::vector<size_t>> live(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    live[i].resize(unit_count(net.layers[i]));
    for (size_t k = 0; k < live[i].size(); ++k) live[i][k] = k;
  }
  for (const Removal& r : plan.log) {
    auto& l = live[r.layer];
    const auto vit = std::find(l.begin(), l.end(), r.removed);
    if (vit == l.end()) throw AlignmentError("plan does not match network");
    const size_t victim_cur = static_cast<size_t>(vit - l.begin());
    std::optional<size_t> survivor_cur;
    if (r.survivor && !r.survivor_layer) {
      const auto sit = std::find(l.begin(), l.end(), *r.survivor);
      if (sit == l.end()) throw AlignmentError("plan survivor missing");
      survivor_cur = static_cast<size_t>(sit - l.begin());
    }
    remove_unit(net, r.layer, victim_cur, survivor_cur, plan.compensation);
    l.erase(l.begin() + static_cast<long>(victim_cur));
  }
}

nlohmann::json PrunePlan::to_json() const {
  nlohmann::json j;
  j["compensation"] = compensation == Compensation::merge_outgoing ? "merge_outgoing" : "none";
  j["clamp_warning"] = clamp_warning;
  j["kept"] = kept;
  j["log"] = nlohmann::json::array();
  for (const Removal& r : log) {
    nlohmann::json e;
    e["layer"] = r.layer;
    e["removed"] = r.removed;
    e["survivor"] = r.survivor ? nlohmann::json(*r.survivor) : nlohmann::json(nullptr);
    if (r.survivor_layer) e["survivor_layer"] = *r.survivor_layer;
    e["score"] = r.score;
    j["log"].push_back(e);
  }
  return j;
}

PrunePlan PrunePlan::from_json(const nlohmann::json& j) {
  PrunePlan p;
  p.compensation = j.at("compensation").get<std::string>() == "merge_outgoing"
                       ? Compensation::merge_outgoing
                       : Compensation::none;
  p.clamp_warning = j.value("clamp_warning", false);
  p.kept = j.at("kept").get<std::vector<std::vector<size_t>>>();
  for (const auto& e : j.at("log")) {
    Removal r;
    r.layer = e.at("layer").get<size_t>();
    r.removed = e.at("removed").get<size_t>();
    if (!e.at("survivor").is_null()) r.survivor = e.at("survivor").get<size_t>();
    if (e.contains("survivor_layer")) r.survivor_layer = e.at("survivor_layer").get<size_t>();
    r.score = e.at("score").get<double>();
    p.log.push_back(r);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Lottery mask

Network lottery_mask_and_rewind(const Network& net_init, const Network& net_trained,
                                double keep_ratio) {
  if (keep_ratio < 0.0 || keep_ratio > 1.0)
    throw ArgumentError("keep_ratio must be in [0,1]");
  if (net_init.layers.size() != net_trained.layers.size() ||
      net_init.input_shape != net_trained.input_shape)
    throw AlignmentError("architectures differ");

  struct Entry {
    double mag;
    size_t layer, idx;
  };
  std::vector<Entry> entries;
  for (size_t i = 0; i < net_trained.layers.size(); ++i) {
    const Layer& lt = net_trained.layers[i];
    const Layer& li = net_init.layers[i];
    if (lt.index() != li.index()) throw AlignmentError("layer kinds differ at " + std::to_string(i));
    if (const auto* d = std::get_if<DenseLayer>(&lt)) {
      const auto* di = std::get_if<DenseLayer>(&li);
      if (di->in_dim != d->in_dim || di->out_dim != d->out_dim)
        throw AlignmentError("dense dims differ at layer " + std::to_string(i));
      for (size_t k = 0; k < d->weights.size(); ++k)
        entries.push_back({std::abs(d->weights[k]), i, k});
    } else if (const auto* c = std::get_if<ConvLayer>(&lt)) {
      const auto* ci = std::get_if<ConvLayer>(&li);
      if (ci->kernels.size() != c->kernels.size())
        throw AlignmentError("conv dims differ at layer " + std::to_string(i));
      for (size_t k = 0; k < c->kernels.size(); ++k)
        entries.push_back({std::abs(c->kernels[k]), i, k});
    }
  }
  const size_t keep = std::min(
      entries.size(),
      static_cast<size_t>(std::llround(keep_ratio * static_cast<double>(entries.size()))));
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mag != b.mag) return a.mag > b.mag;
    return std::tie(a.layer, a.idx) < std::tie(b.layer, b.idx);
  });

  Network out = net_init;
  for (Layer& l : out.layers) {
    if (auto* d = std::get_if<DenseLayer>(&l))
      d->mask.assign(d->weights.size(), 0);
    else if (auto* c = std::get_if<ConvLayer>(&l))
      c->mask.assign(c->kernels.size(), 0);
  }
  for (size_t e = 0; e < keep; ++e) {
    Layer& l = out.layers[entries[e].layer];
    if (auto* d = std::get_if<DenseLayer>(&l))
      d->mask[entries[e].idx] = 1;
    else if (auto* c = std::get_if<ConvLayer>(&l))
      c->mask[entries[e].idx] = 1;
  }
  for (Layer& l : out.layers) {
    if (auto* d = std::get_if<DenseLayer>(&l)) {
      for (size_t k = 0; k < d->mask.size(); ++k)
        if (!d->mask[k]) d->weights[k] = 0.0;
    } else if (auto* c = std::get_if<ConvLayer>(&l)) {
      for (size_t k = 0; k < c->mask.size(); ++k)
        if (!c->mask[k]) c->kernels[k] = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Proposition check

Prop1Report verify_prop1(const Network& net, size_t layer, size_t k, size_t k2,
                         const SliceGrid& grid) {
  check_prunable(net, layer);
  if (k == k2) throw ArgumentError("verify_prop1 needs two distinct units");
  const size_t units = unit_count(net.layers[layer]);
  if (k >= units || k2 >= units) throw ArgumentError("unit index out of range");

  const auto ra = unit_row(net, layer, k);
  const auto rb = unit_row(net, layer, k2);
  const double bk = unit_bias(net, layer, k), bk2 = unit_bias(net, layer, k2);

  Prop1Report rep;
  rep.applicable = ra == rb && bk == bk2;
  bool anti = bk == 0.0 && bk2 == 0.0;
  for (size_t i = 0; anti && i < ra.size(); ++i)
    if (ra[i] != -rb[i]) anti = false;
  rep.antiparallel_zero_bias = anti;

  const auto codes = layer_codes(net, grid, layer);
  rep.grid_points = codes.size();
  const size_t bits = codes.empty() ? 0 : codes[0].nbits;
  const size_t unit_bits = units == 0 ? 0 : bits / units;  // h*w for conv, 1 for dense

  struct Hash {
    size_t operator()(const ActivationCode& c) const { return c.hash(); }
  };
  std::unordered_set<ActivationCode, Hash> full, dropped;
  for (const auto& c : codes) {
    full.insert(c);
    ActivationCode d = c;
    for (size_t b = k2 * unit_bits; b < (k2 + 1) * unit_bits; ++b) d.set_bit(b, false);
    dropped.insert(std::move(d));
  }
  rep.distinct_full = full.size();
  rep.distinct_dropped = dropped.size();
  rep.diff_count = rep.distinct_full - rep.distinct_dropped;
  return rep;
}

}  // namespace splinelab
