#include "splinelab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "splinelab/boundaries.hpp"
#include "splinelab/codes.hpp"
#include "splinelab/harness_util.hpp"
#include "splinelab/kmeans.hpp"
#include "splinelab/mnist_idx.hpp"
#include "splinelab/svg.hpp"
#include "splinelab/toydata.hpp"

namespace splinelab {

using nlohmann::json;

namespace {

size_t worker_count(size_t cfg_workers, size_t jobs) {
  size_t w = cfg_workers ? cfg_workers : std::thread::hardware_concurrency();
  if (w == 0) w = 2;
  return std::min(w, jobs);
}

json train_config_to_json(const TrainConfig& c) {
  json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["seed"] = c.seed;
  j["loss"] = c.loss == LossKind::mse ? "mse" : "cross_entropy";
  j["lr_schedule"] = c.lr_schedule;
  return j;
}

std::string hash_config(const json& j) { return fnv1a_hex(j.dump()); }

// Fine-tuning config: a fraction of the base learning rate with its own
// step decay, the usual prune-then-finetune recipe.
TrainConfig finetune_config(const TrainConfig& base, size_t epochs, uint64_t seed) {
  TrainConfig ft = base;
  ft.epochs = epochs;
  ft.lr = base.lr * 0.1;
  ft.lr_schedule = TrainConfig::step_decay(epochs);
  ft.seed = seed;
  return ft;
}

void split_train_test(const Dataset& all, double test_fraction, Dataset& train,
                      Dataset& test) {
  const size_t n = all.size();
  const size_t n_test = std::max<size_t>(1, static_cast<size_t>(test_fraction * n));
  if (n_test >= n) throw ConfigError("test fraction leaves no training data");
  std::vector<size_t> tr_idx, te_idx;
  for (size_t i = 0; i + n_test < n; ++i) tr_idx.push_back(i);
  for (size_t i = n - n_test; i < n; ++i) te_idx.push_back(i);
  train = all.subset(tr_idx);
  test = all.subset(te_idx);
}

// Fixed, seed-determined probe subsample used for all code snapshots of one
// run (kept independent of the training shuffle stream).
std::vector<size_t> probe_indices(size_t n, size_t probe_size, uint64_t seed) {
  Rng rng(seed ^ 0x5eed5eed5eed5eedull);
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(std::min(probe_size, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

json RunSummary::to_json() const {
  json j;
  j["kind"] = kind;
  j["config_hash"] = config_hash;
  j["config"] = config;
  j["results"] = results;
  j["aggregates"] = aggregates;
  j["artifacts"] = artifacts;
  j["ok"] = ok;
  return j;
}

// ---------------------------------------------------------------------------
// JSON builders

Network net_from_json(const json& spec) {
  Network net;
  if (!spec.contains("input")) throw ConfigError("net spec needs \"input\"");
  net.input_shape = spec.at("input").get<std::vector<size_t>>();
  std::vector<size_t> cur = net.input_shape;
  for (const auto& lj : spec.at("layers")) {
    const std::string type = lj.at("type").get<std::string>();
    Activation act;
    act.kind = act_from_name(lj.value("act", std::string("relu")));
    act.alpha = lj.value("alpha", 0.1);
    if (type == "dense") {
      DenseLayer d;
      d.in_dim = Tensor::shape_size(cur);
      d.out_dim = lj.at("out").get<size_t>();
      if (d.out_dim == 0) throw ConfigError("dense layer with zero width");
      d.weights.assign(d.out_dim * d.in_dim, 0.0);
      d.bias.assign(d.out_dim, 0.0);
      d.act = act;
      cur = {d.out_dim};
      net.layers.emplace_back(std::move(d));
    } else if (type == "conv") {
      if (cur.size() != 3) throw ConfigError("conv layer needs (c,h,w) input");
      ConvLayer c;
      c.in_ch = cur[0];
      c.out_ch = lj.at("out_ch").get<size_t>();
      c.kh = lj.value("kh", size_t{3});
      c.kw = lj.value("kw", c.kh);
      c.stride = lj.value("stride", size_t{1});
      c.pad = lj.value("pad", size_t{0});
      if (c.out_ch == 0 || c.kh == 0 || c.kw == 0 || c.stride == 0)
        throw ConfigError("bad conv geometry");
      c.kernels.assign(c.out_ch * c.in_ch * c.kh * c.kw, 0.0);
      c.bias.assign(c.out_ch, 0.0);
      c.act = act;
      const size_t oh = (cur[1] + 2 * c.pad - c.kh) / c.stride + 1;
      const size_t ow = (cur[2] + 2 * c.pad - c.kw) / c.stride + 1;
      cur = {c.out_ch, oh, ow};
      net.layers.emplace_back(std::move(c));
    } else if (type == "pool") {
      if (cur.size() != 3) throw ConfigError("pool layer needs (c,h,w) input");
      cur = {cur[0], cur[1] / 2, cur[2] / 2};
      net.layers.emplace_back(PoolLayer{});
    } else {
      throw ConfigError("unknown layer type: " + type);
    }
  }
  layer_output_shapes(net);  // validate
  // The final affine layer is the head; default it to identity unless the
  // spec said otherwise.
  const size_t head = head_index(net);
  if (!spec.at("layers").back().contains("act") && head + 1 == net.layers.size()) {
    if (auto* d = std::get_if<DenseLayer>(&net.layers[head])) d->act = identity();
    if (auto* c = std::get_if<ConvLayer>(&net.layers[head])) c->act = identity();
  }
  return net;
}

Dataset dataset_from_json(const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "xshape") {
    return make_xshape(spec.value("n_per_class", size_t{1000}),
                       spec.value("sigma", 0.08), spec.value("seed", uint64_t{0}));
  }
  if (kind == "sawtooth") {
    return make_sawtooth_data(spec.value("n", size_t{256}),
                              spec.value("peaks", size_t{2}));
  }
  if (kind == "idx") {
    const ImageDataset im = load_mnist_idx(spec.at("images").get<std::string>(),
                                           spec.at("labels").get<std::string>());
    return to_dataset(im, spec.value("limit", size_t{0}));
  }
  if (kind == "synth_digits") {
    const size_t n = spec.value("n", size_t{3000});
    const uint64_t seed = spec.value("seed", uint64_t{0});
    const auto dir = std::filesystem::temp_directory_path() / "splinelab_synth";
    std::filesystem::create_directories(dir);
    std::ostringstream base;
    base << "digits_n" << n << "_s" << seed;
    const std::string imgs = (dir / (base.str() + "-images-idx3-ubyte")).string();
    const std::string labs = (dir / (base.str() + "-labels-idx1-ubyte")).string();
    if (!std::filesystem::exists(imgs) || !std::filesystem::exists(labs))
      write_synth_digit_idx(imgs, labs, n, seed);
    return to_dataset(load_mnist_idx(imgs, labs), 0);
  }
  throw ConfigError("unknown dataset kind: " + kind);
}

TrainConfig train_config_from_json(const json& j, size_t default_epochs) {
  TrainConfig c;
  c.epochs = j.value("epochs", default_epochs);
  c.batch_size = j.value("batch_size", size_t{64});
  c.lr = j.value("lr", 0.1);
  c.momentum = j.value("momentum", 0.9);
  c.weight_decay = j.value("weight_decay", 1e-4);
  c.seed = j.value("seed", uint64_t{0});
  const std::string loss = j.value("loss", std::string("cross_entropy"));
  if (loss == "mse")
    c.loss = LossKind::mse;
  else if (loss == "cross_entropy")
    c.loss = LossKind::cross_entropy;
  else
    throw ConfigError("unknown loss: " + loss);
  if (j.contains("lr_schedule") && !j.at("lr_schedule").is_string())
    c.lr_schedule = j.at("lr_schedule").get<std::vector<std::pair<size_t, double>>>();
  else
    c.lr_schedule = TrainConfig::step_decay(c.epochs);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Sawtooth

SawtoothConfig SawtoothConfig::from_json(const json& j) {
  SawtoothConfig c;
  c.peaks = j.value("peaks", size_t{2});
  if (j.contains("widths")) c.widths = j.at("widths").get<std::vector<size_t>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.n_train = j.value("n_train", size_t{256});
  json tj = j.value("train", json::object());
  if (!tj.contains("loss")) tj["loss"] = "mse";
  if (!tj.contains("weight_decay")) tj["weight_decay"] = 0.0;
  if (!tj.contains("lr")) tj["lr"] = 0.02;
  if (!tj.contains("batch_size")) tj["batch_size"] = 32;
  c.train = train_config_from_json(tj, 1500);
  c.out_dir = j.value("out_dir", std::string("out/sawtooth"));
  c.workers = j.value("workers", size_t{0});
  return c;
}

json SawtoothConfig::to_json() const {
  json j;
  j["peaks"] = peaks;
  j["widths"] = widths;
  j["seeds"] = seeds;
  j["n_train"] = n_train;
  j["train"] = train_config_to_json(train);
  j["out_dir"] = out_dir;
  return j;
}

RunSummary sawtooth_experiment(const SawtoothConfig& cfg) {
  if (cfg.peaks < 1) throw ConfigError("peaks must be >= 1");
  if (cfg.widths.empty() || cfg.seeds.empty()) throw ConfigError("empty widths or seeds");
  for (size_t w : cfg.widths)
    if (w == 0) throw ConfigError("layer width 0 is invalid");

  RunSummary sum;
  sum.kind = "sawtooth";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);
  ensure_dir(cfg.out_dir);

  // (a) explicit 2P-unit construction against the target on a fine grid
  const Network exact = sawtooth_network(cfg.peaks);
  const Dataset fine = make_sawtooth_data(1000, cfg.peaks);
  const double exact_mse = evaluate(exact, fine, LossKind::mse).loss;
  sum.aggregates["explicit_construction_mse"] = exact_mse;

  // (b) trained widths
  const Dataset data = make_sawtooth_data(cfg.n_train, cfg.peaks);
  struct Cell {
    double mse = 0.0;
    bool diverged = false;
  };
  std::vector<Cell> cells(cfg.widths.size() * cfg.seeds.size());
  const size_t jobs = cells.size();
  parallel_for(jobs, worker_count(cfg.workers, jobs), [&](size_t job) {
    const size_t wi = job / cfg.seeds.size();
    const size_t si = job % cfg.seeds.size();
    Network net = make_mlp(1, {cfg.widths[wi]}, 1, relu());
    init_kaiming(net, cfg.seeds[si]);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seeds[si];
    try {
      train(net, data, tc);
      cells[job].mse = evaluate(net, data, LossKind::mse).loss;
    } catch (const DivergenceError&) {
      cells[job].diverged = true;
      cells[job].mse = std::numeric_limits<double>::infinity();
    }
  });

  std::ostringstream csv;
  csv << "width,seed,final_mse,diverged\n";
  json rows = json::array();
  json medians = json::object();
  for (size_t wi = 0; wi < cfg.widths.size(); ++wi) {
    std::vector<double> mses;
    for (size_t si = 0; si < cfg.seeds.size(); ++si) {
      const Cell& c = cells[wi * cfg.seeds.size() + si];
      csv << cfg.widths[wi] << "," << cfg.seeds[si] << "," << c.mse << ","
          << (c.diverged ? 1 : 0) << "\n";
      rows.push_back({{"width", cfg.widths[wi]},
                      {"seed", cfg.seeds[si]},
                      {"final_mse", c.mse},
                      {"diverged", c.diverged}});
      mses.push_back(c.mse);
    }
    medians[std::to_string(cfg.widths[wi])] = median(mses);
  }
  sum.results = rows;
  sum.aggregates["median_mse_by_width"] = medians;

  const std::string csv_path = cfg.out_dir + "/sawtooth.csv";
  write_file(csv_path, csv.str());
  sum.artifacts.push_back(csv_path);

  ChartSeries series;
  series.label = "median final mse";
  for (size_t wi = 0; wi < cfg.widths.size(); ++wi) {
    series.x.push_back(static_cast<double>(cfg.widths[wi]));
    series.y.push_back(medians[std::to_string(cfg.widths[wi])].get<double>());
  }
  const std::string svg_path = cfg.out_dir + "/error_vs_width.svg";
  write_file(svg_path, render_line_chart({series}, "layer width", "final train mse"));
  sum.artifacts.push_back(svg_path);

  const std::string sum_path = cfg.out_dir + "/summary.json";
  write_file(sum_path, sum.to_json().dump(2) + "\n");
  sum.artifacts.push_back(sum_path);
  return sum;
}

// ---------------------------------------------------------------------------
// X-shape

XShapeConfig XShapeConfig::from_json(const json& j) {
  XShapeConfig c;
  c.n_per_class = j.value("n_per_class", size_t{1000});
  c.sigma = j.value("sigma", 0.08);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<size_t>>();
  c.train = train_config_from_json(j.value("train", json::object()), 100);
  if (j.contains("ratios")) c.ratios = j.at("ratios").get<std::vector<double>>();
  c.rho = j.value("rho", 0.05);
  c.finetune_epochs = j.value("finetune_epochs", size_t{30});
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.out_dir = j.value("out_dir", std::string("out/xshape"));
  c.render = j.value("render", true);
  c.workers = j.value("workers", size_t{0});
  return c;
}

json XShapeConfig::to_json() const {
  json j;
  j["n_per_class"] = n_per_class;
  j["sigma"] = sigma;
  j["hidden"] = hidden;
  j["train"] = train_config_to_json(train);
  j["ratios"] = ratios;
  j["rho"] = rho;
  j["finetune_epochs"] = finetune_epochs;
  j["seeds"] = seeds;
  j["out_dir"] = out_dir;
  j["render"] = render;
  return j;
}

namespace {

// Renders the 2-D partition of an X-shape net: layer subdivisions, the
// decision boundary, and the training points.
std::string render_xshape_partition(const Network& net, const Dataset& data) {
  const std::vector<double> o = {0.0, 0.0}, e1 = {1.0, 0.0}, e2 = {0.0, 1.0};
  SliceExtent ext{-1.3, 1.3, -1.3, 1.3};
  const SliceGrid grid = make_slice(o, e1, e2, ext, 100);
  std::vector<BoundarySet> sets;
  for (size_t li : coded_layers(net))
    sets.push_back(subdivision_boundaries(net, grid, li));
  sets.push_back(decision_boundary(net, grid, 0, 1));
  std::vector<SvgMarker> markers;
  for (size_t i = 0; i < data.size(); ++i)
    markers.push_back({data.x(i)[0], data.x(i)[1], data.labels[i]});
  return render_svg(sets, grid, {}, markers);
}

struct XShapeSeedResult {
  double base_acc = 0.0;
  std::vector<double> pruned_acc;
  std::vector<double> finetuned_acc;
  Network trained;  // kept for rendering on the first seed
  Dataset train_ds;
};

XShapeSeedResult run_xshape_seed(const XShapeConfig& cfg, uint64_t seed) {
  XShapeSeedResult r;
  r.train_ds = make_xshape(cfg.n_per_class, cfg.sigma, seed);
  const Dataset test_ds = make_xshape(cfg.n_per_class, cfg.sigma, seed + 99991);
  Network net = make_mlp(2, cfg.hidden, 2, relu());
  init_kaiming(net, seed);
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  train(net, r.train_ds, tc);
  r.base_acc = evaluate(net, test_ds, LossKind::cross_entropy).accuracy;
  for (double ratio : cfg.ratios) {
    Network pruned = net;
    const PrunePlan plan =
        layerwise_spline_prune(pruned, ratio, cfg.rho, Compensation::merge_outgoing);
    r.pruned_acc.push_back(evaluate(pruned, test_ds, LossKind::cross_entropy).accuracy);
    if (!plan.log.empty() && cfg.finetune_epochs > 0) {
      train(pruned, r.train_ds, finetune_config(tc, cfg.finetune_epochs, seed + 17));
      r.finetuned_acc.push_back(
          evaluate(pruned, test_ds, LossKind::cross_entropy).accuracy);
    } else {
      // nothing was removed: the net is unchanged, so is its accuracy
      r.finetuned_acc.push_back(r.pruned_acc.back());
    }
  }
  r.trained = std::move(net);
  return r;
}

}  // namespace

RunSummary xshape_experiment(const XShapeConfig& cfg) {
  if (cfg.seeds.empty() || cfg.ratios.empty()) throw ConfigError("empty seeds or ratios");
  for (double r : cfg.ratios)
    if (r < 0.0 || r >= 1.0) throw ConfigError("prune ratio must be in [0,1)");
  if (!(cfg.rho > 0.0)) throw ConfigError("rho must be positive");

  RunSummary sum;
  sum.kind = "xshape";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);
  ensure_dir(cfg.out_dir);

  std::vector<XShapeSeedResult> res(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), worker_count(cfg.workers, cfg.seeds.size()),
               [&](size_t i) { res[i] = run_xshape_seed(cfg, cfg.seeds[i]); });

  std::ostringstream csv;
  csv << "seed,ratio,acc_base,acc_pruned,acc_finetuned\n";
  json rows = json::array();
  json agg = json::object();
  std::vector<double> base_accs;
  for (size_t i = 0; i < cfg.seeds.size(); ++i) base_accs.push_back(res[i].base_acc);
  agg["median_base_acc"] = median(base_accs);
  json per_ratio = json::object();
  for (size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
    std::vector<double> ft, drop;
    for (size_t i = 0; i < cfg.seeds.size(); ++i) {
      csv << cfg.seeds[i] << "," << cfg.ratios[ri] << "," << res[i].base_acc << ","
          << res[i].pruned_acc[ri] << "," << res[i].finetuned_acc[ri] << "\n";
      rows.push_back({{"seed", cfg.seeds[i]},
                      {"ratio", cfg.ratios[ri]},
                      {"acc_base", res[i].base_acc},
                      {"acc_pruned", res[i].pruned_acc[ri]},
                      {"acc_finetuned", res[i].finetuned_acc[ri]}});
      ft.push_back(res[i].finetuned_acc[ri]);
      drop.push_back(res[i].base_acc - res[i].finetuned_acc[ri]);
    }
    json e;
    e["median_acc_finetuned"] = median(ft);
    e["median_drop"] = median(drop);
    e["iqr_acc_finetuned"] = quantile(ft, 0.75) - quantile(ft, 0.25);
    per_ratio[std::to_string(cfg.ratios[ri])] = e;
  }
  sum.results = rows;
  agg["per_ratio"] = per_ratio;
  sum.aggregates = agg;

  const std::string csv_path = cfg.out_dir + "/accuracy_vs_ratio.csv";
  write_file(csv_path, csv.str());
  sum.artifacts.push_back(csv_path);

  if (cfg.render) {
    // partition figures for the first seed: unpruned and each sweep ratio
    const auto& first = res[0];
    write_file(cfg.out_dir + "/partition_ratio0.svg",
               render_xshape_partition(first.trained, first.train_ds));
    sum.artifacts.push_back(cfg.out_dir + "/partition_ratio0.svg");
    for (double ratio : cfg.ratios) {
      Network pruned = first.trained;
      layerwise_spline_prune(pruned, ratio, cfg.rho, Compensation::merge_outgoing);
      std::ostringstream name;
      name << cfg.out_dir << "/partition_ratio" << static_cast<int>(ratio * 100) << ".svg";
      write_file(name.str(), render_xshape_partition(pruned, first.train_ds));
      sum.artifacts.push_back(name.str());
    }
  }

  const std::string sum_path = cfg.out_dir + "/summary.json";
  write_file(sum_path, sum.to_json().dump(2) + "\n");
  sum.artifacts.push_back(sum_path);
  return sum;
}

// ---------------------------------------------------------------------------
// Early-bird pipeline

EBPipelineConfig EBPipelineConfig::from_json(const json& j) {
  EBPipelineConfig c;
  c.dataset = j.value("dataset", json{{"kind", "xshape"}});
  c.net = j.value("net", json{{"input", json::array({2})},
                              {"layers", json::array({json{{"type", "dense"}, {"out", 20}},
                                                      json{{"type", "dense"}, {"out", 20}},
                                                      json{{"type", "dense"}, {"out", 2}}})}});
  c.test_fraction = j.value("test_fraction", 0.2);
  c.train = train_config_from_json(j.value("train", json::object()), 100);
  c.eb.threshold = j.value("eb", json::object()).value("threshold", 0.15);
  c.eb.window = j.value("eb", json::object()).value("window", size_t{2});
  c.eb.probe_size = j.value("eb", json::object()).value("probe_size", size_t{1024});
  c.policy = j.value("policy", std::string("spline_layer"));
  c.ratio = j.value("ratio", 0.5);
  c.rho = j.value("rho", 0.05);
  c.pca_dim = j.value("pca_dim", size_t{0});
  c.finetune_epochs = j.value("finetune_epochs", size_t{10});
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.out_dir = j.value("out_dir", std::string("out/earlybird"));
  c.workers = j.value("workers", size_t{0});
  return c;
}

json EBPipelineConfig::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["net"] = net;
  j["test_fraction"] = test_fraction;
  j["train"] = train_config_to_json(train);
  j["eb"] = {{"threshold", eb.threshold}, {"window", eb.window}, {"probe_size", eb.probe_size}};
  j["policy"] = policy;
  j["ratio"] = ratio;
  j["rho"] = rho;
  j["pca_dim"] = pca_dim;
  j["finetune_epochs"] = finetune_epochs;
  j["seeds"] = seeds;
  j["out_dir"] = out_dir;
  return j;
}

PrunePlan apply_policy(Network& net, const std::string& policy, double ratio,
                       double rho, size_t pca_dim, uint64_t seed) {
  if (policy == "spline_layer")
    return layerwise_spline_prune(net, ratio, rho, Compensation::merge_outgoing);
  if (policy == "spline_global") return global_spline_prune(net, ratio, rho, pca_dim);
  if (policy == "magnitude") return magnitude_prune(net, ratio, PruneScope::layer);
  if (policy == "random") return random_prune(net, ratio, PruneScope::layer, seed);
  if (policy == "none") return PrunePlan{};
  throw ConfigError("unknown pruning policy: " + policy);
}

RunSummary eb_pipeline(const EBPipelineConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("empty seeds");
  cfg.eb.validate();

  RunSummary sum;
  sum.kind = "earlybird";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);
  ensure_dir(cfg.out_dir);

  struct SeedRes {
    json row;
    json eb_report;
  };
  std::vector<SeedRes> res(cfg.seeds.size());

  parallel_for(cfg.seeds.size(), worker_count(cfg.workers, cfg.seeds.size()), [&](size_t i) {
    const uint64_t seed = cfg.seeds[i];
    json dspec = cfg.dataset;
    dspec["seed"] = dspec.value("seed", uint64_t{0}) + seed;
    const Dataset all = dataset_from_json(dspec);
    Dataset train_ds, test_ds;
    split_train_test(all, cfg.test_fraction, train_ds, test_ds);

    Network net = net_from_json(cfg.net);
    init_kaiming(net, seed);

    const auto probe = probe_indices(train_ds.size(), cfg.eb.probe_size, seed);
    EBDetector detector(cfg.eb);
    std::vector<ActivationCodeSet> snapshots;
    EpochCallback snap = [&](const Network& n, const EpochMetrics& m) {
      ActivationCodeSet cs = codes_of_batch(n, train_ds, probe, m.epoch);
      return detector.push(cs);
    };

    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const auto metrics = train(net, train_ds, tc, {snap}, &test_ds);
    const size_t epochs_run = metrics.size();
    const bool fallback = !detector.triggered();

    const size_t dense_macs = flops_estimate(net);
    // backward counted as 2x forward: 3 MACs per forward MAC per sample
    const size_t phase1 = dense_macs * 3 * train_ds.size() * epochs_run;

    Network pruned = net;
    const PrunePlan plan =
        apply_policy(pruned, cfg.policy, cfg.ratio, cfg.rho, cfg.pca_dim, seed);
    const size_t pruned_macs = flops_estimate(pruned);
    size_t phase2 = 0;
    if (cfg.finetune_epochs > 0 && !plan.log.empty()) {
      train(pruned, train_ds, finetune_config(tc, cfg.finetune_epochs, seed + 17));
      phase2 = pruned_macs * 3 * train_ds.size() * cfg.finetune_epochs;
    }
    const EvalStats final_eval = evaluate(pruned, test_ds, cfg.train.loss);

    json row;
    row["seed"] = seed;
    row["trigger_epoch"] = detector.triggered()
                               ? json(*detector.report().trigger_epoch)
                               : json(nullptr);
    row["fallback_full_training"] = fallback;
    row["epochs_run"] = epochs_run;
    row["dense_forward_macs"] = dense_macs;
    row["pruned_forward_macs"] = pruned_macs;
    row["train_macs_phase1"] = phase1;
    row["train_macs_phase2"] = phase2;
    row["train_macs_total"] = phase1 + phase2;
    row["final_test_acc"] = final_eval.accuracy;
    row["final_test_loss"] = final_eval.loss;
    res[i].row = std::move(row);
    res[i].eb_report = detector.report().to_json();
  });

  json rows = json::array();
  std::vector<double> accs, totals;
  for (size_t i = 0; i < res.size(); ++i) {
    rows.push_back(res[i].row);
    accs.push_back(res[i].row["final_test_acc"].get<double>());
    totals.push_back(static_cast<double>(res[i].row["train_macs_total"].get<size_t>()));
    const std::string rp = cfg.out_dir + "/eb_report_seed" +
                           std::to_string(cfg.seeds[i]) + ".json";
    write_file(rp, res[i].eb_report.dump(2) + "\n");
    sum.artifacts.push_back(rp);
  }
  sum.results = rows;
  sum.aggregates["median_final_acc"] = median(accs);
  sum.aggregates["median_train_macs_total"] = median(totals);

  const std::string sum_path = cfg.out_dir + "/summary.json";
  write_file(sum_path, sum.to_json().dump(2) + "\n");
  sum.artifacts.push_back(sum_path);
  return sum;
}

// ---------------------------------------------------------------------------
// rho sweep

RhoSweepConfig RhoSweepConfig::from_json(const json& j) {
  RhoSweepConfig c;
  if (j.contains("rhos")) c.rhos = j.at("rhos").get<std::vector<double>>();
  c.ratio = j.value("ratio", 0.5);
  c.base = XShapeConfig::from_json(j.value("xshape", json::object()));
  c.base.ratios = {c.ratio};
  c.out_dir = j.value("out_dir", std::string("out/rho_sweep"));
  return c;
}

json RhoSweepConfig::to_json() const {
  json j;
  j["rhos"] = rhos;
  j["ratio"] = ratio;
  j["xshape"] = base.to_json();
  j["out_dir"] = out_dir;
  return j;
}

RunSummary rho_sweep(const RhoSweepConfig& cfg) {
  if (cfg.rhos.empty()) throw ConfigError("empty rho grid");
  for (double rho : cfg.rhos)
    if (!(rho > 0.0)) throw ConfigError("rho must be positive");
  if (cfg.ratio < 0.0 || cfg.ratio >= 1.0) throw ConfigError("ratio must be in [0,1)");

  RunSummary sum;
  sum.kind = "rho_sweep";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);
  ensure_dir(cfg.out_dir);

  const auto& base = cfg.base;
  struct SeedState {
    Network trained;
    Dataset train_ds, test_ds;
    double base_acc;
  };
  std::vector<SeedState> states(base.seeds.size());
  parallel_for(base.seeds.size(), worker_count(base.workers, base.seeds.size()),
               [&](size_t i) {
                 const uint64_t seed = base.seeds[i];
                 SeedState& st = states[i];
                 st.train_ds = make_xshape(base.n_per_class, base.sigma, seed);
                 st.test_ds = make_xshape(base.n_per_class, base.sigma, seed + 99991);
                 st.trained = make_mlp(2, base.hidden, 2, relu());
                 init_kaiming(st.trained, seed);
                 TrainConfig tc = base.train;
                 tc.seed = seed;
                 train(st.trained, st.train_ds, tc);
                 st.base_acc =
                     evaluate(st.trained, st.test_ds, LossKind::cross_entropy).accuracy;
               });

  std::ostringstream csv;
  csv << "rho,seed,acc_finetuned,acc_base\n";
  json rows = json::array();
  json medians = json::object();
  std::vector<double> med_values;
  for (double rho : cfg.rhos) {
    std::vector<double> accs(base.seeds.size());
    parallel_for(base.seeds.size(), worker_count(base.workers, base.seeds.size()),
                 [&](size_t i) {
                   const uint64_t seed = base.seeds[i];
                   Network pruned = states[i].trained;
                   const PrunePlan plan = layerwise_spline_prune(
                       pruned, cfg.ratio, rho, Compensation::merge_outgoing);
                   TrainConfig tc = base.train;
                   tc.seed = seed;
                   if (!plan.log.empty() && base.finetune_epochs > 0)
                     train(pruned, states[i].train_ds,
                           finetune_config(tc, base.finetune_epochs, seed + 17));
                   accs[i] = evaluate(pruned, states[i].test_ds,
                                      LossKind::cross_entropy)
                                 .accuracy;
                 });
    for (size_t i = 0; i < base.seeds.size(); ++i) {
      csv << rho << "," << base.seeds[i] << "," << accs[i] << ","
          << states[i].base_acc << "\n";
      rows.push_back({{"rho", rho},
                      {"seed", base.seeds[i]},
                      {"acc_finetuned", accs[i]},
                      {"acc_base", states[i].base_acc}});
    }
    const double med = median(accs);
    medians[std::to_string(rho)] = med;
    med_values.push_back(med);
  }
  sum.results = rows;
  sum.aggregates["median_acc_by_rho"] = medians;
  sum.aggregates["spread"] =
      *std::max_element(med_values.begin(), med_values.end()) -
      *std::min_element(med_values.begin(), med_values.end());

  const std::string csv_path = cfg.out_dir + "/accuracy_vs_rho.csv";
  write_file(csv_path, csv.str());
  sum.artifacts.push_back(csv_path);

  ChartSeries series;
  series.label = "median accuracy";
  for (size_t i = 0; i < cfg.rhos.size(); ++i) {
    series.x.push_back(cfg.rhos[i]);
    series.y.push_back(med_values[i]);
  }
  const std::string svg_path = cfg.out_dir + "/accuracy_vs_rho.svg";
  write_file(svg_path, render_line_chart({series}, "rho", "accuracy"));
  sum.artifacts.push_back(svg_path);

  const std::string sum_path = cfg.out_dir + "/summary.json";
  write_file(sum_path, sum.to_json().dump(2) + "\n");
  sum.artifacts.push_back(sum_path);
  return sum;
}

// ---------------------------------------------------------------------------
// K-means lab

KMeansLabConfig KMeansLabConfig::from_json(const json& j) {
  KMeansLabConfig c;
  c.k_true = j.value("k_true", size_t{64});
  c.sigma_factor = j.value("sigma_factor", 0.2);
  c.n_samples = j.value("n_samples", size_t{6400});
  if (j.contains("k_starts")) c.k_starts = j.at("k_starts").get<std::vector<size_t>>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  c.lloyd_iters = j.value("lloyd_iters", size_t{100});
  c.out_dir = j.value("out_dir", std::string("out/kmeans"));
  c.workers = j.value("workers", size_t{0});
  return c;
}

json KMeansLabConfig::to_json() const {
  json j;
  j["k_true"] = k_true;
  j["sigma_factor"] = sigma_factor;
  j["n_samples"] = n_samples;
  j["k_starts"] = k_starts;
  j["seeds"] = seeds;
  j["lloyd_iters"] = lloyd_iters;
  j["out_dir"] = out_dir;
  return j;
}

RunSummary kmeans_experiment(const KMeansLabConfig& cfg) {
  if (cfg.k_starts.empty() || cfg.seeds.empty()) throw ConfigError("empty sweep");
  for (size_t k : cfg.k_starts)
    if (k < cfg.k_true) throw ConfigError("k_start below k_true");

  RunSummary sum;
  sum.kind = "kmeans";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);
  ensure_dir(cfg.out_dir);

  const GMMSpec spec = gmm_lattice_spec(cfg.k_true, 0, cfg.sigma_factor);
  const size_t schemes = 2;
  std::vector<double> acc(cfg.k_starts.size() * cfg.seeds.size() * schemes, 0.0);
  const size_t jobs = cfg.seeds.size();

  parallel_for(jobs, worker_count(cfg.workers, jobs), [&](size_t si) {
    const uint64_t seed = cfg.seeds[si];
    const LabeledPoints data = sample_gmm(spec, cfg.n_samples, seed);
    for (size_t ki = 0; ki < cfg.k_starts.size(); ++ki) {
      const size_t k_start = cfg.k_starts[ki];
      for (size_t sc = 0; sc < schemes; ++sc) {
        std::vector<double> init =
            sc == 0 ? random_init(data, k_start, seed * 2 + 1)
                    : kmeanspp_init(data, k_start, seed * 2 + 1);
        KMeansModel model = lloyd_fit(data, std::move(init), cfg.lloyd_iters);
        model.init_scheme =
            sc == 0 ? InitScheme::random_data_points : InitScheme::kmeanspp;
        if (model.k() > cfg.k_true) {
          prune_centroids(model, cfg.k_true);
          model = lloyd_fit(data, std::move(model.centroids), cfg.lloyd_iters);
        }
        acc[(ki * cfg.seeds.size() + si) * schemes + sc] =
            clustering_accuracy(model, data);
      }
    }
  });

  std::ostringstream csv;
  csv << "seed,k_start,scheme,accuracy\n";
  json rows = json::array();
  ChartSeries srnd, spp;
  srnd.label = "random init + prune";
  spp.label = "kmeans++ init + prune";
  json medians = json::object();
  for (size_t ki = 0; ki < cfg.k_starts.size(); ++ki) {
    std::vector<double> arnd, app;
    for (size_t si = 0; si < cfg.seeds.size(); ++si) {
      const double a0 = acc[(ki * cfg.seeds.size() + si) * schemes + 0];
      const double a1 = acc[(ki * cfg.seeds.size() + si) * schemes + 1];
      csv << cfg.seeds[si] << "," << cfg.k_starts[ki] << ",random," << a0 << "\n";
      csv << cfg.seeds[si] << "," << cfg.k_starts[ki] << ",kmeanspp," << a1 << "\n";
      rows.push_back({{"seed", cfg.seeds[si]},
                      {"k_start", cfg.k_starts[ki]},
                      {"scheme", "random"},
                      {"accuracy", a0}});
      rows.push_back({{"seed", cfg.seeds[si]},
                      {"k_start", cfg.k_starts[ki]},
                      {"scheme", "kmeanspp"},
                      {"accuracy", a1}});
      arnd.push_back(a0);
      app.push_back(a1);
    }
    medians[std::to_string(cfg.k_starts[ki])] = {{"random", median(arnd)},
                                                 {"kmeanspp", median(app)}};
    srnd.x.push_back(static_cast<double>(cfg.k_starts[ki]));
    srnd.y.push_back(median(arnd));
    spp.x.push_back(static_cast<double>(cfg.k_starts[ki]));
    spp.y.push_back(median(app));
  }
  sum.results = rows;
  sum.aggregates["median_accuracy_by_k_start"] = medians;

  const std::string csv_path = cfg.out_dir + "/kmeans_accuracy.csv";
  write_file(csv_path, csv.str());
  sum.artifacts.push_back(csv_path);
  const std::string svg_path = cfg.out_dir + "/accuracy_vs_kstart.svg";
  write_file(svg_path,
             render_line_chart({srnd, spp}, "starting clusters", "clustering accuracy"));
  sum.artifacts.push_back(svg_path);
  const std::string sum_path = cfg.out_dir + "/summary.json";
  write_file(sum_path, sum.to_json().dump(2) + "\n");
  sum.artifacts.push_back(sum_path);
  return sum;
}

// ---------------------------------------------------------------------------
// Layerwise pretraining

Network layerwise_pretrain(const Network& net, const Dataset& data,
                           const TrainConfig& stage_cfg,
                           std::vector<std::vector<double>>* traces) {
  for (const Layer& l : net.layers)
    if (std::holds_alternative<ConvLayer>(l))
      throw ArgumentError("layerwise pretraining supports dense stacks only");
  if (data.size() == 0) throw ArgumentError("empty dataset");

  Network out = net;
  const size_t head = head_index(out);

  // current layer inputs, row-major
  size_t cur_dim = Tensor::shape_size(out.input_shape);
  std::vector<double> cur = data.xs;

  for (size_t li = 0; li < out.layers.size(); ++li) {
    if (li == head) break;
    auto& layer = std::get<DenseLayer>(out.layers[li]);

    if (stage_cfg.epochs > 0) {
      // encoder starts from the provided initialization; decoder is fresh
      Network ae;
      ae.input_shape = {cur_dim};
      ae.layers.push_back(layer);
      DenseLayer dec;
      dec.in_dim = layer.out_dim;
      dec.out_dim = cur_dim;
      dec.weights.assign(dec.in_dim * dec.out_dim, 0.0);
      dec.bias.assign(dec.out_dim, 0.0);
      dec.act = identity();
      ae.layers.emplace_back(std::move(dec));
      {
        Network tmp = ae;
        init_kaiming(tmp, stage_cfg.seed + li + 1);
        std::get<DenseLayer>(ae.layers[1]) = std::get<DenseLayer>(tmp.layers[1]);
      }

      Dataset recon;
      recon.x_shape = {cur_dim};
      recon.xs = cur;
      recon.targets = cur;
      recon.target_dim = cur_dim;

      TrainConfig tc = stage_cfg;
      tc.loss = LossKind::mse;
      tc.seed = stage_cfg.seed + 31 * li;
      const auto ms = train(ae, recon, tc);
      if (traces) {
        std::vector<double> trace;
        for (const auto& m : ms) trace.push_back(m.train_loss);
        traces->push_back(std::move(trace));
      }
      layer = std::get<DenseLayer>(ae.layers[0]);
    } else if (traces) {
      traces->push_back({});
    }

    // propagate data through the (now pretrained) layer
    std::vector<double> nxt(data.size() * layer.out_dim);
    std::vector<double> pre, act_out;
    for (size_t i = 0; i < data.size(); ++i) {
      std::span<const double> in(cur.data() + i * cur_dim, cur_dim);
      pre.resize(layer.out_dim);
      act_out.resize(layer.out_dim);
      for (size_t o = 0; o < layer.out_dim; ++o) {
        double s = layer.bias[o];
        const double* w = layer.weights.data() + o * layer.in_dim;
        for (size_t k = 0; k < layer.in_dim; ++k) s += w[k] * in[k];
        act_out[o] = layer.act(s);
      }
      std::copy(act_out.begin(), act_out.end(), nxt.begin() + static_cast<long>(i * layer.out_dim));
    }
    cur = std::move(nxt);
    cur_dim = layer.out_dim;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Slice visualization

SliceVizConfig SliceVizConfig::from_json(const json& j) {
  SliceVizConfig c;
  c.weights_path = j.at("weights").get<std::string>();
  c.images_path = j.at("images").get<std::string>();
  c.labels_path = j.at("labels").get<std::string>();
  c.class_a = j.value("class_a", size_t{6});
  c.class_b = j.value("class_b", size_t{9});
  c.x0_index = j.value("x0_index", static_cast<long>(-1));
  c.resolution = j.value("resolution", size_t{100});
  c.margin = j.value("margin", 0.25);
  if (j.contains("layers")) c.layers = j.at("layers").get<std::vector<size_t>>();
  c.out_svg = j.value("out_svg", std::string("out/slice.svg"));
  return c;
}

json SliceVizConfig::to_json() const {
  json j;
  j["weights"] = weights_path;
  j["images"] = images_path;
  j["labels"] = labels_path;
  j["class_a"] = class_a;
  j["class_b"] = class_b;
  j["x0_index"] = x0_index;
  j["resolution"] = resolution;
  j["margin"] = margin;
  j["layers"] = layers;
  j["out_svg"] = out_svg;
  return j;
}

RunSummary slice_viz(const SliceVizConfig& cfg) {
  RunSummary sum;
  sum.kind = "slice_viz";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);

  const Network net = load_network(cfg.weights_path);
  const ImageDataset im = load_mnist_idx(cfg.images_path, cfg.labels_path);
  const size_t dim = im.rows * im.cols;

  auto first_of = [&](int cls) -> std::vector<double> {
    for (size_t i = 0; i < im.count; ++i)
      if (im.labels[i] == cls)
        return {im.pixels.begin() + static_cast<long>(i * dim),
                im.pixels.begin() + static_cast<long>((i + 1) * dim)};
    throw ArgumentError("no image of class " + std::to_string(cls));
  };
  const std::vector<double> x1 = first_of(static_cast<int>(cfg.class_a));
  const std::vector<double> x2 = first_of(static_cast<int>(cfg.class_b));
  std::vector<double> x0(dim, 0.0);
  if (cfg.x0_index >= 0) {
    if (static_cast<size_t>(cfg.x0_index) >= im.count)
      throw ArgumentError("x0_index out of range");
    x0.assign(im.pixels.begin() + cfg.x0_index * static_cast<long>(dim),
              im.pixels.begin() + (cfg.x0_index + 1) * static_cast<long>(dim));
  }

  SliceExtent ext{-cfg.margin, 1.0 + cfg.margin, -cfg.margin, 1.0 + cfg.margin};
  const SliceGrid grid = make_slice(x0, x1, x2, ext, cfg.resolution);

  std::vector<size_t> layers = cfg.layers;
  if (layers.empty()) {
    const auto coded = coded_layers(net);
    for (size_t i = 0; i < coded.size() && i < 2; ++i) layers.push_back(coded[i]);
  }
  std::vector<BoundarySet> sets;
  for (size_t li : layers) sets.push_back(subdivision_boundaries(net, grid, li));
  sets.push_back(decision_boundary(net, grid, cfg.class_a, cfg.class_b));

  std::vector<SvgMarker> markers = {{0.0, 0.0, 0}, {1.0, 0.0, 1}, {0.0, 1.0, 2}};
  SvgStyle style;
  style.marker_radius = 4.0;
  write_file(cfg.out_svg, render_svg(sets, grid, style, markers));
  sum.artifacts.push_back(cfg.out_svg);

  json agg;
  agg["region_count"] = region_count(net, grid);
  for (size_t i = 0; i < sets.size(); ++i)
    agg["segments_" + std::to_string(i)] = sets[i].segments.size();
  sum.aggregates = agg;
  return sum;
}

// ---------------------------------------------------------------------------
// Generic train job

TrainJobConfig TrainJobConfig::from_json(const json& j) {
  TrainJobConfig c;
  c.dataset = j.at("dataset");
  c.net = j.at("net");
  c.test_fraction = j.value("test_fraction", 0.2);
  c.train = train_config_from_json(j.value("train", json::object()), 20);
  c.out_dir = j.value("out_dir", std::string("out/train"));
  return c;
}

json TrainJobConfig::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["net"] = net;
  j["test_fraction"] = test_fraction;
  j["train"] = train_config_to_json(train);
  j["out_dir"] = out_dir;
  return j;
}

RunSummary train_job(const TrainJobConfig& cfg) {
  RunSummary sum;
  sum.kind = "train";
  sum.config = cfg.to_json();
  sum.config_hash = hash_config(sum.config);
  ensure_dir(cfg.out_dir);

  const Dataset all = dataset_from_json(cfg.dataset);
  Dataset train_ds, test_ds;
  split_train_test(all, cfg.test_fraction, train_ds, test_ds);

  Network net = net_from_json(cfg.net);
  init_kaiming(net, cfg.train.seed);
  bool aborted = false;
  std::string abort_reason;
  std::vector<EpochMetrics> metrics;
  try {
    metrics = train(net, train_ds, cfg.train, {}, &test_ds);
  } catch (const DivergenceError& e) {
    aborted = true;
    abort_reason = e.what();
  }

  std::ostringstream csv;
  csv << "epoch,lr,train_loss,train_acc,test_loss,test_acc\n";
  json rows = json::array();
  for (const auto& m : metrics) {
    csv << m.epoch << "," << m.lr << "," << m.train_loss << "," << m.train_acc << ","
        << m.test_loss << "," << m.test_acc << "\n";
    rows.push_back({{"epoch", m.epoch},
                    {"train_loss", m.train_loss},
                    {"train_acc", m.train_acc},
                    {"test_loss", m.test_loss},
                    {"test_acc", m.test_acc}});
  }
  sum.results = rows;
  sum.ok = !aborted;
  if (aborted) sum.aggregates["aborted"] = abort_reason;
  if (!metrics.empty()) {
    sum.aggregates["final_train_acc"] = metrics.back().train_acc;
    sum.aggregates["final_test_acc"] = metrics.back().test_acc;
  }
  sum.aggregates["forward_macs"] = flops_estimate(net);

  const std::string weights_path = cfg.out_dir + "/weights.net";
  save_network(net, weights_path);
  sum.artifacts.push_back(weights_path);
  const std::string csv_path = cfg.out_dir + "/metrics.csv";
  write_file(csv_path, csv.str());
  sum.artifacts.push_back(csv_path);
  const std::string sum_path = cfg.out_dir + "/summary.json";
  write_file(sum_path, sum.to_json().dump(2) + "\n");
  sum.artifacts.push_back(sum_path);
  return sum;
}

}  // namespace splinelab
