// splinelab CLI: train CPA toy networks, extract/visualize their input-space
// partitions, detect early-bird tickets, and prune by partition redundancy.
// Every subcommand exits 0 on success; failures print a machine-readable
// error JSON and exit nonzero.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "splinelab/errors.hpp"
#include "splinelab/experiments.hpp"
#include "splinelab/harness_util.hpp"
#include "splinelab/mnist_idx.hpp"
#include "splinelab/network.hpp"
#include "splinelab/pruning.hpp"

using nlohmann::json;
using namespace splinelab;

namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw ConfigError("bad config json in " + path + ": " + e.what());
  }
  return j;
}

void apply_overrides(json& cfg, const std::string& seed, const std::string& out) {
  if (!seed.empty()) {
    const uint64_t s = std::stoull(seed);
    cfg["seeds"] = json::array({s});
    if (!cfg.contains("train")) cfg["train"] = json::object();
    cfg["train"]["seed"] = s;
  }
  if (!out.empty()) cfg["out_dir"] = out;
}

int finish(const RunSummary& sum) {
  std::cout << sum.to_json().dump(2) << "\n";
  return sum.ok ? 0 : 1;
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const DimensionError*>(&e)) return "dimension";
  if (dynamic_cast<const LabelError*>(&e)) return "label";
  if (dynamic_cast<const DivergenceError*>(&e)) return "divergence";
  if (dynamic_cast<const AlignmentError*>(&e)) return "alignment";
  if (dynamic_cast<const DegenerateSliceError*>(&e)) return "degenerate_slice";
  if (dynamic_cast<const DegenerateUnitError*>(&e)) return "degenerate_unit";
  if (dynamic_cast<const FormatError*>(&e)) return "format";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ArgumentError*>(&e)) return "argument";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splinelab: spline-view training, partition analysis and pruning"};
  app.require_subcommand(1);
  app.fallthrough();  // --config/--seed/--out may follow the subcommand

  std::string config_path, seed_override, out_override;
  app.add_option("--config", config_path, "experiment config (json)");
  app.add_option("--seed", seed_override, "override the seed list with one seed");
  app.add_option("--out", out_override, "override the output directory");

  auto* c_train = app.add_subcommand("train", "train a network from a config");
  auto* c_xshape = app.add_subcommand("xshape", "X-shape prune-ratio study");
  auto* c_eb = app.add_subcommand("earlybird", "train + EB detection + prune + fine-tune");
  auto* c_kmeans = app.add_subcommand("kmeans", "k-means overparametrize/prune study");
  auto* c_sawtooth = app.add_subcommand("sawtooth", "sawtooth width study");
  auto* c_rho = app.add_subcommand("rho-sweep", "redundancy-sensitivity sweep");

  auto* c_slice = app.add_subcommand("slice-viz", "render a 2-D slice figure");
  std::string sv_weights, sv_images, sv_labels, sv_out = "out/slice.svg";
  size_t sv_a = 6, sv_b = 9, sv_res = 100;
  long sv_x0 = -1;
  c_slice->add_option("--weights", sv_weights, "weights file");
  c_slice->add_option("--images", sv_images, "idx image file");
  c_slice->add_option("--labels", sv_labels, "idx label file");
  c_slice->add_option("--class-a", sv_a, "first anchor class");
  c_slice->add_option("--class-b", sv_b, "second anchor class");
  c_slice->add_option("--x0", sv_x0, "anchor image index (-1: zero image)");
  c_slice->add_option("--resolution", sv_res, "lattice points per axis");
  c_slice->add_option("--out-svg", sv_out, "output svg path");

  auto* c_prune = app.add_subcommand("prune", "prune a saved network");
  std::string pr_in, pr_out = "pruned.net", pr_plan = "plan.json", pr_policy = "spline_layer";
  std::string pr_scope = "layer", pr_comp = "merge";
  double pr_ratio = 0.5, pr_rho = 0.05;
  size_t pr_pca = 0;
  uint64_t pr_seed = 0;
  c_prune->add_option("--weights", pr_in, "input weights file")->required();
  c_prune->add_option("--out-weights", pr_out, "pruned weights path");
  c_prune->add_option("--plan", pr_plan, "prune plan json path");
  c_prune->add_option("--policy", pr_policy,
                      "spline_layer|spline_global|magnitude|random");
  c_prune->add_option("--ratio", pr_ratio, "fraction of units to remove");
  c_prune->add_option("--rho", pr_rho, "bias sensitivity of the redundancy measure");
  c_prune->add_option("--scope", pr_scope, "layer|global (magnitude/random)");
  c_prune->add_option("--comp", pr_comp, "merge|none (spline_layer)");
  c_prune->add_option("--pca-dim", pr_pca, "shared dim for spline_global (0=auto)");
  c_prune->add_option("--prune-seed", pr_seed, "seed for the random policy");

  auto* c_synth = app.add_subcommand("synth-digits", "write synthetic digit idx files");
  std::string syn_dir = "data";
  size_t syn_n = 3000;
  uint64_t syn_seed = 0;
  c_synth->add_option("--out-dir", syn_dir, "output directory");
  c_synth->add_option("--n", syn_n, "number of images");
  c_synth->add_option("--gen-seed", syn_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    json cfg = load_config(config_path);
    apply_overrides(cfg, seed_override, out_override);

    if (c_train->parsed()) return finish(train_job(TrainJobConfig::from_json(cfg)));
    if (c_xshape->parsed()) return finish(xshape_experiment(XShapeConfig::from_json(cfg)));
    if (c_eb->parsed()) return finish(eb_pipeline(EBPipelineConfig::from_json(cfg)));
    if (c_kmeans->parsed()) return finish(kmeans_experiment(KMeansLabConfig::from_json(cfg)));
    if (c_sawtooth->parsed()) return finish(sawtooth_experiment(SawtoothConfig::from_json(cfg)));
    if (c_rho->parsed()) return finish(rho_sweep(RhoSweepConfig::from_json(cfg)));

    if (c_slice->parsed()) {
      SliceVizConfig sc;
      if (!config_path.empty()) sc = SliceVizConfig::from_json(cfg);
      if (!sv_weights.empty()) sc.weights_path = sv_weights;
      if (!sv_images.empty()) sc.images_path = sv_images;
      if (!sv_labels.empty()) sc.labels_path = sv_labels;
      sc.class_a = sv_a;
      sc.class_b = sv_b;
      sc.x0_index = sv_x0;
      sc.resolution = sv_res;
      sc.out_svg = sv_out;
      return finish(slice_viz(sc));
    }

    if (c_prune->parsed()) {
      Network net = load_network(pr_in);
      PrunePlan plan;
      if (pr_policy == "spline_layer") {
        plan = layerwise_spline_prune(net, pr_ratio, pr_rho,
                                      pr_comp == "none" ? Compensation::none
                                                        : Compensation::merge_outgoing);
      } else if (pr_policy == "spline_global") {
        plan = global_spline_prune(net, pr_ratio, pr_rho, pr_pca);
      } else if (pr_policy == "magnitude") {
        plan = magnitude_prune(net, pr_ratio,
                               pr_scope == "global" ? PruneScope::global : PruneScope::layer);
      } else if (pr_policy == "random") {
        plan = random_prune(net, pr_ratio,
                            pr_scope == "global" ? PruneScope::global : PruneScope::layer,
                            pr_seed);
      } else {
        throw ConfigError("unknown policy: " + pr_policy);
      }
      save_network(net, pr_out);
      std::ofstream os(pr_plan);
      os << plan.to_json().dump(2) << "\n";
      json out;
      out["ok"] = true;
      out["weights"] = pr_out;
      out["plan"] = pr_plan;
      out["removals"] = plan.log.size();
      out["forward_macs"] = flops_estimate(net);
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (c_synth->parsed()) {
      const std::string imgs = syn_dir + "/synth-images-idx3-ubyte";
      const std::string labs = syn_dir + "/synth-labels-idx1-ubyte";
      ensure_dir(syn_dir);
      write_synth_digit_idx(imgs, labs, syn_n, syn_seed);
      json out;
      out["ok"] = true;
      out["images"] = imgs;
      out["labels"] = labs;
      out["count"] = syn_n;
      std::cout << out.dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    json err;
    err["ok"] = false;
    err["error"] = error_kind(e);
    err["message"] = e.what();
    std::cout << err.dump(2) << "\n";
    return 1;
  }
  return 0;
}
