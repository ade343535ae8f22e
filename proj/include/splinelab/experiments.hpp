// Experiment drivers behind the CLI subcommands. Each driver takes a config
// (parsed from JSON with documented defaults, see docs/config_schema.md),
// runs its seeds in parallel worker threads, writes CSV/JSON/SVG artifacts
// into the output directory, and returns a RunSummary.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "splinelab/dataset.hpp"
#include "splinelab/earlybird.hpp"
#include "splinelab/engine.hpp"
#include "splinelab/network.hpp"
#include "splinelab/pruning.hpp"

namespace splinelab {

struct RunSummary {
  std::string kind;
  std::string config_hash;  // fnv1a of the canonical config dump
  nlohmann::json config;
  nlohmann::json results;     // per-seed rows
  nlohmann::json aggregates;  // medians / IQRs and headline comparisons
  std::vector<std::string> artifacts;
  bool ok = true;

  nlohmann::json to_json() const;
};

// Builds a network from a JSON layer list, inferring input dims by shape
// propagation, e.g.
//   {"input": [1,28,28],
//    "layers": [{"type":"conv","out_ch":8,"kh":5,"kw":5,"pad":2,"act":"relu"},
//               {"type":"pool"},
//               {"type":"dense","out":10}]}
Network net_from_json(const nlohmann::json& spec);

// kind: xshape | idx | synth_digits | sawtooth (see docs/config_schema.md)
Dataset dataset_from_json(const nlohmann::json& spec);

TrainConfig train_config_from_json(const nlohmann::json& j, size_t default_epochs = 100);

// ---------------------------------------------------------------------------

struct SawtoothConfig {
  size_t peaks = 2;
  std::vector<size_t> widths = {2, 4, 8, 16, 32};
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  size_t n_train = 256;
  TrainConfig train;  // mse loss, no weight decay by default
  std::string out_dir = "out/sawtooth";
  size_t workers = 0;  // 0 = hardware concurrency

  static SawtoothConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary sawtooth_experiment(const SawtoothConfig& cfg);

struct XShapeConfig {
  size_t n_per_class = 1000;
  double sigma = 0.08;
  std::vector<size_t> hidden = {20, 20};
  TrainConfig train;
  std::vector<double> ratios = {0.2, 0.4, 0.6, 0.8, 0.95};
  double rho = 0.05;
  size_t finetune_epochs = 30;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string out_dir = "out/xshape";
  bool render = true;
  size_t workers = 0;

  static XShapeConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary xshape_experiment(const XShapeConfig& cfg);

struct EBPipelineConfig {
  nlohmann::json dataset;  // dataset_from_json spec
  nlohmann::json net;      // net_from_json spec
  double test_fraction = 0.2;
  TrainConfig train;
  EBConfig eb;
  std::string policy = "spline_layer";  // spline_layer|spline_global|magnitude|random|none
  double ratio = 0.5;
  double rho = 0.05;
  size_t pca_dim = 0;
  size_t finetune_epochs = 10;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string out_dir = "out/earlybird";
  size_t workers = 0;

  static EBPipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary eb_pipeline(const EBPipelineConfig& cfg);

// Apply one pruning policy by name (copy of the EB pipeline's switch).
PrunePlan apply_policy(Network& net, const std::string& policy, double ratio,
                       double rho, size_t pca_dim, uint64_t seed);

struct RhoSweepConfig {
  std::vector<double> rhos = {0.01, 0.05, 0.1, 0.2, 0.4};
  double ratio = 0.5;
  XShapeConfig base;  // seeds/net/training reused per rho
  std::string out_dir = "out/rho_sweep";

  static RhoSweepConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary rho_sweep(const RhoSweepConfig& cfg);

struct KMeansLabConfig {
  size_t k_true = 64;
  double sigma_factor = 0.2;
  size_t n_samples = 6400;
  std::vector<size_t> k_starts = {64, 96, 128, 192, 256};
  std::vector<uint64_t> seeds = {1,  2,  3,  4,  5,  6,  7,  8,  9,  10,
                                 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  size_t lloyd_iters = 100;
  std::string out_dir = "out/kmeans";
  size_t workers = 0;

  static KMeansLabConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary kmeans_experiment(const KMeansLabConfig& cfg);

// Greedy unsupervised stack initialization: each hidden dense layer is
// trained as the encoder of a one-hidden-layer autoencoder on the previous
// layer's outputs; the decoder is discarded. Labels are never used. Conv
// layers are not supported. Per-layer reconstruction-loss traces are
// appended to *traces when given.
Network layerwise_pretrain(const Network& net, const Dataset& data,
                           const TrainConfig& stage_cfg,
                           std::vector<std::vector<double>>* traces = nullptr);

struct SliceVizConfig {
  std::string weights_path;
  std::string images_path, labels_path;
  size_t class_a = 6, class_b = 9;
  long x0_index = -1;  // -1: zero image
  size_t resolution = 100;
  double margin = 0.25;  // extent [-margin, 1+margin]^2
  std::vector<size_t> layers;  // coded layers to draw; empty = first two
  std::string out_svg = "out/slice.svg";

  static SliceVizConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary slice_viz(const SliceVizConfig& cfg);

struct TrainJobConfig {
  nlohmann::json dataset;
  nlohmann::json net;
  double test_fraction = 0.2;
  TrainConfig train;
  std::string out_dir = "out/train";

  static TrainJobConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};
RunSummary train_job(const TrainJobConfig& cfg);

}  // namespace splinelab
