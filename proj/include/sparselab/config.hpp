#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "sparselab/continual.hpp"
#include "sparselab/train.hpp"

namespace sparselab {

// Flat run configuration shared by every subcommand; serialised verbatim
// into provenance sidecars and checkpoint headers.
struct RunConfig {
  std::uint64_t seed = 1;
  std::vector<std::size_t> widths = {784, 300, 100, 10};
  double alpha = 2.0;
  std::string mode = "baseline";       // baseline | powerprop-naive | powerprop-virtual-target
  std::string optimizer = "momentum";  // sgd | momentum | nesterov | adam
  double lr = 0.0025;
  double momentum = 0.9;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::size_t batch_size = 60;
  std::size_t steps = 50000;
  std::size_t eval_interval = 2000;

  // pruning / sweeps
  std::vector<double> keep_fractions = {1.0, 0.8, 0.6, 0.4, 0.3, 0.2, 0.1, 0.05, 0.03, 0.01};
  std::string scope = "layerwise";  // layerwise | global
  double output_layer_factor = 0.5;
  std::size_t histogram_sample = 10000;
  std::size_t histogram_bins = 100;
  double histogram_keep_fraction = 0.1;

  // continual learning
  std::string task_kind = "permuted";  // permuted | split
  std::size_t tasks = 10;
  std::size_t steps_per_task = 10000;
  std::size_t retrain_steps = 2500;
  double gamma = 0.9;
  std::vector<double> keep_schedule;   // ascending; empty = default schedule
  bool per_task_heads = false;
  bool freeze_biases_after_first = true;
  bool reinitialise_pruned = true;
  std::uint64_t permute_seed = 123;
  std::size_t infer_batch = 1;         // examples pooled per inference call
  std::size_t validation_count = 5000;

  // data & output
  std::string data_dir;                // IDX files; empty = synthetic cache under out_dir
  std::size_t synth_train = 60000;
  std::size_t synth_test = 10000;
  std::uint64_t synth_seed = 2026;
  std::string out_dir = "out";
};

// Keep fractions 0.01..0.14 step 0.01, 0.15..0.25 step 0.05, 0.3..0.9
// step 0.1, ascending.
std::vector<double> default_keep_schedule();

std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

void validate(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_config_file(const std::string& path);

OptimizerConfig optimizer_config(const RunConfig& cfg);
TrainOptions train_options(const RunConfig& cfg);
ContinualConfig continual_config(const RunConfig& cfg);
PruneScope scope_from_string(const std::string& name);

}  // namespace sparselab
