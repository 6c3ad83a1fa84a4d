#pragma once

#include <filesystem>

#include "sparselab/config.hpp"
#include "sparselab/continual.hpp"
#include "sparselab/data.hpp"
#include "sparselab/sparsity.hpp"

namespace sparselab {

// Train/test pair resolved from --data-dir, or generated-and-cached
// synthetic digits when no directory is given.
struct DataBundle {
  Dataset train;
  Dataset test;
};
DataBundle resolve_data(const RunConfig& cfg);

std::filesystem::path synthetic_cache_dir(const RunConfig& cfg);
void cmd_gen_data(const RunConfig& cfg);

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path init_checkpoint;
  std::filesystem::path metrics_csv;
  double final_test_accuracy = 0.0;
};
TrainOutputs cmd_train(const RunConfig& cfg);

struct SweepOutputs {
  std::vector<SparsityReport> reports;
  std::vector<double> overlaps;  // init-vs-final mask overlap per fraction
  std::filesystem::path sweep_csv, histogram_csv, overlap_csv;
};
SweepOutputs cmd_prune_sweep(const RunConfig& cfg, const std::filesystem::path& checkpoint);

struct ContinualOutputs {
  std::vector<std::vector<double>> accuracy_matrix;  // row i: tasks 0..i after task i
  std::vector<double> average_accuracy;              // mean of row i
  std::vector<double> protected_fraction;            // after task i
  std::vector<double> chosen_keep;                   // keep fraction chosen per task
  std::filesystem::path matrix_csv, curves_csv, state_dir;
};
ContinualOutputs cmd_continual(const RunConfig& cfg);

struct InferOutputs {
  double task_id_accuracy = 0.0;
  double class_accuracy = 0.0;
  std::size_t max_rounds = 0;
  std::size_t examples = 0;
  std::filesystem::path report_csv;
};
InferOutputs cmd_infer_task(const RunConfig& cfg, const std::filesystem::path& state_dir);

struct AppendixAOutputs {
  std::vector<std::string> modes;  // baseline, powerprop-naive, powerprop-virtual-target
  std::vector<double> dense_accuracy;
  std::vector<std::vector<SparsityReport>> sweeps;  // per mode
  std::filesystem::path csv;
};
AppendixAOutputs cmd_appendix_a(const RunConfig& cfg);

}  // namespace sparselab
