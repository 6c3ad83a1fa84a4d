#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "json.hpp"
#include "sparselab/sparsity.hpp"
#include "sparselab/train.hpp"

namespace sparselab {

struct ContinualConfig {
  TrainOptions train;
  std::vector<std::size_t> widths = {784, 300, 100, 10};
  std::size_t steps_per_task = 10000;
  std::size_t retrain_steps = 0;        // 0 disables the post-prune retraining
  double gamma = 0.9;                   // minimum fraction of dense validation accuracy
  std::vector<double> keep_schedule;    // ascending keep fractions s_1 < ... < s_n
  PruneScope scope = PruneScope::Global;
  bool per_task_heads = false;          // snapshot the output layer per task
  bool freeze_biases_after_first = true;
  bool reinitialise_pruned = true;      // fresh draws outside every stored mask
};

nlohmann::json continual_config_to_json(const ContinualConfig& cfg);
ContinualConfig continual_config_from_json(const nlohmann::json& j);

struct InferenceResult {
  std::size_t predicted_task = 0;
  struct Round {
    std::vector<std::size_t> candidates;  // surviving set entering the round
    std::vector<double> scores;           // aligned with candidates
  };
  std::vector<Round> trace;  // at most ceil(log2 T) rounds
};

struct TaskRecord {
  MaskSet mask;  // one entry per network layer; head entry empty in per-head mode
  double keep_fraction = 1.0;
  bool warning = false;             // even the densest schedule entry missed gamma*P
  double dense_performance = 0.0;   // validation accuracy before masking
  double sparse_performance = 0.0;  // validation accuracy of the chosen mask (pre-retrain)
  Tensor head_weight, head_bias;    // per-task-heads snapshots
};

// Sequential trainer with task masks:
//  - train_task updates only backward-free positions (fresh optimizer slots
//    per task, so protected weights stay bitwise untouched),
//  - sparsity_search walks the keep schedule densest-first over all weights,
//    including ones already protected, and keeps the sparsest mask whose
//    validation accuracy stays >= gamma * dense,
//  - finish_task stores the mask, rebuilds the backward mask as the
//    complement of the union of stored masks, re-initialises weights outside
//    every mask, and optionally retrains inside the new mask,
//  - evaluate_task replays any stored task; results never change once the
//    task is finished,
//  - infer_task identifies the task of an unlabeled input by entropy
//    minimisation over a mixture of the stored masks, halving the candidate
//    set per round.
class ContinualState {
 public:
  ContinualState(const ContinualConfig& cfg, Rng init_rng);

  const ContinualConfig& config() const { return cfg_; }
  const Network& network() const { return net_; }
  Network& mutable_network() { return net_; }
  std::size_t tasks_seen() const { return tasks_.size(); }
  const std::vector<TaskRecord>& tasks() const { return tasks_; }
  const MaskBits& backward_free() const { return backward_free_; }

  void train_task(const Dataset& train_data, Rng& rng);

  struct SearchResult {
    double keep_fraction = 1.0;
    MaskSet mask;
    double dense_performance = 0.0;
    double sparse_performance = 0.0;
    bool warning = false;
  };
  SearchResult sparsity_search(const Dataset& validation) const;

  void finish_task(const SearchResult& found, const Dataset& retrain_data, Rng& rng);

  double evaluate_task(std::size_t task_id, const Dataset& data) const;
  Network masked_network(std::size_t task_id) const;

  InferenceResult infer_task(const Tensor& inputs) const;
  friend class InferenceEngine;

  // Fraction of maskable weights covered by at least one stored task mask.
  double protected_fraction() const;

  void save(const std::filesystem::path& dir, const nlohmann::json& meta) const;
  static ContinualState load(const std::filesystem::path& dir);

 private:
  explicit ContinualState(const ContinualConfig& cfg) : cfg_(cfg) {}

  bool layer_maskable(std::size_t l) const;
  std::size_t head_layer() const { return net_.layers.size() - 1; }
  std::vector<std::uint8_t> bias_trainable_for(std::size_t task_index) const;
  MaskSet task_mask_at(double keep_fraction) const;
  void rebuild_backward_free();
  void reinitialise_free_weights(Rng& rng);
  void retrain_within_mask(const TaskRecord& record, const MaskBits& free_old,
                           const Dataset& data, Rng& rng);

  ContinualConfig cfg_;
  Network net_;
  std::vector<TaskRecord> tasks_;
  MaskBits backward_free_;  // per layer, 1 = free to train; empty = unmaskable layer
};

// Serves many infer_task queries against a frozen state, memoizing the
// mixture networks (one per surviving candidate set) and the effective
// weights. Read-only over the state; not thread-safe itself.
class InferenceEngine {
 public:
  explicit InferenceEngine(const ContinualState& state);

  InferenceResult infer(const Tensor& inputs);

 private:
  const Network& mixture_for(const std::vector<std::size_t>& candidates);

  const ContinualState& state_;
  std::vector<Tensor> theta_;            // effective weights per maskable layer
  std::vector<Tensor> head_theta_;       // per task, per-task-heads mode only
  std::map<std::vector<std::size_t>, Network> mixtures_;
};

}  // namespace sparselab
