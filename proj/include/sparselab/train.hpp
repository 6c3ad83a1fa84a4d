#pragma once

#include <cstdint>
#include <vector>

#include "sparselab/data.hpp"
#include "sparselab/nn.hpp"
#include "sparselab/optim.hpp"

namespace sparselab {

// How weight updates reach the stored parameters:
//   Baseline              plain weights, optimizer on the plain gradient
//   PowerpropNaive        optimizer applied directly to the phi-space gradient
//   PowerpropVirtualTarget optimizer on the effective-space gradient, its step
//                         pulled back to phi (the recommended composition)
enum class ParamMode { Baseline, PowerpropNaive, PowerpropVirtualTarget };

ParamMode param_mode_from_string(const std::string& name);
std::string to_string(ParamMode mode);

struct TrainOptions {
  ParamMode mode = ParamMode::Baseline;
  double alpha = 1.0;
  OptimizerConfig optimizer;
  double lr = 0.0025;
  std::size_t batch_size = 60;
};

Network make_network_for_mode(const std::vector<std::size_t>& widths, ParamMode mode,
                              double alpha);

// Owns one optimizer state per parameter tensor. Optimizer slots for
// powerprop weights live in effective space under the virtual-target mode
// and in phi space under the naive mode; the mode is fixed per trainer.
class Trainer {
 public:
  Trainer(Network& net, const TrainOptions& opts);

  // One update on the given batch; returns the batch loss. `backward_mask`
  // zeroes weight gradients at protected positions (0 = protected);
  // `bias_trainable`, when given, switches bias updates per layer.
  double step(const TaskBatch& batch, const MaskBits* backward_mask = nullptr,
              const std::vector<std::uint8_t>* bias_trainable = nullptr);

 private:
  Network& net_;
  TrainOptions opts_;
  std::vector<OptimizerState> weight_states_;
  std::vector<OptimizerState> bias_states_;
};

struct MetricRow {
  std::size_t step = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
};

// Plain supervised loop: i.i.d. batches from `train`, periodic test-set
// evaluation (always including the final step).
std::vector<MetricRow> run_supervised(Network& net, const Dataset& train, const Dataset& test,
                                      const TrainOptions& opts, std::size_t steps,
                                      std::size_t eval_interval, Rng& data_rng);

}  // namespace sparselab
