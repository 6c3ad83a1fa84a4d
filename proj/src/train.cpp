#include "sparselab/train.hpp"

#include <algorithm>

namespace sparselab {

ParamMode param_mode_from_string(const std::string& name) {
  if (name == "baseline") return ParamMode::Baseline;
  if (name == "powerprop-naive") return ParamMode::PowerpropNaive;
  if (name == "powerprop-virtual-target") return ParamMode::PowerpropVirtualTarget;
  throw ConfigError("unknown parameterisation mode: " + name);
}

std::string to_string(ParamMode mode) {
  switch (mode) {
    case ParamMode::Baseline: return "baseline";
    case ParamMode::PowerpropNaive: return "powerprop-naive";
    case ParamMode::PowerpropVirtualTarget: return "powerprop-virtual-target";
  }
  return "?";
}

Network make_network_for_mode(const std::vector<std::size_t>& widths, ParamMode mode,
                              double alpha) {
  const bool powerprop = mode != ParamMode::Baseline;
  return make_mlp(widths, powerprop ? Parameterisation::Powerprop : Parameterisation::Plain,
                  powerprop ? alpha : 1.0);
}

Trainer::Trainer(Network& net, const TrainOptions& opts) : net_(net), opts_(opts) {
  for (const Layer& layer : net_.layers) {
    weight_states_.emplace_back(opts_.optimizer, layer.weight);
    bias_states_.emplace_back(opts_.optimizer, layer.bias);
  }
}

double Trainer::step(const TaskBatch& batch, const MaskBits* backward_mask,
                     const std::vector<std::uint8_t>* bias_trainable) {
  LossGrads lg = loss_and_grads(net_, batch, backward_mask);
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    Layer& layer = net_.layers[l];
    if (layer.is_powerprop() && opts_.mode == ParamMode::PowerpropVirtualTarget) {
      powerprop::PowerParam param{std::move(layer.weight), layer.alpha};
      powerprop::virtual_target_step(param, lg.grads.weight_theta[l], weight_states_[l],
                                     opts_.lr);
      layer.weight = std::move(param.phi);
    } else {
      // plain layers and the naive powerprop route both feed the storage-space
      // gradient straight into the optimizer
      apply(layer.weight, lg.grads.weight[l], weight_states_[l], opts_.lr);
    }
    if (bias_trainable == nullptr || (*bias_trainable)[l] != 0) {
      apply(layer.bias, lg.grads.bias[l], bias_states_[l], opts_.lr);
    }
  }
  return lg.loss;
}

std::vector<MetricRow> run_supervised(Network& net, const Dataset& train, const Dataset& test,
                                      const TrainOptions& opts, std::size_t steps,
                                      std::size_t eval_interval, Rng& data_rng) {
  Trainer trainer(net, opts);
  std::vector<MetricRow> metrics;
  double loss = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    loss = trainer.step(sample_batch(train, opts.batch_size, data_rng));
    const bool at_eval = eval_interval != 0 && s % eval_interval == 0;
    if (at_eval || s == steps) {
      metrics.push_back({s, loss, accuracy(net, test.images, test.labels)});
    }
  }
  if (steps == 0) {
    metrics.push_back({0, 0.0, accuracy(net, test.images, test.labels)});
  }
  return metrics;
}

}  // namespace sparselab
