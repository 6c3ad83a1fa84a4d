#pragma once

#include <cstddef>
#include <vector>

#include "sparselab/powerprop.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {

enum class Activation { Relu, Identity };
enum class Parameterisation { Plain, Powerprop };

// One dense layer. `weight` holds the stored parameter: the effective weight
// itself for plain layers, phi for powerprop layers. Biases are always plain.
struct Layer {
  Tensor weight;  // [fan_in x fan_out]
  Tensor bias;    // [fan_out]
  Activation activation = Activation::Relu;
  Parameterisation parameterisation = Parameterisation::Plain;
  double alpha = 1.0;

  std::size_t fan_in() const { return weight.rows(); }
  std::size_t fan_out() const { return weight.cols(); }
  bool is_powerprop() const { return parameterisation == Parameterisation::Powerprop; }
  Tensor effective_weight() const;
};

struct Network {
  std::vector<Layer> layers;

  std::size_t input_size() const { return layers.front().fan_in(); }
  std::size_t output_size() const { return layers.back().fan_out(); }
  void validate() const;
};

// MLP with ReLU hidden layers and an identity output layer; softmax
// cross-entropy is applied by the loss functions below.
Network make_mlp(const std::vector<std::size_t>& widths, Parameterisation parameterisation,
                 double alpha);

// Gaussian Glorot draws, std = sqrt(2 / (fan_in + fan_out)), biases zero.
// Powerprop layers store psi_inverse(theta) so the initialised network
// computes exactly the same function as its plain counterpart.
void init_glorot_gaussian(Network& net, Rng& rng);

struct TaskBatch {
  Tensor inputs;            // [batch x input_size]
  std::vector<int> labels;  // global class ids
  int task = 0;
};

struct ForwardTrace {
  std::vector<Tensor> inputs;   // inputs[l] feeds layer l; inputs[0] is x
  std::vector<Tensor> preacts;  // preacts[l] = inputs[l] * W_eff[l] + b[l]
  Tensor output;                // activation of the last layer
};

Tensor forward(const Network& net, const Tensor& x);
ForwardTrace forward_trace(const Network& net, const Tensor& x);

struct Gradients {
  std::vector<Tensor> weight;        // storage space (phi-space for powerprop layers)
  std::vector<Tensor> weight_theta;  // effective space
  std::vector<Tensor> bias;
};

// Backpropagate an arbitrary gradient w.r.t. the output-layer preactivations
// (networks here end in an identity activation, so that is the gradient
// w.r.t. the logits). Used by both the cross-entropy loss and the entropy
// objective of task inference.
Gradients backward_from_logit_grad(const Network& net, const ForwardTrace& trace,
                                   const Tensor& dlogits);

// Per-layer 0/1 tensors aligned with the weight shapes; an empty tensor
// leaves that layer unmasked. Convention: 1 = free, 0 = protected.
using MaskBits = std::vector<Tensor>;

struct LossGrads {
  double loss = 0.0;
  Gradients grads;
};

// Mean softmax cross-entropy over the batch plus gradients for every
// parameter. Gradients come back in the storage space of each parameter
// (already through the chain-rule factor for powerprop layers) and, when a
// backward mask is given, zeroed at protected weight positions in both
// spaces.
LossGrads loss_and_grads(const Network& net, const TaskBatch& batch,
                         const MaskBits* backward_mask = nullptr);

// Loss only (used by finite-difference checks and validation curves).
double softmax_xent(const Network& net, const TaskBatch& batch);

Tensor softmax_rows(const Tensor& logits);

// Fraction of rows whose argmax logit matches the label; argmax ties go to
// the lowest class index. Evaluates in fixed-size chunks, accumulating in
// index order, so results are deterministic.
double accuracy(const Network& net, const Tensor& inputs, const std::vector<int>& labels);

std::vector<int> predict(const Network& net, const Tensor& inputs);

}  // namespace sparselab
