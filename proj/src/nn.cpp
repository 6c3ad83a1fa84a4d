#include "sparselab/nn.hpp"

#include <algorithm>
#include <cmath>

namespace sparselab {

Tensor Layer::effective_weight() const {
  return is_powerprop() ? powerprop::psi(weight, alpha) : weight;
}

void Network::validate() const {
  if (layers.empty()) throw ShapeError("Network: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (!layer.weight.is_matrix()) throw ShapeError("Network: weight must be rank 2");
    if (layer.bias.size() != layer.fan_out()) throw ShapeError("Network: bias/fan_out mismatch");
    if (l + 1 < layers.size() && layers[l + 1].fan_in() != layer.fan_out()) {
      throw ShapeError("Network: adjacent layer extents do not chain");
    }
    if (layer.is_powerprop() && layer.alpha < 1.0) {
      throw ShapeError("Network: powerprop alpha must be >= 1");
    }
  }
}

Network make_mlp(const std::vector<std::size_t>& widths, Parameterisation parameterisation,
                 double alpha) {
  if (widths.size() < 2) throw ShapeError("make_mlp: need at least input and output widths");
  Network net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Layer layer;
    layer.weight = Tensor::zeros(widths[l], widths[l + 1]);
    layer.bias = Tensor::zeros(widths[l + 1]);
    layer.activation = (l + 2 == widths.size()) ? Activation::Identity : Activation::Relu;
    layer.parameterisation = parameterisation;
    layer.alpha = parameterisation == Parameterisation::Powerprop ? alpha : 1.0;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

void init_glorot_gaussian(Network& net, Rng& rng) {
  for (Layer& layer : net.layers) {
    const double std = std::sqrt(2.0 / static_cast<double>(layer.fan_in() + layer.fan_out()));
    Tensor theta = sample_gaussian(rng, layer.fan_in(), layer.fan_out(), 0.0, std);
    layer.weight = layer.is_powerprop() ? powerprop::psi_inverse(theta, layer.alpha)
                                        : std::move(theta);
    layer.bias = Tensor::zeros(layer.fan_out());
  }
}

namespace {

void apply_activation_inplace(Tensor& t, Activation act) {
  if (act == Activation::Relu) {
    for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  }
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& bias) {
  Tensor z = matmul(x, w);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += bias[j];
  }
  return z;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x) {
  if (x.cols() != net.input_size()) throw ShapeError("forward: input width mismatch");
  Tensor a = x;
  for (const Layer& layer : net.layers) {
    Tensor z = affine(a, layer.effective_weight(), layer.bias);
    require_finite(z, "layer preactivation");
    apply_activation_inplace(z, layer.activation);
    a = std::move(z);
  }
  return a;
}

ForwardTrace forward_trace(const Network& net, const Tensor& x) {
  if (x.cols() != net.input_size()) throw ShapeError("forward: input width mismatch");
  ForwardTrace trace;
  Tensor a = x;
  for (const Layer& layer : net.layers) {
    trace.inputs.push_back(a);
    Tensor z = affine(a, layer.effective_weight(), layer.bias);
    require_finite(z, "layer preactivation");
    trace.preacts.push_back(z);
    apply_activation_inplace(z, layer.activation);
    a = std::move(z);
  }
  trace.output = std::move(a);
  return trace;
}

Gradients backward_from_logit_grad(const Network& net, const ForwardTrace& trace,
                                   const Tensor& dlogits) {
  const std::size_t L = net.layers.size();
  Gradients grads;
  grads.weight.resize(L);
  grads.weight_theta.resize(L);
  grads.bias.resize(L);
  Tensor delta = dlogits;  // gradient w.r.t. preacts of the current layer
  for (std::size_t l = L; l-- > 0;) {
    const Layer& layer = net.layers[l];
    Tensor w_eff = layer.effective_weight();
    grads.weight_theta[l] = matmul(transpose(trace.inputs[l]), delta);
    grads.bias[l] = column_sums(delta);
    grads.weight[l] = layer.is_powerprop()
                          ? powerprop::grad_scale(grads.weight_theta[l], layer.weight, layer.alpha)
                          : grads.weight_theta[l];
    if (l > 0) {
      Tensor dinput = matmul(delta, transpose(w_eff));
      const Layer& prev = net.layers[l - 1];
      if (prev.activation == Activation::Relu) {
        const Tensor& z = trace.preacts[l - 1];
        for (std::size_t i = 0; i < dinput.size(); ++i) {
          // relu subgradient at 0 is defined as 0
          if (z[i] <= 0.0) dinput[i] = 0.0;
        }
      }
      delta = std::move(dinput);
    }
  }
  return grads;
}

namespace {

// Row-wise log-softmax statistics; returns mean cross-entropy and fills
// dlogits with (softmax - onehot) / batch when requested.
double xent_core(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
  const std::size_t batch = logits.rows(), classes = logits.cols();
  if (labels.size() != batch) throw ShapeError("cross-entropy: label count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ShapeError("cross-entropy: label out of range");
    }
    double max_logit = logits(i, 0);
    for (std::size_t c = 1; c < classes; ++c) max_logit = std::max(max_logit, logits(i, c));
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum_exp += std::exp(logits(i, c) - max_logit);
    const double lse = max_logit + std::log(sum_exp);
    total += lse - logits(i, static_cast<std::size_t>(label));
    if (dlogits != nullptr) {
      for (std::size_t c = 0; c < classes; ++c) {
        double p = std::exp(logits(i, c) - lse);
        if (c == static_cast<std::size_t>(label)) p -= 1.0;
        (*dlogits)(i, c) = p / static_cast<double>(batch);
      }
    }
  }
  const double loss = total / static_cast<double>(batch);
  if (!std::isfinite(loss)) throw NumericalError("non-finite cross-entropy loss");
  return loss;
}

}  // namespace

LossGrads loss_and_grads(const Network& net, const TaskBatch& batch,
                         const MaskBits* backward_mask) {
  if (batch.labels.empty()) throw ShapeError("loss_and_grads: empty batch");
  ForwardTrace trace = forward_trace(net, batch.inputs);
  Tensor dlogits = Tensor::zeros_like(trace.preacts.back());
  LossGrads out;
  out.loss = xent_core(trace.preacts.back(), batch.labels, &dlogits);
  out.grads = backward_from_logit_grad(net, trace, dlogits);
  if (backward_mask != nullptr) {
    if (backward_mask->size() != net.layers.size()) {
      throw ShapeError("loss_and_grads: backward mask layer count mismatch");
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const Tensor& bits = (*backward_mask)[l];
      if (bits.size() == 0) continue;
      if (!bits.same_shape(out.grads.weight[l])) {
        throw ShapeError("loss_and_grads: backward mask shape mismatch");
      }
      for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == 0.0) {
          out.grads.weight[l][i] = 0.0;
          out.grads.weight_theta[l][i] = 0.0;
        }
      }
    }
  }
  return out;
}

double softmax_xent(const Network& net, const TaskBatch& batch) {
  if (batch.labels.empty()) throw ShapeError("softmax_xent: empty batch");
  Tensor logits = forward(net, batch.inputs);
  return xent_core(logits, batch.labels, nullptr);
}

Tensor softmax_rows(const Tensor& logits) {
  Tensor p = Tensor::zeros_like(logits);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double max_logit = logits(i, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) max_logit = std::max(max_logit, logits(i, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      p(i, c) = std::exp(logits(i, c) - max_logit);
      sum += p(i, c);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) p(i, c) /= sum;
  }
  return p;
}

namespace {

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  Tensor out = Tensor::zeros(end - begin, t.cols());
  std::copy(t.data() + begin * t.cols(), t.data() + end * t.cols(), out.data());
  return out;
}

}  // namespace

std::vector<int> predict(const Network& net, const Tensor& inputs) {
  constexpr std::size_t kChunk = 512;
  std::vector<int> out;
  out.reserve(inputs.rows());
  for (std::size_t begin = 0; begin < inputs.rows(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, inputs.rows());
    Tensor logits = forward(net, slice_rows(inputs, begin, end));
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c) {
        if (logits(i, c) > logits(i, best)) best = c;
      }
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

double accuracy(const Network& net, const Tensor& inputs, const std::vector<int>& labels) {
  if (inputs.rows() != labels.size()) throw ShapeError("accuracy: label count mismatch");
  if (labels.empty()) throw ShapeError("accuracy: empty evaluation set");
  std::vector<int> predicted = predict(net, inputs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predicted[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace sparselab
