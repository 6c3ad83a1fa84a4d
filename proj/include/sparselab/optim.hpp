#pragma once

#include <cstdint>

#include "sparselab/tensor.hpp"

namespace sparselab {

enum class OptimKind { Sgd, Momentum, Nesterov, Adam };

struct OptimizerConfig {
  OptimKind kind = OptimKind::Sgd;
  double momentum = 0.9;   // momentum / nesterov
  double beta1 = 0.9;      // adam
  double beta2 = 0.999;    // adam
  double eps = 1e-8;       // adam
};

// Slots for one parameter tensor. transform() turns a raw gradient into the
// descent direction the optimizer would take, before learning-rate scaling:
//   sgd:       g
//   momentum:  v <- mu*v + g, step = v
//   nesterov:  v <- mu*v + g, step = g + mu*v
//   adam:      step = m_hat / (sqrt(v_hat) + eps), bias-corrected
// A gradient that is always zero leaves every slot at its initial zero, so
// the returned step is zero too; mask-protected weights therefore never move
// under any of these optimizers.
class OptimizerState {
 public:
  OptimizerState() = default;
  OptimizerState(const OptimizerConfig& cfg, const Tensor& shaped_like);

  Tensor transform(const Tensor& grad);
  std::int64_t step_count() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  Tensor slot1_;  // velocity / first moment
  Tensor slot2_;  // second moment (adam only)
  std::int64_t t_ = 0;
};

// param <- param - lr * step
void apply_step(Tensor& param, const Tensor& step, double lr);

// Convenience: one full update, param <- param - lr * transform(grad).
void apply(Tensor& param, const Tensor& grad, OptimizerState& state, double lr);

}  // namespace sparselab
