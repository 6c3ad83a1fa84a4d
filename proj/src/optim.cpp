#include "sparselab/optim.hpp"

#include <cmath>

namespace sparselab {

OptimizerState::OptimizerState(const OptimizerConfig& cfg, const Tensor& shaped_like)
    : cfg_(cfg) {
  if (cfg_.kind != OptimKind::Sgd) slot1_ = Tensor::zeros_like(shaped_like);
  if (cfg_.kind == OptimKind::Adam) slot2_ = Tensor::zeros_like(shaped_like);
}

Tensor OptimizerState::transform(const Tensor& grad) {
  require_finite(grad, "optimizer gradient");
  if (cfg_.kind != OptimKind::Sgd && !slot1_.same_shape(grad)) {
    throw ShapeError("OptimizerState::transform: slot/gradient shape mismatch");
  }
  ++t_;
  switch (cfg_.kind) {
    case OptimKind::Sgd:
      return grad;
    case OptimKind::Momentum: {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        slot1_[i] = cfg_.momentum * slot1_[i] + grad[i];
      }
      return slot1_;
    }
    case OptimKind::Nesterov: {
      Tensor step = Tensor::zeros_like(grad);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        slot1_[i] = cfg_.momentum * slot1_[i] + grad[i];
        step[i] = grad[i] + cfg_.momentum * slot1_[i];
      }
      return step;
    }
    case OptimKind::Adam: {
      const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      Tensor step = Tensor::zeros_like(grad);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = grad[i];
        slot1_[i] = cfg_.beta1 * slot1_[i] + (1.0 - cfg_.beta1) * g;
        slot2_[i] = cfg_.beta2 * slot2_[i] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = slot1_[i] / c1;
        const double v_hat = slot2_[i] / c2;
        step[i] = m_hat / (std::sqrt(v_hat) + cfg_.eps);
      }
      return step;
    }
  }
  throw Error("OptimizerState::transform: unknown kind");
}

void apply_step(Tensor& param, const Tensor& step, double lr) {
  if (!param.same_shape(step)) throw ShapeError("apply_step: shape mismatch");
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * step[i];
}

void apply(Tensor& param, const Tensor& grad, OptimizerState& state, double lr) {
  apply_step(param, state.transform(grad), lr);
}

}  // namespace sparselab
