#pragma once

#include "sparselab/optim.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {
namespace powerprop {

// |x|^p with an explicit 0 branch. p == 0 returns exactly 1.0 so that
// alpha = 1 degenerates to the plain parameterisation bit for bit; x == 0
// with p > 0 returns exactly 0.0. Computed as exp(p*ln|x|), with multiply/
// sqrt shortcuts when 8*p is a small integer (covers every alpha the
// experiment presets use) -- same values up to a few ulp, much cheaper in
// the training loop.
double pow_abs(double x, double p);

// The sign-preserving power map psi(x) = x * |x|^(alpha-1). Odd and strictly
// monotone; alpha = 1 is the identity.
double psi(double x, double alpha);
Tensor psi(const Tensor& x, double alpha);

// Inverse map: sign(theta) * |theta|^(1/alpha). psi(psi_inverse(t)) == t up
// to roundoff, so a network initialised through it computes the same
// function as the plain network it came from.
double psi_inverse(double theta, double alpha);
Tensor psi_inverse(const Tensor& theta, double alpha);

// Chain-rule factor: upstream * alpha * |phi|^(alpha-1), elementwise. This
// is what turns a gradient w.r.t. the effective weight into the gradient
// w.r.t. the stored parameter, and what makes 0 a critical point for
// alpha > 1.
Tensor grad_scale(const Tensor& upstream, const Tensor& phi, double alpha);

// In-place variant writing into `out` (shape checked).
void grad_scale_into(const Tensor& upstream, const Tensor& phi, double alpha, Tensor& out);

// A weight tensor stored in phi-space together with its exponent.
struct PowerParam {
  Tensor phi;
  double alpha = 1.0;

  Tensor effective_weight() const { return psi(phi, alpha); }
};

PowerParam init_from_theta(const Tensor& theta, double alpha);

// The recommended composition with stateful optimizers: the optimizer sees
// the gradient w.r.t. the effective weights, as if those were the de-facto
// parameters; its step is then pulled back to phi through the grad_scale
// factor. theta_grad must be the effective-space gradient, not the phi-space
// one.
void virtual_target_step(PowerParam& param, const Tensor& theta_grad, OptimizerState& state,
                         double lr);

}  // namespace powerprop
}  // namespace sparselab
