#include "sparselab/powerprop.hpp"

#include <cmath>

namespace sparselab {
namespace powerprop {

namespace {

double powi(double base, int e) {
  double result = 1.0;
  while (e > 0) {
    if (e & 1) result *= base;
    base *= base;
    e >>= 1;
  }
  return result;
}

}  // namespace

double pow_abs(double x, double p) {
  if (p == 0.0) return 1.0;
  const double ax = std::fabs(x);
  if (ax == 0.0) return 0.0;
  // Fast path for p = m/8 with small integer m: |x|^(m/8) = sqrt^3(|x|^m).
  const double m8 = p * 8.0;
  const int m = static_cast<int>(m8);
  if (m8 == static_cast<double>(m) && m > 0 && m <= 64) {
    return std::sqrt(std::sqrt(std::sqrt(powi(ax, m))));
  }
  return std::exp(p * std::log(ax));
}

double psi(double x, double alpha) { return x * pow_abs(x, alpha - 1.0); }

Tensor psi(const Tensor& x, double alpha) {
  if (alpha < 1.0) throw ShapeError("psi: alpha must be >= 1");
  Tensor out = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = psi(x[i], alpha);
  return out;
}

double psi_inverse(double theta, double alpha) {
  if (alpha == 1.0) return theta;  // exact identity, not exp(log x)
  if (theta == 0.0) return 0.0;
  return std::copysign(std::exp(std::log(std::fabs(theta)) / alpha), theta);
}

Tensor psi_inverse(const Tensor& theta, double alpha) {
  if (alpha < 1.0) throw ShapeError("psi_inverse: alpha must be >= 1");
  Tensor out = Tensor::zeros_like(theta);
  for (std::size_t i = 0; i < theta.size(); ++i) out[i] = psi_inverse(theta[i], alpha);
  return out;
}

Tensor grad_scale(const Tensor& upstream, const Tensor& phi, double alpha) {
  Tensor out = Tensor::zeros_like(upstream);
  grad_scale_into(upstream, phi, alpha, out);
  return out;
}

void grad_scale_into(const Tensor& upstream, const Tensor& phi, double alpha, Tensor& out) {
  if (!upstream.same_shape(phi) || !upstream.same_shape(out)) {
    throw ShapeError("grad_scale: shape mismatch");
  }
  const double p = alpha - 1.0;
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    out[i] = upstream[i] * (alpha * pow_abs(phi[i], p));
  }
}

PowerParam init_from_theta(const Tensor& theta, double alpha) {
  return PowerParam{psi_inverse(theta, alpha), alpha};
}

void virtual_target_step(PowerParam& param, const Tensor& theta_grad, OptimizerState& state,
                         double lr) {
  Tensor step = state.transform(theta_grad);
  grad_scale_into(step, param.phi, param.alpha, step);
  apply_step(param.phi, step, lr);
}

}  // namespace powerprop
}  // namespace sparselab
