#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sparselab/nn.hpp"
#include "sparselab/powerprop.hpp"
#include "testutil.hpp"

using namespace sparselab;
using namespace sparselab::powerprop;

TEST_CASE("psi closed forms and sign preservation") {
  CHECK(psi(-3.0, 1.0) == -3.0);
  CHECK(psi(-2.0, 2.0) == doctest::Approx(-4.0));
  CHECK(psi(1.5, 2.0) == doctest::Approx(2.25));
  CHECK(psi(0.0, 2.0) == 0.0);

  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.next_gaussian();
    const double alpha = 1.0 + 4.0 * rng.next_double();
    CHECK(std::signbit(psi(x, alpha)) == std::signbit(x));
  }
}

TEST_CASE("psi is odd and strictly monotone") {
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double alpha = 1.0 + 4.0 * rng.next_double();
    const double x = 3.0 * rng.next_gaussian();
    CHECK(psi(-x, alpha) == doctest::Approx(-psi(x, alpha)));
    const double y = x + 0.01 + rng.next_double();
    CHECK(psi(x, alpha) < psi(y, alpha));
  }
}

TEST_CASE("alpha = 1 is the identity, bit for bit") {
  Rng rng(5);
  const Tensor x = sample_gaussian(rng, 13, 7, 0.0, 2.0);
  CHECK(psi(x, 1.0) == x);
  const Tensor g = sample_gaussian(rng, 13, 7, 0.0, 2.0);
  CHECK(grad_scale(g, x, 1.0) == g);
}

TEST_CASE("init_from_theta closed forms and roundtrip") {
  CHECK(psi_inverse(-8.0, 3.0) == doctest::Approx(-2.0));
  CHECK(psi_inverse(0.0, 4.0) == 0.0);

  Rng rng(6);
  const double std = std::sqrt(2.0 / (784.0 + 300.0));
  const Tensor theta = sample_gaussian(rng, 40, 40, 0.0, std);
  const PowerParam param = init_from_theta(theta, 2.0);
  CHECK(testutil::max_abs_diff(param.effective_weight(), theta) < 1e-12);
}

TEST_CASE("grad_scale closed forms and the critical point at zero") {
  const Tensor up = Tensor::vector({2.0, -1.0, 0.5});
  const Tensor phi = Tensor::vector({0.5, 0.5, 0.5});
  const Tensor scaled = grad_scale(up, phi, 3.0);
  for (std::size_t i = 0; i < up.size(); ++i) {
    CHECK(scaled[i] == doctest::Approx(0.75 * up[i]));
  }

  const Tensor at_zero = grad_scale(Tensor::vector({123.0}), Tensor::vector({0.0}), 2.0);
  CHECK(at_zero[0] == 0.0);
}

TEST_CASE("grad_scale magnitude is non-decreasing in |phi|") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const double alpha = 1.0 + 4.0 * rng.next_double();
    const double up = rng.next_gaussian();
    double a = std::fabs(rng.next_gaussian()), b = std::fabs(rng.next_gaussian());
    if (a > b) std::swap(a, b);
    const Tensor ga = grad_scale(Tensor::vector({up}), Tensor::vector({a}), alpha);
    const Tensor gb = grad_scale(Tensor::vector({up}), Tensor::vector({b}), alpha);
    CHECK(std::fabs(ga[0]) <= std::fabs(gb[0]));
  }
}

TEST_CASE("pow_abs fast path agrees with the exp/log form") {
  Rng rng(8);
  for (double p : {0.125, 0.375, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
    for (int i = 0; i < 100; ++i) {
      const double x = 4.0 * rng.next_gaussian();
      if (x == 0.0) continue;
      const double expected = std::exp(p * std::log(std::fabs(x)));
      CHECK(pow_abs(x, p) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  CHECK(pow_abs(0.0, 0.0) == 1.0);
  CHECK(pow_abs(5.0, 0.0) == 1.0);
  CHECK(pow_abs(0.0, 1.5) == 0.0);
}

TEST_CASE("virtual target step with sgd equals the scaled raw gradient") {
  Rng rng(9);
  const Tensor phi0 = sample_gaussian(rng, 6, 6, 0.0, 1.0);
  const Tensor theta_grad = sample_gaussian(rng, 6, 6, 0.0, 1.0);
  const double alpha = 2.5, lr = 0.1;

  PowerParam param{phi0, alpha};
  OptimizerState sgd(OptimizerConfig{OptimKind::Sgd}, phi0);
  virtual_target_step(param, theta_grad, sgd, lr);

  const Tensor expected_step = grad_scale(theta_grad, phi0, alpha);
  for (std::size_t i = 0; i < phi0.size(); ++i) {
    CHECK(param.phi[i] == doctest::Approx(phi0[i] - lr * expected_step[i]));
  }
}

TEST_CASE("virtual target step with alpha=1 equals the optimizer applied directly") {
  Rng rng(10);
  const Tensor phi0 = sample_gaussian(rng, 4, 4, 0.0, 1.0);
  OptimizerConfig adam{OptimKind::Adam};

  PowerParam param{phi0, 1.0};
  OptimizerState s1(adam, phi0);
  Tensor direct = phi0;
  OptimizerState s2(adam, phi0);
  for (int step = 0; step < 5; ++step) {
    const Tensor g = sample_gaussian(rng, 4, 4, 0.0, 1.0);
    virtual_target_step(param, g, s1, 0.01);
    apply(direct, g, s2, 0.01);
  }
  CHECK(param.phi == direct);
}

TEST_CASE("descent: virtual-target steps correlate positively with the raw gradient") {
  Rng rng(11);
  for (OptimKind kind : {OptimKind::Adam, OptimKind::Momentum}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto [net, batch] = testutil::random_live_net_and_batch(
          {4, 3, 2}, Parameterisation::Powerprop, 1.0 + 2.0 * rng.next_double(), rng);
      const LossGrads lg = loss_and_grads(net, batch);
      double inner = 0.0;
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        OptimizerState state(OptimizerConfig{kind}, net.layers[l].weight);
        PowerParam param{net.layers[l].weight, net.layers[l].alpha};
        const Tensor phi_before = param.phi;
        virtual_target_step(param, lg.grads.weight_theta[l], state, 1.0);
        for (std::size_t i = 0; i < phi_before.size(); ++i) {
          const double delta = phi_before[i] - param.phi[i];  // lr=1 step direction
          inner += delta * lg.grads.weight[l][i];
        }
      }
      CHECK(inner > 0.0);
    }
  }
}

TEST_CASE("sign persistence: small virtual-target sgd steps never flip phi") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const double alpha = 1.0 + 3.0 * rng.next_double();
    Tensor phi = sample_gaussian(rng, 10, 0.0, 1.0);
    for (double& v : phi.values()) {
      if (std::fabs(v) < 1e-3) v = 1e-3;  // keep magnitudes workable
    }
    const Tensor g = sample_gaussian(rng, 10, 0.0, 1.0);
    PowerParam param{phi, alpha};
    OptimizerState sgd(OptimizerConfig{OptimKind::Sgd}, phi);
    // choose lr so every |delta phi_i| < |phi_i|
    const Tensor step = grad_scale(g, phi, alpha);
    double lr = 1e9;
    for (std::size_t i = 0; i < phi.size(); ++i) {
      if (step[i] != 0.0) lr = std::min(lr, 0.5 * std::fabs(phi[i] / step[i]));
    }
    virtual_target_step(param, g, sgd, lr);
    for (std::size_t i = 0; i < phi.size(); ++i) {
      CHECK(std::signbit(param.phi[i]) == std::signbit(phi[i]));
    }
  }
}
