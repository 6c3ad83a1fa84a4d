#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sparselab/optim.hpp"

using namespace sparselab;

TEST_CASE("sgd transform is the identity") {
  Rng rng(1);
  const Tensor g = sample_gaussian(rng, 5, 5, 0.0, 1.0);
  OptimizerState state(OptimizerConfig{OptimKind::Sgd}, g);
  CHECK(state.transform(g) == g);
  CHECK(state.step_count() == 1);
}

TEST_CASE("momentum recursion: two constant-gradient steps give 1.9 g") {
  OptimizerConfig cfg{OptimKind::Momentum};
  cfg.momentum = 0.9;
  const Tensor g = Tensor::vector({1.0, -2.0});
  OptimizerState state(cfg, g);
  CHECK(state.transform(g) == g);
  const Tensor second = state.transform(g);
  CHECK(second[0] == doctest::Approx(1.9));
  CHECK(second[1] == doctest::Approx(-3.8));
}

TEST_CASE("momentum with mu=0 equals sgd bitwise") {
  Rng rng(2);
  OptimizerConfig cfg{OptimKind::Momentum};
  cfg.momentum = 0.0;
  Tensor p1 = sample_gaussian(rng, 4, 4, 0.0, 1.0);
  Tensor p2 = p1;
  OptimizerState momentum(cfg, p1), sgd(OptimizerConfig{OptimKind::Sgd}, p2);
  for (int i = 0; i < 10; ++i) {
    const Tensor g = sample_gaussian(rng, 4, 4, 0.0, 1.0);
    apply(p1, g, momentum, 0.05);
    apply(p2, g, sgd, 0.05);
  }
  CHECK(p1 == p2);
}

TEST_CASE("adam first step is approximately sign(g)") {
  Rng rng(3);
  Tensor g = sample_gaussian(rng, 50, 0.0, 3.0);
  for (double& v : g.values()) {
    if (v == 0.0) v = 0.5;
  }
  OptimizerState state(OptimizerConfig{OptimKind::Adam}, g);
  const Tensor step = state.transform(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::fabs(1.0 - std::fabs(step[i])) < 1e-6);
    CHECK(std::signbit(step[i]) == std::signbit(g[i]));
  }
}

TEST_CASE("adam converges to unit-magnitude steps on a constant gradient") {
  const Tensor g = Tensor::vector({0.3, -7.0, 0.001});
  OptimizerState state(OptimizerConfig{OptimKind::Adam}, g);
  Tensor step;
  for (int i = 0; i < 2000; ++i) step = state.transform(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::fabs(step[i]) == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("permanently masked positions keep zero slots and zero steps") {
  for (OptimKind kind : {OptimKind::Momentum, OptimKind::Nesterov, OptimKind::Adam}) {
    Tensor p = Tensor::vector({1.0, 2.0, 3.0});
    const Tensor saved = p;
    OptimizerState state(OptimizerConfig{kind}, p);
    for (int i = 0; i < 25; ++i) {
      Tensor g = Tensor::vector({0.5, 0.0, -0.25});  // position 1 masked upstream
      g[1] = 0.0;
      apply(p, g, state, 0.1);
      CHECK(p[1] == saved[1]);  // bitwise untouched
    }
  }
}

TEST_CASE("apply with lr=0 leaves parameters unchanged") {
  Rng rng(4);
  Tensor p = sample_gaussian(rng, 6, 0.0, 1.0);
  const Tensor saved = p;
  OptimizerState state(OptimizerConfig{OptimKind::Adam}, p);
  apply(p, sample_gaussian(rng, 6, 0.0, 1.0), state, 0.0);
  CHECK(p == saved);
}

TEST_CASE("sgd on a quadratic bowl decays geometrically") {
  Tensor w = Tensor::vector({1.0, 1.0, 1.0});
  OptimizerState state(OptimizerConfig{OptimKind::Sgd}, w);
  for (int i = 0; i < 100; ++i) {
    Tensor g = w;  // f(w) = 0.5 ||w||^2
    apply(w, g, state, 0.1);
  }
  for (double v : w.values()) CHECK(std::fabs(v) < 1e-4);
  // f(w) = ||w||^2 with lr 0.1 contracts by 0.8 per step
  Tensor w2 = Tensor::vector({1.0});
  OptimizerState s2(OptimizerConfig{OptimKind::Sgd}, w2);
  for (int i = 0; i < 100; ++i) {
    Tensor g = w2;
    for (double& v : g.values()) v *= 2.0;
    apply(w2, g, s2, 0.1);
  }
  CHECK(std::fabs(w2[0]) < 1e-8);
  CHECK(w2[0] == doctest::Approx(std::pow(0.8, 100)).epsilon(1e-9));
}

TEST_CASE("nesterov lookahead step") {
  OptimizerConfig cfg{OptimKind::Nesterov};
  cfg.momentum = 0.9;
  const Tensor g = Tensor::vector({1.0});
  OptimizerState state(cfg, g);
  // v1 = g, step1 = g + 0.9 v1 = 1.9 g
  CHECK(state.transform(g)[0] == doctest::Approx(1.9));
  // v2 = 0.9 + 1 = 1.9, step2 = 1 + 0.9*1.9 = 2.71
  CHECK(state.transform(g)[0] == doctest::Approx(2.71));
}

TEST_CASE("non-finite gradients are rejected") {
  Tensor g = Tensor::vector({1.0, std::nan("")});
  OptimizerState state(OptimizerConfig{OptimKind::Sgd}, g);
  CHECK_THROWS_AS(state.transform(g), NumericalError);
}
