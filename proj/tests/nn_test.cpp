#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sparselab/nn.hpp"
#include "testutil.hpp"

using namespace sparselab;

namespace {

Network single_layer(double w, double b, Parameterisation p, double alpha) {
  Network net = make_mlp({1, 1}, p, alpha);
  net.layers[0].weight(0, 0) = w;
  net.layers[0].bias[0] = b;
  return net;
}

}  // namespace

TEST_CASE("forward closed forms") {
  // plain 1x1 layer: 3*2 + 1 = 7
  Network plain = single_layer(2.0, 1.0, Parameterisation::Plain, 1.0);
  CHECK(forward(plain, Tensor::row_matrix({3.0}))(0, 0) == doctest::Approx(7.0));

  // powerprop layer stores phi = 2 at alpha = 2: effective weight 4
  Network pp = single_layer(2.0, 0.0, Parameterisation::Powerprop, 2.0);
  CHECK(forward(pp, Tensor::row_matrix({3.0}))(0, 0) == doctest::Approx(12.0));
}

TEST_CASE("zero input through a zero-bias net: uniform softmax") {
  Rng rng(1);
  Network net = make_mlp({6, 5, 4}, Parameterisation::Plain, 1.0);
  init_glorot_gaussian(net, rng);  // biases stay zero
  const Tensor logits = forward(net, Tensor::zeros(2, 6));
  for (std::size_t c = 0; c < 4; ++c) CHECK(logits(0, c) == 0.0);
  const Tensor p = softmax_rows(logits);
  for (std::size_t c = 0; c < 4; ++c) CHECK(p(0, c) == doctest::Approx(0.25));
}

TEST_CASE("forward rejects width mismatches") {
  Network net = make_mlp({4, 3}, Parameterisation::Plain, 1.0);
  CHECK_THROWS_AS(forward(net, Tensor::zeros(1, 5)), ShapeError);
}

TEST_CASE("saturated correct prediction: loss and grads near zero") {
  Network net = single_layer(20.0, 0.0, Parameterisation::Plain, 1.0);
  // second class never wins; build a 2-way head instead
  net = make_mlp({1, 2}, Parameterisation::Plain, 1.0);
  net.layers[0].weight(0, 0) = 30.0;
  net.layers[0].weight(0, 1) = -30.0;
  TaskBatch batch{Tensor::row_matrix({1.0}), {0}};
  const LossGrads lg = loss_and_grads(net, batch);
  CHECK(lg.loss < 1e-20);
  for (const Tensor& g : lg.grads.weight) {
    for (double v : g.values()) CHECK(std::fabs(v) < 1e-20);
  }
}

TEST_CASE("gradients match central finite differences for alpha in {1,2,3}") {
  Rng rng(7);
  for (double alpha : {1.0, 2.0, 3.0}) {
    for (Parameterisation p : {Parameterisation::Plain, Parameterisation::Powerprop}) {
      auto [net, batch] = testutil::random_net_and_batch({4, 3, 2}, p, alpha, rng);
      const auto report = testutil::finite_difference_check(net, batch);
      CHECK(report.worst_rel_err < 1e-4);
    }
  }
}

TEST_CASE("powerprop gradient is exactly zero at phi = 0") {
  Network net = make_mlp({2, 3, 2}, Parameterisation::Powerprop, 2.0);
  Rng rng(8);
  init_glorot_gaussian(net, rng);
  net.layers[0].weight(0, 0) = 0.0;
  net.layers[1].weight(2, 1) = 0.0;
  TaskBatch batch{Tensor::row_matrix({0.7, -1.3}), {1}};
  const LossGrads lg = loss_and_grads(net, batch);
  CHECK(lg.grads.weight[0](0, 0) == 0.0);
  CHECK(lg.grads.weight[1](2, 1) == 0.0);
}

TEST_CASE("alpha = 1 powerprop loss/grads are bitwise equal to plain") {
  Rng rng(9);
  Network plain = make_mlp({5, 4, 3}, Parameterisation::Plain, 1.0);
  init_glorot_gaussian(plain, rng);
  Network pp = make_mlp({5, 4, 3}, Parameterisation::Powerprop, 1.0);
  Rng rng2(9);
  init_glorot_gaussian(pp, rng2);

  TaskBatch batch;
  batch.inputs = sample_gaussian(rng, 4, 5, 0.0, 1.0);
  batch.labels = {0, 2, 1, 0};
  const LossGrads a = loss_and_grads(plain, batch);
  const LossGrads b = loss_and_grads(pp, batch);
  CHECK(a.loss == b.loss);
  for (std::size_t l = 0; l < plain.layers.size(); ++l) {
    CHECK(a.grads.weight[l] == b.grads.weight[l]);
    CHECK(a.grads.bias[l] == b.grads.bias[l]);
  }
}

TEST_CASE("functional equivalence of powerprop init across alphas") {
  Rng data_rng(10);
  const Tensor inputs = sample_gaussian(data_rng, 100, 8, 0.0, 1.0);
  for (double alpha : {1.5, 2.0, 3.0, 4.0}) {
    Rng r1(11), r2(11);
    Network plain = make_mlp({8, 6, 4}, Parameterisation::Plain, 1.0);
    init_glorot_gaussian(plain, r1);
    Network pp = make_mlp({8, 6, 4}, Parameterisation::Powerprop, alpha);
    init_glorot_gaussian(pp, r2);
    CHECK(testutil::max_abs_diff(forward(plain, inputs), forward(pp, inputs)) < 1e-10);
  }
}

TEST_CASE("backward mask zeroes protected weight gradients") {
  Rng rng(12);
  auto [net, batch] =
      testutil::random_net_and_batch({4, 3, 2}, Parameterisation::Powerprop, 2.0, rng);
  MaskBits mask;
  for (const Layer& layer : net.layers) {
    Tensor bits = Tensor::zeros_like(layer.weight);
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = i % 2 == 0 ? 0.0 : 1.0;
    mask.push_back(bits);
  }
  const LossGrads lg = loss_and_grads(net, batch, &mask);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t i = 0; i < mask[l].size(); ++i) {
      if (mask[l][i] == 0.0) {
        CHECK(lg.grads.weight[l][i] == 0.0);
        CHECK(lg.grads.weight_theta[l][i] == 0.0);
      }
    }
  }
}

TEST_CASE("accuracy breaks argmax ties toward the lower class index") {
  Network net = make_mlp({1, 2}, Parameterisation::Plain, 1.0);  // all logits zero
  const Tensor x = Tensor::zeros(3, 1);
  CHECK(accuracy(net, x, {0, 0, 0}) == doctest::Approx(1.0));
  CHECK(accuracy(net, x, {1, 1, 1}) == doctest::Approx(0.0));
}

TEST_CASE("loss_and_grads rejects empty batches and bad labels") {
  Network net = make_mlp({2, 2}, Parameterisation::Plain, 1.0);
  TaskBatch empty{Tensor::zeros(0, 2), {}};
  CHECK_THROWS_AS(loss_and_grads(net, empty), ShapeError);
  TaskBatch bad{Tensor::zeros(1, 2), {7}};
  CHECK_THROWS_AS(loss_and_grads(net, bad), ShapeError);
}
