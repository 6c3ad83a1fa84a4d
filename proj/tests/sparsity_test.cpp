#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "sparselab/powerprop.hpp"
#include "sparselab/sparsity.hpp"
#include "testutil.hpp"

using namespace sparselab;

namespace {

std::vector<Tensor> effective_weights(const Network& net) {
  std::vector<Tensor> out;
  for (const Layer& layer : net.layers) out.push_back(layer.effective_weight());
  return out;
}

}  // namespace

TEST_CASE("magnitude mask closed forms") {
  const std::vector<Tensor> weights = {Tensor::row_matrix({0.1, -0.9, 0.5, 0.05})};
  const MaskSet masks = magnitude_mask(weights, 0.5, PruneScope::Layerwise, 1.0);
  CHECK(masks[0].bits == Tensor::row_matrix({0, 1, 1, 0}));

  const MaskSet all = magnitude_mask(weights, 1.0, PruneScope::Layerwise, 1.0);
  CHECK(all[0].bits == Tensor::row_matrix({1, 1, 1, 1}));

  CHECK_THROWS_AS(magnitude_mask(weights, 0.0, PruneScope::Layerwise, 1.0), ShapeError);
  CHECK_THROWS_AS(magnitude_mask(weights, 1.5, PruneScope::Layerwise, 1.0), ShapeError);
}

TEST_CASE("output layer factor halves the pruned fraction of the last tensor") {
  Rng rng(1);
  const std::vector<Tensor> weights = {sample_gaussian(rng, 10, 10, 0.0, 1.0),
                                       sample_gaussian(rng, 10, 10, 0.0, 1.0)};
  const MaskSet masks = magnitude_mask(weights, 0.2, PruneScope::Layerwise, 0.5);
  CHECK(masks[0].kept_count() == 20);   // keep 0.2
  CHECK(masks[1].kept_count() == 60);   // prune only 0.5 * 0.8
}

TEST_CASE("layerwise masks match a per-layer sort oracle") {
  Rng rng(2);
  Network net = make_mlp({7, 6, 5, 4}, Parameterisation::Plain, 1.0);
  init_glorot_gaussian(net, rng);
  for (double keep : {0.9, 0.5, 0.25, 0.1}) {
    const MaskSet masks = magnitude_mask(net, keep, PruneScope::Layerwise, 1.0);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const Tensor w = net.layers[l].effective_weight();
      const auto k = static_cast<std::size_t>(std::floor(keep * w.size()));
      // oracle: sort |w| descending, threshold at the k-th value
      std::vector<double> mags;
      for (double v : w.values()) mags.push_back(std::fabs(v));
      std::sort(mags.rbegin(), mags.rend());
      CHECK(masks[l].kept_count() == k);
      if (k > 0 && k < w.size()) {
        const double kept_min = mags[k - 1];
        for (std::size_t i = 0; i < w.size(); ++i) {
          if (std::fabs(w[i]) > kept_min) CHECK(masks[l].bits[i] == 1.0);
          if (std::fabs(w[i]) < mags[k - 1] && masks[l].bits[i] == 1.0) {
            CHECK(false);  // kept something smaller than the threshold
          }
        }
      }
    }
  }
}

TEST_CASE("masks computed from phi and from psi(phi) are identical") {
  Rng rng(3);
  Network net = make_mlp({9, 8, 7}, Parameterisation::Powerprop, 3.0);
  init_glorot_gaussian(net, rng);
  std::vector<Tensor> phi, theta;
  for (const Layer& layer : net.layers) {
    phi.push_back(layer.weight);
    theta.push_back(layer.effective_weight());
  }
  for (double keep : {0.7, 0.3, 0.05}) {
    for (PruneScope scope : {PruneScope::Layerwise, PruneScope::Global}) {
      const MaskSet from_phi = magnitude_mask(phi, keep, scope, 0.5);
      const MaskSet from_theta = magnitude_mask(theta, keep, scope, 0.5);
      for (std::size_t l = 0; l < phi.size(); ++l) {
        CHECK(from_phi[l].bits == from_theta[l].bits);
      }
    }
  }
}

TEST_CASE("apply_mask: identity, bias-only, and exact zeroing") {
  Rng rng(4);
  Network net = make_mlp({5, 4, 3}, Parameterisation::Plain, 1.0);
  init_glorot_gaussian(net, rng);
  for (Layer& layer : net.layers) {
    layer.bias = sample_gaussian(rng, layer.fan_out(), 0.0, 0.5);
  }
  const Tensor x = sample_gaussian(rng, 6, 5, 0.0, 1.0);

  const MaskSet ones = full_masks_like(effective_weights(net), 1.0);
  CHECK(forward(apply_mask(net, ones), x) == forward(net, x));

  // all-zero mask on the first layer: logits depend only on biases
  MaskSet zero_hidden = ones;
  zero_hidden[0] = Mask{Tensor::zeros_like(net.layers[0].weight)};
  const Network masked = apply_mask(net, zero_hidden);
  const Tensor a = forward(masked, x);
  const Tensor b = forward(masked, sample_gaussian(rng, 6, 5, 0.0, 1.0));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  // exactly the masked positions have effective weight zero
  MaskSet random_mask = magnitude_mask(net, 0.4, PruneScope::Layerwise, 1.0);
  const Network pruned = apply_mask(net, random_mask);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Tensor w = pruned.layers[l].effective_weight();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (random_mask[l].bits[i] == 0.0) {
        CHECK(w[i] == 0.0);
      } else {
        CHECK(w[i] == net.layers[l].effective_weight()[i]);
      }
    }
  }
}

TEST_CASE("masked evaluation equals structural deletion of hidden units") {
  Rng rng(5);
  Network net = make_mlp({4, 3, 2}, Parameterisation::Plain, 1.0);
  init_glorot_gaussian(net, rng);
  for (Layer& layer : net.layers) {
    layer.bias = sample_gaussian(rng, layer.fan_out(), 0.0, 0.5);
  }
  // delete hidden unit 1: zero column 1 of W0 and row 1 of W1
  MaskSet masks = full_masks_like(effective_weights(net), 1.0);
  for (std::size_t i = 0; i < 4; ++i) masks[0].bits(i, 1) = 0.0;
  for (std::size_t j = 0; j < 2; ++j) masks[1].bits(1, j) = 0.0;
  const Network masked = apply_mask(net, masks);

  Network shrunk = make_mlp({4, 2, 2}, Parameterisation::Plain, 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    shrunk.layers[0].weight(i, 0) = net.layers[0].weight(i, 0);
    shrunk.layers[0].weight(i, 1) = net.layers[0].weight(i, 2);
  }
  shrunk.layers[0].bias[0] = net.layers[0].bias[0];
  shrunk.layers[0].bias[1] = net.layers[0].bias[2];
  for (std::size_t j = 0; j < 2; ++j) {
    shrunk.layers[1].weight(0, j) = net.layers[1].weight(0, j);
    shrunk.layers[1].weight(1, j) = net.layers[1].weight(2, j);
  }
  shrunk.layers[1].bias = net.layers[1].bias;

  const Tensor x = sample_gaussian(rng, 20, 4, 0.0, 1.0);
  const Tensor la = forward(masked, x);
  const Tensor lb = forward(shrunk, x);
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i] == lb[i]);
}

TEST_CASE("mask overlap closed forms") {
  auto from_bits = [](std::initializer_list<double> bits) {
    return MaskSet{Mask{Tensor::row_matrix(bits)}};
  };
  const MaskSet a = from_bits({1, 0, 1, 1, 0});
  CHECK(mask_overlap(a, a) == doctest::Approx(1.0));

  const MaskSet b = from_bits({1, 1, 0, 1, 0});  // kept {0,1,3} vs {0,2,3}
  CHECK(mask_overlap(a, b) == doctest::Approx(2.0 / 3.0));
  CHECK(mask_overlap(b, a) == doctest::Approx(2.0 / 3.0));  // symmetric at equal counts

  const MaskSet c = from_bits({0, 1, 0, 0, 1});
  const MaskSet d = from_bits({1, 0, 1, 0, 0});
  CHECK(mask_overlap(c, d) == doctest::Approx(0.0));

  const MaskSet extra = from_bits({1, 1, 1, 1, 0});
  CHECK_THROWS_AS(mask_overlap(a, extra), ShapeError);
}

TEST_CASE("sparsity sweep: dense row, ordering, report count") {
  Rng rng(6);
  Network net = make_mlp({6, 5, 4}, Parameterisation::Plain, 1.0);
  init_glorot_gaussian(net, rng);
  Dataset eval;
  eval.images = sample_gaussian(rng, 30, 6, 0.0, 1.0);
  eval.labels.assign(30, 0);
  for (std::size_t i = 0; i < 30; ++i) eval.labels[i] = static_cast<int>(i % 4);
  eval.num_classes = 4;

  const std::vector<double> fractions = {1.0, 0.5, 0.1};
  const auto reports = sparsity_sweep(net, eval, fractions, PruneScope::Layerwise, 0.5);
  CHECK(reports.size() == fractions.size());
  CHECK(reports[0].accuracy == doctest::Approx(accuracy(net, eval.images, eval.labels)));
  for (std::size_t i = 0; i < reports.size(); ++i) {
    CHECK(reports[i].keep_fraction == fractions[i]);
  }
  CHECK_THROWS_AS(sparsity_sweep(net, eval, {0.1, 0.5}, PruneScope::Layerwise, 0.5),
                  ShapeError);
}

TEST_CASE("weight histogram: counts, constant weights, clamping") {
  Network net = make_mlp({3, 2}, Parameterisation::Plain, 1.0);
  for (double& v : net.layers[0].weight.values()) v = 0.7;
  const MaskSet ones = full_masks_like({net.layers[0].weight}, 1.0);
  Rng rng(7);
  WeightHistogram hist = weight_histogram(net, ones, 6, rng, 10);
  CHECK(hist.sample_size == 6);
  std::size_t total = 0, occupied = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    total += hist.kept[b] + hist.pruned[b];
    occupied += (hist.kept[b] + hist.pruned[b]) > 0 ? 1 : 0;
  }
  CHECK(total == 6);
  CHECK(occupied == 1);

  WeightHistogram clamped = weight_histogram(net, ones, 100, rng, 10);
  CHECK(clamped.clamped);
  CHECK(clamped.sample_size == 6);
}
