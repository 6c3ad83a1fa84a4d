#pragma once

#include <cstddef>
#include <vector>

#include "sparselab/data.hpp"
#include "sparselab/nn.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {

// Binary mask aligned with one weight tensor; 1 = kept/active, 0 = pruned.
struct Mask {
  Tensor bits;

  std::size_t kept_count() const;
  double density() const;
};

// One mask per network layer, in layer order.
using MaskSet = std::vector<Mask>;

enum class PruneScope { Layerwise, Global };

// Magnitude pruning over effective (theta-space) weights. Layerwise keeps
// floor(keep_fraction * size) per layer, except the last tensor whose
// *pruned* fraction is scaled by output_layer_factor (0.5 = half as much
// pruning). Global pools all weights into a single top-k and ignores the
// output factor. Biases are never masked.
MaskSet magnitude_mask(const std::vector<Tensor>& weights, double keep_fraction,
                       PruneScope scope, double output_layer_factor = 1.0);
MaskSet magnitude_mask(const Network& net, double keep_fraction, PruneScope scope,
                       double output_layer_factor = 1.0);

// Masked copy: stored weights multiplied by the bits (psi(0) = 0, so masking
// phi and masking theta agree); the input network is untouched. An empty
// bits tensor leaves that layer dense.
Network apply_mask(const Network& net, const MaskSet& masks);

double mask_density(const MaskSet& masks);
MaskSet mask_union(const MaskSet& a, const MaskSet& b);
MaskSet mask_complement(const MaskSet& a);
MaskSet full_masks_like(const std::vector<Tensor>& weights, double value);

// |kept(a) & kept(b)| / |kept(a)| pooled over all layers. Both mask sets
// must cover the same shapes with the same kept counts.
double mask_overlap(const MaskSet& a, const MaskSet& b);
std::vector<double> mask_overlap_per_layer(const MaskSet& a, const MaskSet& b);

struct SparsityReport {
  double keep_fraction = 1.0;
  double accuracy = 0.0;
  std::vector<double> layer_density;
};

// One-shot sweep: for each keep fraction (sorted descending) recompute a
// fresh mask from the same trained weights, evaluate, report. No retraining.
std::vector<SparsityReport> sparsity_sweep(const Network& net, const Dataset& eval_set,
                                           const std::vector<double>& keep_fractions,
                                           PruneScope scope, double output_layer_factor = 1.0);

struct WeightHistogram {
  std::vector<double> edges;          // bins+1 edges over the sampled range
  std::vector<std::size_t> kept;      // counts for weights the mask keeps
  std::vector<std::size_t> pruned;    // counts for weights the mask prunes
  std::size_t sample_size = 0;
  bool clamped = false;               // sample_size exceeded the weight count
};

// Histogram of effective weights sampled without replacement, split by
// whether the given mask keeps them.
WeightHistogram weight_histogram(const Network& net, const MaskSet& survived,
                                 std::size_t sample_size, Rng& rng, std::size_t bins = 100);

}  // namespace sparselab
