#include "sparselab/sparsity.hpp"

#include <algorithm>
#include <cmath>

namespace sparselab {

std::size_t Mask::kept_count() const {
  std::size_t n = 0;
  for (double b : bits.values()) n += b != 0.0 ? 1 : 0;
  return n;
}

double Mask::density() const {
  if (bits.size() == 0) return 1.0;
  return static_cast<double>(kept_count()) / static_cast<double>(bits.size());
}

namespace {

Mask mask_from_topk(const Tensor& weights, std::size_t k) {
  Mask m{Tensor::zeros_like(weights)};
  for (std::size_t idx : topk_indices_by_magnitude(weights, k)) m.bits[idx] = 1.0;
  return m;
}

}  // namespace

MaskSet magnitude_mask(const std::vector<Tensor>& weights, double keep_fraction,
                       PruneScope scope, double output_layer_factor) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ShapeError("magnitude_mask: keep_fraction must be in (0, 1]");
  }
  MaskSet masks;
  if (scope == PruneScope::Layerwise) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      double keep = keep_fraction;
      if (l + 1 == weights.size() && output_layer_factor != 1.0) {
        // scale the pruned fraction of the output layer
        keep = 1.0 - output_layer_factor * (1.0 - keep_fraction);
      }
      const auto k = static_cast<std::size_t>(
          std::floor(keep * static_cast<double>(weights[l].size())));
      masks.push_back(mask_from_topk(weights[l], k));
    }
    return masks;
  }
  // Global: one top-k over the concatenation, then scatter back per layer.
  std::size_t total = 0;
  for (const Tensor& w : weights) total += w.size();
  Tensor pooled = Tensor::zeros(total);
  std::size_t offset = 0;
  for (const Tensor& w : weights) {
    std::copy(w.data(), w.data() + w.size(), pooled.data() + offset);
    offset += w.size();
  }
  const auto k =
      static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(total)));
  std::vector<char> keep_flat(total, 0);
  for (std::size_t idx : topk_indices_by_magnitude(pooled, k)) keep_flat[idx] = 1;
  offset = 0;
  for (const Tensor& w : weights) {
    Mask m{Tensor::zeros_like(w)};
    for (std::size_t i = 0; i < w.size(); ++i) m.bits[i] = keep_flat[offset + i] ? 1.0 : 0.0;
    offset += w.size();
    masks.push_back(std::move(m));
  }
  return masks;
}

MaskSet magnitude_mask(const Network& net, double keep_fraction, PruneScope scope,
                       double output_layer_factor) {
  std::vector<Tensor> effective;
  effective.reserve(net.layers.size());
  for (const Layer& layer : net.layers) effective.push_back(layer.effective_weight());
  return magnitude_mask(effective, keep_fraction, scope, output_layer_factor);
}

Network apply_mask(const Network& net, const MaskSet& masks) {
  if (masks.size() != net.layers.size()) {
    throw ShapeError("apply_mask: mask/layer count mismatch");
  }
  Network out = net;
  for (std::size_t l = 0; l < masks.size(); ++l) {
    const Tensor& bits = masks[l].bits;
    if (bits.size() == 0) continue;
    if (!bits.same_shape(out.layers[l].weight)) {
      throw ShapeError("apply_mask: mask shape mismatch");
    }
    for (std::size_t i = 0; i < bits.size(); ++i) out.layers[l].weight[i] *= bits[i];
  }
  return out;
}

double mask_density(const MaskSet& masks) {
  std::size_t kept = 0, total = 0;
  for (const Mask& m : masks) {
    kept += m.kept_count();
    total += m.bits.size();
  }
  return total == 0 ? 1.0 : static_cast<double>(kept) / static_cast<double>(total);
}

MaskSet mask_union(const MaskSet& a, const MaskSet& b) {
  if (a.size() != b.size()) throw ShapeError("mask_union: layer count mismatch");
  MaskSet out = a;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (!a[l].bits.same_shape(b[l].bits)) throw ShapeError("mask_union: shape mismatch");
    for (std::size_t i = 0; i < out[l].bits.size(); ++i) {
      out[l].bits[i] = (a[l].bits[i] != 0.0 || b[l].bits[i] != 0.0) ? 1.0 : 0.0;
    }
  }
  return out;
}

MaskSet mask_complement(const MaskSet& a) {
  MaskSet out = a;
  for (Mask& m : out) {
    for (double& b : m.bits.values()) b = b != 0.0 ? 0.0 : 1.0;
  }
  return out;
}

MaskSet full_masks_like(const std::vector<Tensor>& weights, double value) {
  MaskSet out;
  for (const Tensor& w : weights) {
    Mask m{Tensor::zeros_like(w)};
    if (value != 0.0) {
      for (double& b : m.bits.values()) b = 1.0;
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<double> mask_overlap_per_layer(const MaskSet& a, const MaskSet& b) {
  if (a.size() != b.size()) throw ShapeError("mask_overlap: layer count mismatch");
  std::vector<double> out;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (!a[l].bits.same_shape(b[l].bits)) throw ShapeError("mask_overlap: shape mismatch");
    std::size_t kept_a = 0, both = 0;
    for (std::size_t i = 0; i < a[l].bits.size(); ++i) {
      if (a[l].bits[i] != 0.0) {
        ++kept_a;
        if (b[l].bits[i] != 0.0) ++both;
      }
    }
    out.push_back(kept_a == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(kept_a));
  }
  return out;
}

double mask_overlap(const MaskSet& a, const MaskSet& b) {
  if (a.size() != b.size()) throw ShapeError("mask_overlap: layer count mismatch");
  std::size_t kept_a = 0, kept_b = 0, both = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (!a[l].bits.same_shape(b[l].bits)) throw ShapeError("mask_overlap: shape mismatch");
    for (std::size_t i = 0; i < a[l].bits.size(); ++i) {
      const bool ka = a[l].bits[i] != 0.0, kb = b[l].bits[i] != 0.0;
      kept_a += ka;
      kept_b += kb;
      both += ka && kb;
    }
  }
  if (kept_a != kept_b) throw ShapeError("mask_overlap: kept counts differ");
  return kept_a == 0 ? 1.0 : static_cast<double>(both) / static_cast<double>(kept_a);
}

std::vector<SparsityReport> sparsity_sweep(const Network& net, const Dataset& eval_set,
                                           const std::vector<double>& keep_fractions,
                                           PruneScope scope, double output_layer_factor) {
  if (eval_set.count() == 0) throw DataError("sparsity_sweep: empty evaluation set");
  if (!std::is_sorted(keep_fractions.rbegin(), keep_fractions.rend())) {
    throw ShapeError("sparsity_sweep: keep fractions must be sorted descending");
  }
  std::vector<SparsityReport> reports;
  for (double keep : keep_fractions) {
    MaskSet masks = magnitude_mask(net, keep, scope, output_layer_factor);
    SparsityReport report;
    report.keep_fraction = keep;
    report.accuracy = accuracy(apply_mask(net, masks), eval_set.images, eval_set.labels);
    for (const Mask& m : masks) report.layer_density.push_back(m.density());
    reports.push_back(std::move(report));
  }
  return reports;
}

WeightHistogram weight_histogram(const Network& net, const MaskSet& survived,
                                 std::size_t sample_size, Rng& rng, std::size_t bins) {
  if (bins == 0) throw ShapeError("weight_histogram: bins must be positive");
  if (survived.size() != net.layers.size()) {
    throw ShapeError("weight_histogram: mask/layer count mismatch");
  }
  std::vector<double> values;
  std::vector<char> kept_flags;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Tensor w = net.layers[l].effective_weight();
    for (std::size_t i = 0; i < w.size(); ++i) {
      values.push_back(w[i]);
      kept_flags.push_back(survived[l].bits.size() == 0 || survived[l].bits[i] != 0.0);
    }
  }
  WeightHistogram hist;
  hist.clamped = sample_size > values.size();
  hist.sample_size = std::min(sample_size, values.size());

  // partial Fisher-Yates to sample without replacement
  std::vector<std::size_t> idx(values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < hist.sample_size; ++i) {
    const std::size_t j = i + rng.next_below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(hist.sample_size);

  double lo = values[idx[0]], hi = values[idx[0]];
  for (std::size_t i : idx) {
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  if (lo == hi) hi = lo + 1.0;  // constant weights land in a single bin
  hist.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    hist.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  hist.kept.assign(bins, 0);
  hist.pruned.assign(bins, 0);
  for (std::size_t i : idx) {
    auto bin = static_cast<std::size_t>((values[i] - lo) / (hi - lo) * static_cast<double>(bins));
    bin = std::min(bin, bins - 1);
    if (kept_flags[i]) {
      ++hist.kept[bin];
    } else {
      ++hist.pruned[bin];
    }
  }
  return hist;
}

}  // namespace sparselab
