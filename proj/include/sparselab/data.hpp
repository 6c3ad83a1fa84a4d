#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "sparselab/nn.hpp"
#include "sparselab/tensor.hpp"

namespace sparselab {

struct Dataset {
  Tensor images;            // [n x pixels], values in [0, 1]
  std::vector<int> labels;  // in [0, num_classes)
  int num_classes = 10;

  std::size_t count() const { return images.rows(); }
  std::size_t pixels() const { return images.cols(); }
};

// IDX ingestion. Image files start with big-endian magic 0x00000803 and
// extents [n, rows, cols]; label files with 0x00000801 and [n]. Pixel bytes
// are scaled by 1/255. Files whose first two bytes are 0x1f 0x8b are
// transparently gunzipped first.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

// Writes plain (uncompressed) IDX files; pixels are rounded back to bytes,
// which is exact for anything produced by load_idx.
void save_idx(const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path, const Dataset& data,
              std::size_t image_rows = 28, std::size_t image_cols = 28);

// Looks for the canonical MNIST file names (train-images-idx3-ubyte etc.),
// with or without a .gz suffix, under `dir`.
Dataset load_mnist_dir(const std::filesystem::path& dir, bool test_split);

// Splits off the last `validation_count` examples as validation data.
std::pair<Dataset, Dataset> carve_validation(const Dataset& train,
                                             std::size_t validation_count = 5000);

// Fixed pixel permutation for (master_seed, task_index); task 0 is the
// identity. Fisher-Yates over the fork(task_index) stream.
std::vector<std::size_t> pixel_permutation(std::uint64_t master_seed, std::size_t task_index,
                                           std::size_t dim);

// Permuted task: output pixel j of each image is input pixel perm[j].
Dataset make_permuted_task(const Dataset& base, std::size_t task_index,
                           std::uint64_t master_seed);

struct SplitTask {
  Dataset data;                 // labels stay the global 10-class ids
  std::array<int, 2> classes;   // the pair this task covers
};

// Class pairs (0,1), (2,3), (4,5), (6,7), (8,9) in order.
std::vector<SplitTask> make_split_tasks(const Dataset& base);

// `batch_size` examples drawn i.i.d. with replacement.
TaskBatch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng, int task = 0);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

// ---------------------------------------------------------------------------
// Synthetic MNIST-class digits: 28x28 grayscale glyphs rendered from stroke
// skeletons with randomized affine distortion, smooth elastic wobble, stroke
// width jitter and pixel noise. Deterministic given the seed; written as
// standard IDX files so the rest of the pipeline cannot tell it apart from
// the real thing.

struct SyntheticDigitsConfig {
  std::size_t train_count = 60000;
  std::size_t test_count = 10000;
  std::uint64_t seed = 2026;
  double rotation_std_degrees = 8.0;
  double shear_range = 0.16;
  double scale_low = 0.78, scale_high = 1.12;
  double glyph_box_px = 20.0;         // ink footprint; the rest is margin
  double translate_range = 1.0;       // pixels
  double elastic_amplitude = 1.1;     // pixels
  double stroke_halfwidth_low = 1.0, stroke_halfwidth_high = 1.9;
  double noise_std = 0.06;
  double contrast_low = 0.78, contrast_high = 1.0;
  double clutter_rate = 0.25;         // chance of a distractor arc per image
};

Dataset synth_digits(std::size_t count, std::uint64_t seed, const SyntheticDigitsConfig& cfg);

// Writes train-images-idx3-ubyte / train-labels-idx1-ubyte and the t10k
// pair under out_dir.
void generate_synthetic_idx(const std::filesystem::path& out_dir,
                            const SyntheticDigitsConfig& cfg);

}  // namespace sparselab
