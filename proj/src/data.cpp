#include "sparselab/data.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>

namespace sparselab {

namespace {

std::vector<unsigned char> read_maybe_gzipped(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError("no such file: " + path.string());
  }
  // gzread inflates gzip streams (magic 0x1f 0x8b) and passes anything else
  // through untouched.
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes;
  unsigned char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) {
    bytes.insert(bytes.end(), buf, buf + n);
  }
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw DataError("error while reading " + path.string());
  return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw DataError("truncated IDX file: " + path.string());
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<unsigned char>& bytes, std::uint32_t v) {
  bytes.push_back(static_cast<unsigned char>(v >> 24));
  bytes.push_back(static_cast<unsigned char>(v >> 16));
  bytes.push_back(static_cast<unsigned char>(v >> 8));
  bytes.push_back(static_cast<unsigned char>(v));
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  const auto ibytes = read_maybe_gzipped(images_path);
  const auto lbytes = read_maybe_gzipped(labels_path);

  if (read_be32(ibytes, 0, images_path) != kImagesMagic) {
    throw DataError("bad magic in image file " + images_path.string());
  }
  const std::size_t n = read_be32(ibytes, 4, images_path);
  const std::size_t rows = read_be32(ibytes, 8, images_path);
  const std::size_t cols = read_be32(ibytes, 12, images_path);
  const std::size_t pixels = rows * cols;
  if (ibytes.size() != 16 + n * pixels) {
    throw DataError("truncated image file " + images_path.string());
  }

  if (read_be32(lbytes, 0, labels_path) != kLabelsMagic) {
    throw DataError("bad magic in label file " + labels_path.string());
  }
  const std::size_t ln = read_be32(lbytes, 4, labels_path);
  if (lbytes.size() != 8 + ln) throw DataError("truncated label file " + labels_path.string());
  if (ln != n) {
    throw DataError("image/label count mismatch: " + std::to_string(n) + " vs " +
                    std::to_string(ln));
  }

  Dataset data;
  data.images = Tensor::zeros(n, pixels);
  data.labels.resize(n);
  for (std::size_t i = 0; i < n * pixels; ++i) {
    data.images.data()[i] = static_cast<double>(ibytes[16 + i]) / 255.0;
  }
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    data.labels[i] = static_cast<int>(lbytes[8 + i]);
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = std::max(10, max_label + 1);
  return data;
}

namespace {

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.string().c_str(), "wb");
  if (f == nullptr) throw DataError("cannot write " + path.string());
  const std::size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (written != bytes.size()) throw DataError("short write to " + path.string());
  std::filesystem::rename(tmp, path);
}

}  // namespace

void save_idx(const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path, const Dataset& data,
              std::size_t image_rows, std::size_t image_cols) {
  if (image_rows * image_cols != data.pixels()) {
    throw ShapeError("save_idx: rows*cols must equal pixel count");
  }
  std::vector<unsigned char> ibytes;
  ibytes.reserve(16 + data.count() * data.pixels());
  write_be32(ibytes, kImagesMagic);
  write_be32(ibytes, static_cast<std::uint32_t>(data.count()));
  write_be32(ibytes, static_cast<std::uint32_t>(image_rows));
  write_be32(ibytes, static_cast<std::uint32_t>(image_cols));
  for (std::size_t i = 0; i < data.images.size(); ++i) {
    const double v = data.images.data()[i];
    const long long byte = std::llround(v * 255.0);
    ibytes.push_back(static_cast<unsigned char>(std::min(255LL, std::max(0LL, byte))));
  }
  std::vector<unsigned char> lbytes;
  lbytes.reserve(8 + data.count());
  write_be32(lbytes, kLabelsMagic);
  write_be32(lbytes, static_cast<std::uint32_t>(data.count()));
  for (int label : data.labels) lbytes.push_back(static_cast<unsigned char>(label));
  write_file(images_path, ibytes);
  write_file(labels_path, lbytes);
}

namespace {

std::filesystem::path find_variant(const std::filesystem::path& dir, const std::string& name) {
  const std::filesystem::path plain = dir / name;
  if (std::filesystem::exists(plain)) return plain;
  const std::filesystem::path gz = dir / (name + ".gz");
  if (std::filesystem::exists(gz)) return gz;
  throw DataError("missing dataset file " + plain.string() + " (or .gz)");
}

}  // namespace

Dataset load_mnist_dir(const std::filesystem::path& dir, bool test_split) {
  const std::string prefix = test_split ? "t10k" : "train";
  return load_idx(find_variant(dir, prefix + "-images-idx3-ubyte"),
                  find_variant(dir, prefix + "-labels-idx1-ubyte"));
}

std::pair<Dataset, Dataset> carve_validation(const Dataset& train, std::size_t validation_count) {
  if (validation_count >= train.count()) {
    throw ShapeError("carve_validation: validation split would consume the whole set");
  }
  const std::size_t head = train.count() - validation_count;
  std::vector<std::size_t> head_idx(head), tail_idx(validation_count);
  for (std::size_t i = 0; i < head; ++i) head_idx[i] = i;
  for (std::size_t i = 0; i < validation_count; ++i) tail_idx[i] = head + i;
  return {subset(train, head_idx), subset(train, tail_idx)};
}

std::vector<std::size_t> pixel_permutation(std::uint64_t master_seed, std::size_t task_index,
                                           std::size_t dim) {
  std::vector<std::size_t> perm(dim);
  for (std::size_t i = 0; i < dim; ++i) perm[i] = i;
  if (task_index == 0) return perm;
  Rng rng = Rng(master_seed).fork(task_index);
  for (std::size_t i = dim - 1; i > 0; --i) {
    const std::size_t j = rng.next_below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}

Dataset make_permuted_task(const Dataset& base, std::size_t task_index,
                           std::uint64_t master_seed) {
  const auto perm = pixel_permutation(master_seed, task_index, base.pixels());
  Dataset out;
  out.labels = base.labels;
  out.num_classes = base.num_classes;
  out.images = Tensor::zeros(base.count(), base.pixels());
  for (std::size_t i = 0; i < base.count(); ++i) {
    for (std::size_t j = 0; j < base.pixels(); ++j) {
      out.images(i, j) = base.images(i, perm[j]);
    }
  }
  return out;
}

std::vector<SplitTask> make_split_tasks(const Dataset& base) {
  std::vector<SplitTask> tasks;
  for (int t = 0; t < 5; ++t) {
    const int a = 2 * t, b = 2 * t + 1;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < base.count(); ++i) {
      if (base.labels[i] == a || base.labels[i] == b) idx.push_back(i);
    }
    tasks.push_back(SplitTask{subset(base, idx), {a, b}});
  }
  return tasks;
}

TaskBatch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng, int task) {
  if (data.count() == 0) throw DataError("sample_batch: empty dataset");
  TaskBatch batch;
  batch.task = task;
  batch.inputs = Tensor::zeros(batch_size, data.pixels());
  batch.labels.resize(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t pick = rng.next_below(data.count());
    std::memcpy(batch.inputs.data() + i * data.pixels(),
                data.images.data() + pick * data.pixels(), data.pixels() * sizeof(double));
    batch.labels[i] = data.labels[pick];
  }
  return batch;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.num_classes = data.num_classes;
  out.images = Tensor::zeros(indices.size(), data.pixels());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::memcpy(out.images.data() + i * data.pixels(),
                data.images.data() + indices[i] * data.pixels(), data.pixels() * sizeof(double));
    out.labels[i] = data.labels[indices[i]];
  }
  return out;
}

}  // namespace sparselab
