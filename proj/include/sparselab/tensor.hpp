#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

#include "sparselab/errors.hpp"

namespace sparselab {

// Dense row-major array of 64-bit floats, rank 1 or 2.
//
// Tensors are plain values: copy/move them freely, share const references
// across threads. All mutation happens through the owning code; public
// numeric operations return fresh tensors and raise NumericalError if a
// result contains NaN/Inf.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t n);
  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor full(std::size_t rows, std::size_t cols, double value);
  static Tensor zeros_like(const Tensor& other);
  static Tensor row_matrix(std::initializer_list<double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rank() const { return shape_.size(); }
  bool is_vector() const { return rank() == 1; }
  bool is_matrix() const { return rank() == 2; }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }
  std::size_t size() const { return data_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
  double at(std::size_t i) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool operator==(const Tensor& other) const = default;

 private:
  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

bool all_finite(const Tensor& t);
void require_finite(const Tensor& t, const char* what);

// C = A * B for matrices. Each output element accumulates over k in
// ascending order, so results are bitwise reproducible run to run.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Column sums of a matrix, as a vector of length cols().
Tensor column_sums(const Tensor& a);

// Deterministic pseudo-random generator: xoshiro256++ seeded through
// splitmix64, uniform doubles from the top 53 bits, gaussians via the
// Marsaglia polar method. The algorithm is fixed for the lifetime of the
// project (see docs/formats.md) so identical seeds give identical streams
// on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, stream_id); unaffected by how
  // many values this instance has produced.
  Rng fork(std::uint64_t stream_id) const;

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double next_double();
  // Standard normal.
  double next_gaussian();
  // Uniform integer in [0, bound), bound > 0. Rejection sampled (unbiased).
  std::uint64_t next_below(std::uint64_t bound);

  std::uint64_t seed() const { return seed_; }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::uint64_t seed_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Tensor sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev);
Tensor sample_gaussian(Rng& rng, std::size_t n, double mean, double stddev);

// Flat indices of the k largest |t_i|, ascending index order. Ties in
// magnitude are broken toward the lower flat index, so masks derived from
// these indices are reproducible.
std::vector<std::size_t> topk_indices_by_magnitude(const Tensor& t, std::size_t k);

}  // namespace sparselab
