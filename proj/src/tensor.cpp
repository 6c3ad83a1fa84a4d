#include "sparselab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

namespace sparselab {

Tensor Tensor::zeros(std::size_t n) { return Tensor({n}, std::vector<double>(n, 0.0)); }

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, value));
}

Tensor Tensor::zeros_like(const Tensor& other) {
  return Tensor(other.shape_, std::vector<double>(other.size(), 0.0));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::row_matrix(std::initializer_list<double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

double Tensor::at(std::size_t i) const {
  if (i >= data_.size()) throw ShapeError("Tensor::at: index out of range");
  return data_[i];
}

bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Tensor& t, const char* what) {
  if (!all_finite(t)) {
    throw NumericalError(std::string("non-finite values in ") + what);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (!a.is_matrix() || !b.is_matrix()) throw ShapeError("matmul: rank-2 tensors required");
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner extents disagree");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::zeros(m, n);
  const double* A = a.data();
  const double* B = b.data();
  double* C = c.data();
  // Blocked over k so the C rows of a block stay cached; per output element
  // the accumulation still walks k left to right.
  constexpr std::size_t kBlock = 64;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlock) {
    const std::size_t p1 = std::min(p0 + kBlock, k);
    for (std::size_t i = 0; i < m; ++i) {
      double* crow = C + i * n;
      const double* arow = A + i * k;
      for (std::size_t p = p0; p < p1; ++p) {
        const double av = arow[p];
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  require_finite(c, "matmul result");
  return c;
}

Tensor transpose(const Tensor& a) {
  if (!a.is_matrix()) throw ShapeError("transpose: rank-2 tensor required");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t = Tensor::zeros(n, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  }
  return t;
}

Tensor column_sums(const Tensor& a) {
  if (!a.is_matrix()) throw ShapeError("column_sums: rank-2 tensor required");
  Tensor s = Tensor::zeros(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += a(i, j);
  }
  return s;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t v, int s) { return (v << s) | (v >> (64 - s)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : state_) word = splitmix64(x);
}

Rng Rng::fork(std::uint64_t stream_id) const {
  std::uint64_t x = seed_;
  std::uint64_t mixed = splitmix64(x) ^ (0xD1B54A32D192ED03ULL * (stream_id + 1));
  return Rng(mixed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
  if (bound == 0) throw ShapeError("Rng::next_below: bound must be positive");
  const std::uint64_t threshold = (0ULL - bound) % bound;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

Tensor sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev) {
  if (stddev < 0.0) throw ShapeError("sample_gaussian: stddev must be >= 0");
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = mean + stddev * rng.next_gaussian();
  return t;
}

Tensor sample_gaussian(Rng& rng, std::size_t n, double mean, double stddev) {
  if (stddev < 0.0) throw ShapeError("sample_gaussian: stddev must be >= 0");
  Tensor t = Tensor::zeros(n);
  for (double& v : t.values()) v = mean + stddev * rng.next_gaussian();
  return t;
}

std::vector<std::size_t> topk_indices_by_magnitude(const Tensor& t, std::size_t k) {
  if (k > t.size()) throw ShapeError("topk_indices_by_magnitude: k exceeds tensor size");
  std::vector<std::size_t> idx(t.size());
  std::iota(idx.begin(), idx.end(), 0);
  const double* v = t.data();
  auto better = [v](std::size_t a, std::size_t b) {
    const double ma = std::fabs(v[a]), mb = std::fabs(v[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  if (k < idx.size()) {
    std::nth_element(idx.begin(), idx.begin() + k, idx.end(), better);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace sparselab
