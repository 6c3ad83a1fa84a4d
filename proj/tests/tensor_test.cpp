#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "sparselab/tensor.hpp"
#include "testutil.hpp"

using namespace sparselab;

TEST_CASE("matmul identity and closed forms") {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  CHECK(matmul(a, eye) == a);

  const Tensor row = Tensor::matrix({{1, 2}});
  const Tensor col = Tensor::matrix({{3}, {4}});
  const Tensor prod = matmul(row, col);
  CHECK(prod.rows() == 1);
  CHECK(prod.cols() == 1);
  CHECK(prod(0, 0) == doctest::Approx(11.0));
}

TEST_CASE("matmul matches the triple-loop oracle on all shapes up to 8x8x8") {
  Rng rng(11);
  for (std::size_t m = 1; m <= 8; ++m) {
    for (std::size_t k = 1; k <= 8; ++k) {
      for (std::size_t n = 1; n <= 8; ++n) {
        const Tensor a = sample_gaussian(rng, m, k, 0.0, 1.0);
        const Tensor b = sample_gaussian(rng, k, n, 0.0, 1.0);
        CHECK(testutil::max_abs_diff(matmul(a, b), testutil::naive_matmul(a, b)) < 1e-12);
      }
    }
  }
  // one larger rectangle, matching the documented example
  const Tensor a = sample_gaussian(rng, 5, 7, 0.0, 1.0);
  const Tensor b = sample_gaussian(rng, 7, 3, 0.0, 1.0);
  CHECK(testutil::max_abs_diff(matmul(a, b), testutil::naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("matmul rejects mismatched shapes and non-finite results") {
  const Tensor a = Tensor::matrix({{1, 2}});
  const Tensor b = Tensor::matrix({{1, 2}});
  CHECK_THROWS_AS(matmul(a, b), ShapeError);

  const Tensor huge = Tensor::full(2, 2, 1e308);
  CHECK_THROWS_AS(matmul(huge, huge), NumericalError);
}

TEST_CASE("rng streams are reproducible and forks are independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42);
  c.next_u64();
  // fork depends on the seed only, not on consumption
  CHECK(c.fork(3).next_u64() == Rng(42).fork(3).next_u64());
  CHECK(Rng(42).fork(1).next_u64() != Rng(42).fork(2).next_u64());
}

TEST_CASE("gaussian sampling: determinism, zero std, moments") {
  Rng a(42), b(42);
  CHECK(sample_gaussian(a, 7, 5, 0.0, 1.0) == sample_gaussian(b, 7, 5, 0.0, 1.0));

  Rng c(1);
  const Tensor constant = sample_gaussian(c, 4, 4, 2.5, 0.0);
  for (double v : constant.values()) CHECK(v == 2.5);

  Rng d(7);
  const std::size_t n = 100000;
  const Tensor sample = sample_gaussian(d, n, 0.3, 2.0);
  double mean = 0.0;
  for (double v : sample.values()) mean += v;
  mean /= static_cast<double>(n);
  CHECK(std::fabs(mean - 0.3) < 4.0 * 2.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("topk by magnitude with the flat-index tie rule") {
  const Tensor t = Tensor::vector({0.1, -0.9, 0.5});
  CHECK(topk_indices_by_magnitude(t, 2) == std::vector<std::size_t>{1, 2});
  CHECK(topk_indices_by_magnitude(t, 3) == std::vector<std::size_t>{0, 1, 2});
  CHECK(topk_indices_by_magnitude(t, 0).empty());

  const Tensor ties = Tensor::vector({0.5, -0.5, 0.5});
  CHECK(topk_indices_by_magnitude(ties, 2) == std::vector<std::size_t>{0, 1});

  CHECK_THROWS_AS(topk_indices_by_magnitude(t, 4), ShapeError);
}

TEST_CASE("topk is invariant under sign flips") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.next_below(40);
    Tensor t = sample_gaussian(rng, n, 0.0, 1.0);
    Tensor flipped = t;
    for (double& v : flipped.values()) {
      if (rng.next_double() < 0.5) v = -v;
    }
    const std::size_t k = rng.next_below(n + 1);
    CHECK(topk_indices_by_magnitude(t, k) == topk_indices_by_magnitude(flipped, k));
  }
}

TEST_CASE("next_below covers the range without bias artifacts") {
  Rng rng(9);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) ++counts[rng.next_below(5)];
  for (int c : counts) CHECK(c > 800);
}
