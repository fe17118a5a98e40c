#include <doctest.h>

#include <omp.h>

#include "mvi/error.hpp"
#include "mvi/graph.hpp"
#include "mvi/kernels.hpp"
#include "mvi/rng.hpp"

using namespace mvi;

namespace {

Matrix random(std::size_t r, std::size_t c, std::uint64_t tag) {
  RngStream rng(tag, streams::kData);
  return gaussian(rng, 0.0, 1.0, r, c);
}

}  // namespace

TEST_CASE("parallel kernels agree bit for bit with the serial reference") {
  // Sizes straddle the parallel-work threshold.
  for (std::size_t rows : {1, 7, 300, 3000}) {
    const Matrix a = random(rows, 33, rows);
    const Matrix b = random(33, 17, rows + 1);
    CHECK(kernels::gemm_nn(a, b) == kernels::reference::gemm_nn(a, b));
    const Matrix c = random(rows, 17, rows + 2);
    CHECK(kernels::gemm_tn(a, c) == kernels::reference::gemm_tn(a, c));
    const Matrix d = random(17, 33, rows + 3);
    CHECK(kernels::gemm_nt(a, d) == kernels::reference::gemm_nt(a, d));
  }
}

TEST_CASE("block_left_multiply agrees with the reference and with per-sample products") {
  RngStream grng(0, streams::kGraph);
  const Matrix f = gcn_operator(erdos_renyi(12, 0.3, grng));
  for (std::size_t samples : {1, 5, 800}) {
    const Matrix x = random(samples * 12, 6, samples);
    const Matrix y = kernels::block_left_multiply(f, x, 12);
    CHECK(y == kernels::reference::block_left_multiply(f, x, 12));
    for (std::size_t s = 0; s < samples; s += 97) {
      const Matrix want = kernels::reference::gemm_nn(f, x.row_block(s * 12, 12));
      CHECK(max_abs(y.row_block(s * 12, 12) - want) <= 1e-12);
    }
  }
}

TEST_CASE("results do not depend on the thread count") {
  const Matrix a = random(2000, 40, 1);
  const Matrix b = random(40, 30, 2);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const Matrix one = kernels::gemm_nn(a, b);
  omp_set_num_threads(4);
  const Matrix four = kernels::gemm_nn(a, b);
  omp_set_num_threads(saved);
  CHECK(one == four);
}

TEST_CASE("kernel shape errors") {
  CHECK_THROWS_AS(kernels::gemm_nn(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(kernels::gemm_tn(Matrix(2, 3), Matrix(3, 3)), ShapeError);
  CHECK_THROWS_AS(kernels::gemm_nt(Matrix(2, 3), Matrix(2, 2)), ShapeError);
  CHECK_THROWS_AS(kernels::block_left_multiply(Matrix(3, 3), Matrix(7, 2), 3), ShapeError);
  CHECK_THROWS_AS(kernels::block_left_multiply(Matrix(3, 2), Matrix(6, 2), 3), ShapeError);
}
