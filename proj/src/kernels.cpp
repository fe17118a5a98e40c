#include "mvi/kernels.hpp"

#include "mvi/error.hpp"

namespace mvi::kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

void check_nn(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape_string(a) + " * " + shape_string(b));
}
void check_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw ShapeError("matmul_tn: " + shape_string(a) + "^T * " + shape_string(b));
}
void check_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
}
void check_block(const Matrix& f, const Matrix& x, std::size_t nodes) {
  if (f.rows() != nodes || f.cols() != nodes || nodes == 0 || x.rows() % nodes != 0)
    throw ShapeError("block_left_multiply: filter " + shape_string(f) + " on " +
                     shape_string(x) + " with " + std::to_string(nodes) + " nodes");
}

// Row i of a*b, accumulating over k in ascending order.
inline void nn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols(), n = b.cols();
  double* out = c.data() + i * n;
  const double* arow = a.data() + i * inner;
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = arow[k];
    const double* brow = b.data() + k * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
  }
}

// Row i of a^T*b (column i of a against b), accumulating over r ascending.
inline void tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t m = a.cols(), n = b.cols();
  double* out = c.data() + i * n;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double ari = a.data()[r * m + i];
    const double* brow = b.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += ari * brow[j];
  }
}

inline void nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t inner = a.cols();
  const double* arow = a.data() + i * inner;
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.data() + j * inner;
    double s = 0.0;
    for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
    c(i, j) = s;
  }
}

inline void block_rows(const Matrix& f, const Matrix& x, Matrix& y, std::size_t nodes,
                       std::size_t block) {
  const std::size_t cols = x.cols();
  const std::size_t base = block * nodes;
  for (std::size_t i = 0; i < nodes; ++i) {
    double* out = y.data() + (base + i) * cols;
    const double* frow = f.data() + i * nodes;
    for (std::size_t k = 0; k < nodes; ++k) {
      const double fik = frow[k];
      if (fik == 0.0) continue;
      const double* xrow = x.data() + (base + k) * cols;
      for (std::size_t j = 0; j < cols; ++j) out[j] += fik * xrow[j];
    }
  }
}

}  // namespace

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
  check_nn(a, b);
  Matrix c(a.rows(), b.cols());
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool wide = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) nn_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_tn(a, b);
  Matrix c(a.cols(), b.cols());
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(a.cols());
  const bool wide = a.rows() * a.cols() * b.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) tn_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_nt(a, b);
  Matrix c(a.rows(), b.rows());
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(a.rows());
  const bool wide = a.rows() * a.cols() * b.rows() >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t i = 0; i < rows; ++i) nt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix block_left_multiply(const Matrix& f, const Matrix& x, std::size_t nodes) {
  check_block(f, x, nodes);
  Matrix y(x.rows(), x.cols());
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>(x.rows() / nodes);
  const bool wide = x.rows() * nodes * x.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t s = 0; s < blocks; ++s)
    block_rows(f, x, y, nodes, static_cast<std::size_t>(s));
  return y;
}

namespace reference {

Matrix gemm_nn(const Matrix& a, const Matrix& b) {
  check_nn(a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) nn_row(a, b, c, i);
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check_tn(a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) tn_row(a, b, c, i);
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check_nt(a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) nt_row(a, b, c, i);
  return c;
}

Matrix block_left_multiply(const Matrix& f, const Matrix& x, std::size_t nodes) {
  check_block(f, x, nodes);
  Matrix y(x.rows(), x.cols());
  for (std::size_t s = 0; s < x.rows() / nodes; ++s) block_rows(f, x, y, nodes, s);
  return y;
}

}  // namespace reference
}  // namespace mvi::kernels
