#pragma once

#include "mvi/matrix.hpp"

// Data-parallel dense kernels.
//
// Every kernel in `mvi::kernels` has a serial twin in `mvi::kernels::reference`
// that performs the same floating-point operations in the same order for each
// output entry, so the OpenMP and serial variants agree bit for bit. The
// parallel versions split work over independent output rows (or sample
// blocks) only; no reduction crosses a thread boundary.
namespace mvi::kernels {

// c = a * b
Matrix gemm_nn(const Matrix& a, const Matrix& b);
// c = a^T * b
Matrix gemm_tn(const Matrix& a, const Matrix& b);
// c = a * b^T
Matrix gemm_nt(const Matrix& a, const Matrix& b);
// For stacked samples x = [x_0; x_1; ...] with `nodes` rows each, returns
// [f x_0; f x_1; ...] where f is nodes x nodes.
Matrix block_left_multiply(const Matrix& f, const Matrix& x, std::size_t nodes);

namespace reference {
Matrix gemm_nn(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);
Matrix block_left_multiply(const Matrix& f, const Matrix& x, std::size_t nodes);
}  // namespace reference

}  // namespace mvi::kernels

namespace mvi {

// Standard matrix product with row-major, left-to-right accumulation.
inline Matrix matmul(const Matrix& a, const Matrix& b) { return kernels::gemm_nn(a, b); }
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) { return kernels::gemm_tn(a, b); }
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) { return kernels::gemm_nt(a, b); }

}  // namespace mvi
