#include "mvi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvi/error.hpp"
#include "mvi/kernels.hpp"

namespace mvi {
namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

void require_symmetric(const Matrix& a, double tol) {
  if (a.rows() != a.cols()) throw ShapeError("expected a square matrix, got " + shape_string(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::abs(a(i, j) - a(j, i)) > tol)
        throw InvalidArgument("matrix is not symmetric at (" + std::to_string(i) + "," +
                              std::to_string(j) + ")");
}

SymmetricEigen sym_eig(const Matrix& input) {
  require_symmetric(input);
  require_finite(input, "sym_eig");
  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::identity(n);
  const double threshold = 1e-12 * std::max(1.0, frobenius_norm(input));

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  for (; sweep < kMaxSweeps && off_diagonal_norm(a) >= threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        // Rotation annihilating a(p,q): tan(theta) = t with the smaller root.
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_diagonal_norm(a) >= threshold)
    throw NumericError("sym_eig: Jacobi did not converge in " + std::to_string(kMaxSweeps) +
                       " sweeps");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

double sym_eig_min(const Matrix& a) {
  auto e = sym_eig(a);
  if (e.values.empty()) throw ShapeError("sym_eig_min: empty matrix");
  return e.values.front();
}

double sym_eig_max(const Matrix& a) {
  auto e = sym_eig(a);
  if (e.values.empty()) throw ShapeError("sym_eig_max: empty matrix");
  return e.values.back();
}

double spectral_norm(const Matrix& a) {
  if (a.empty()) return 0.0;
  Matrix gram = a.rows() < a.cols() ? matmul_nt(a, a) : matmul_tn(a, a);
  // Exact symmetry for the eigensolver.
  for (std::size_t i = 0; i < gram.rows(); ++i)
    for (std::size_t j = i + 1; j < gram.cols(); ++j) gram(j, i) = gram(i, j);
  return std::sqrt(std::max(0.0, sym_eig_max(gram)));
}

}  // namespace mvi
