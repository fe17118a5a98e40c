#pragma once

#include <vector>

#include "mvi/matrix.hpp"

namespace mvi {

struct SymmetricEigen {
  // Ascending eigenvalues.
  std::vector<double> values;
  // Column i is the unit eigenvector for values[i].
  Matrix vectors;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// 1e-12 (scaled by max(1, ||a||_F) for large inputs). Eigenpairs are returned
// sorted ascending; ties keep the order in which Jacobi left them.
SymmetricEigen sym_eig(const Matrix& a);
double sym_eig_min(const Matrix& a);
double sym_eig_max(const Matrix& a);

// Largest singular value, via the eigenvalues of a^T a (or a a^T, whichever
// is smaller).
double spectral_norm(const Matrix& a);

// Throws unless `a` is square and symmetric within `tol`.
void require_symmetric(const Matrix& a, double tol = 1e-10);

}  // namespace mvi
