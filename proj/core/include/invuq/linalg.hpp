#pragma once

#include <span>
#include <vector>

#include "invuq/matrix.hpp"

namespace invuq {

struct EigResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns are eigenvectors, orthonormal
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Eigenvalues sorted descending; each eigenvector's largest-magnitude
/// component is made positive. Rejects matrices whose asymmetry exceeds
/// 1e-10 * max|A|.
EigResult sym_eig(const Matrix& a);

struct CholResult {
  Matrix lower;
  double jitter = 0.0;  // diagonal shift that was needed (0 if none)
};

/// Cholesky factorization A = L L^T. Retries with diagonal jitter
/// 1e-10*trace(A)/n, doubling up to 3 times, before failing with the
/// offending pivot index.
CholResult cholesky(const Matrix& a);

/// Solve L x = b (lower triangular).
std::vector<double> solve_lower(const Matrix& l, std::span<const double> b);
/// Solve L^T x = b.
std::vector<double> solve_lower_t(const Matrix& l, std::span<const double> b);
/// Solve A x = b for SPD A via Cholesky.
std::vector<double> solve_spd(const Matrix& a, std::span<const double> b);

}  // namespace invuq
