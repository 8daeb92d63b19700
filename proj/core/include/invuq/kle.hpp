#pragma once

#include <span>
#include <vector>

#include "invuq/matrix.hpp"

namespace invuq {

/// Empirical Karhunen-Loeve basis of a field family, fitted by the method
/// of snapshots. Modes are orthonormal columns; eigenvalues are descending
/// and carry the unit-variance latent scaling (coefficients divided by
/// sqrt(lambda) on encode).
struct KLEBasis {
  std::vector<double> mean;     // over the field support
  Matrix modes;                 // support x n_modes
  std::vector<double> eigenvalues;  // n_modes, descending, > 0
  double total_energy = 0.0;    // sum of the full computable rank spectrum
  double rtol = 0.0;            // truncation tolerance the fit was asked for
  bool degenerate = false;      // zero-variance snapshot set

  std::size_t support() const { return mean.size(); }
  std::size_t n_modes() const { return eigenvalues.size(); }
};

/// Fit from snapshots (each a field vector over the same support).
/// Keeps the smallest mode count whose tail-energy ratio is <= rtol,
/// capped at the snapshot rank.
KLEBasis fit_kle(const std::vector<std::vector<double>>& snapshots, double rtol);

/// Latent coordinates: xi_i = phi_i^T (field - mean) / sqrt(lambda_i).
std::vector<double> encode(const KLEBasis& basis, std::span<const double> field);

/// mean + sum_i phi_i sqrt(lambda_i) xi_i; coeffs may be shorter than
/// n_modes (zero-padded).
std::vector<double> decode(const KLEBasis& basis, std::span<const double> coeffs);

/// Same decode restricted to selected support rows.
std::vector<double> decode_rows(const KLEBasis& basis, std::span<const double> coeffs,
                                std::span<const std::size_t> rows);

/// Kept-over-total energy ratio in [0, 1].
double retained_energy(const KLEBasis& basis);

/// support x n_modes matrix with columns phi_i * sqrt(lambda_i), restricted
/// to the given rows. This is the linear decode map without the mean.
Matrix scaled_modes_rows(const KLEBasis& basis, std::span<const std::size_t> rows);

}  // namespace invuq
