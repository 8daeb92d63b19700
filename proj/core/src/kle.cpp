#include "invuq/kle.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <string>

#include "invuq/errors.hpp"
#include "invuq/linalg.hpp"

namespace invuq {

KLEBasis fit_kle(const std::vector<std::vector<double>>& snapshots, double rtol) {
  if (rtol <= 0.0 || rtol >= 1.0) throw std::invalid_argument("fit_kle: rtol must be in (0,1)");
  const std::size_t n = snapshots.size();
  if (n < 2) throw std::invalid_argument("fit_kle: need at least 2 snapshots");
  const std::size_t support = snapshots[0].size();
  for (const auto& s : snapshots)
    if (s.size() != support) throw std::invalid_argument("fit_kle: inconsistent snapshot length");

  KLEBasis basis;
  basis.rtol = rtol;
  basis.mean.assign(support, 0.0);
  for (const auto& s : snapshots) axpy(1.0, s, basis.mean);
  for (auto& m : basis.mean) m /= static_cast<double>(n);

  // centered snapshots, column i = snapshot i - mean
  Matrix xc(support, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < support; ++r) xc(r, i) = snapshots[i][r] - basis.mean[r];

  // method of snapshots: Gram matrix G = Xc^T Xc / (n-1) shares the nonzero
  // covariance spectrum and stays n x n
  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < support; ++r) s += xc(r, i) * xc(r, j);
      s /= static_cast<double>(n - 1);
      gram(i, j) = s;
      gram(j, i) = s;
    }
  }

  const EigResult eig = sym_eig(gram);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  basis.total_energy = total;

  if (total <= 0.0 || !(total > 1e-300)) {
    basis.degenerate = true;
    basis.modes = Matrix(support, 0);
    std::cerr << "fit_kle: zero-variance snapshot set, returning degenerate basis\n";
    return basis;
  }

  // numerical rank cutoff; centering removes one dimension anyway
  const double cutoff = 1e-12 * eig.values[0];
  std::size_t rank = 0;
  for (double v : eig.values)
    if (v > cutoff) ++rank;
  rank = std::min(rank, n - 1);

  // smallest mode count with tail energy ratio <= rtol (rank spectrum)
  std::size_t keep = rank;
  double running = 0.0;
  for (std::size_t k = 0; k < rank; ++k) {
    running += eig.values[k];
    if ((total - running) / total <= rtol) {
      keep = k + 1;
      break;
    }
  }

  basis.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(keep));
  basis.modes = Matrix(support, keep);
  for (std::size_t k = 0; k < keep; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(n - 1) * eig.values[k]);
    for (std::size_t r = 0; r < support; ++r) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += xc(r, i) * eig.vectors(i, k);
      basis.modes(r, k) = s * scale;
    }
    // sign convention: largest-magnitude component positive
    std::size_t imax = 0;
    double vmax = 0.0;
    for (std::size_t r = 0; r < support; ++r) {
      const double av = std::fabs(basis.modes(r, k));
      if (av > vmax) {
        vmax = av;
        imax = r;
      }
    }
    if (basis.modes(imax, k) < 0.0)
      for (std::size_t r = 0; r < support; ++r) basis.modes(r, k) = -basis.modes(r, k);
  }

  // orthonormality is a typed invariant; verify before returning
  for (std::size_t a = 0; a < keep; ++a) {
    for (std::size_t b = a; b < keep; ++b) {
      double s = 0.0;
      for (std::size_t r = 0; r < support; ++r) s += basis.modes(r, a) * basis.modes(r, b);
      const double expect = (a == b) ? 1.0 : 0.0;
      if (std::fabs(s - expect) > 1e-8)
        throw NumericalError("fit_kle: mode orthonormality violated at (" + std::to_string(a) +
                             "," + std::to_string(b) + "): " + std::to_string(s));
    }
  }
  return basis;
}

std::vector<double> encode(const KLEBasis& basis, std::span<const double> field) {
  if (field.size() != basis.support())
    throw std::invalid_argument("encode: field length does not match basis support");
  std::vector<double> xi(basis.n_modes(), 0.0);
  std::vector<double> centered(field.begin(), field.end());
  for (std::size_t r = 0; r < centered.size(); ++r) centered[r] -= basis.mean[r];
  for (std::size_t k = 0; k < basis.n_modes(); ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < centered.size(); ++r) s += basis.modes(r, k) * centered[r];
    xi[k] = s / std::sqrt(basis.eigenvalues[k]);
  }
  return xi;
}

std::vector<double> decode(const KLEBasis& basis, std::span<const double> coeffs) {
  if (coeffs.size() > basis.n_modes())
    throw std::invalid_argument("decode: more coefficients than modes");
  std::vector<double> f = basis.mean;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const double w = std::sqrt(basis.eigenvalues[k]) * coeffs[k];
    if (w == 0.0) continue;
    for (std::size_t r = 0; r < f.size(); ++r) f[r] += basis.modes(r, k) * w;
  }
  return f;
}

std::vector<double> decode_rows(const KLEBasis& basis, std::span<const double> coeffs,
                                std::span<const std::size_t> rows) {
  if (coeffs.size() > basis.n_modes())
    throw std::invalid_argument("decode_rows: more coefficients than modes");
  std::vector<double> f(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    double s = basis.mean[r];
    for (std::size_t k = 0; k < coeffs.size(); ++k)
      s += basis.modes(r, k) * std::sqrt(basis.eigenvalues[k]) * coeffs[k];
    f[i] = s;
  }
  return f;
}

double retained_energy(const KLEBasis& basis) {
  if (basis.total_energy <= 0.0) return 1.0;
  double kept = 0.0;
  for (double v : basis.eigenvalues) kept += v;
  return kept / basis.total_energy;
}

Matrix scaled_modes_rows(const KLEBasis& basis, std::span<const std::size_t> rows) {
  Matrix m(rows.size(), basis.n_modes());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < basis.n_modes(); ++k)
      m(i, k) = basis.modes(rows[i], k) * std::sqrt(basis.eigenvalues[k]);
  return m;
}

}  // namespace invuq
