#include "invuq/band.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "invuq/errors.hpp"

namespace invuq {

BandMatrix::BandMatrix(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(ldab_ * n, 0.0) {}

double& BandMatrix::at(std::size_t i, std::size_t j) {
  assert(i < n_ && j < n_);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kl_ + ku_) +
                           static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j);
  assert(r >= 0 && r < static_cast<std::ptrdiff_t>(ldab_));
  return ab_[static_cast<std::size_t>(r) * n_ + j];
}

double BandMatrix::get(std::size_t i, std::size_t j) const {
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kl_ + ku_) +
                           static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j);
  if (r < 0 || r >= static_cast<std::ptrdiff_t>(ldab_)) return 0.0;
  return ab_[static_cast<std::size_t>(r) * n_ + j];
}

void BandMatrix::clear_row(std::size_t i) {
  const std::size_t j0 = (i > kl_ + ku_) ? i - kl_ - ku_ : 0;
  const std::size_t j1 = std::min(n_ - 1, i + kl_ + ku_);
  for (std::size_t j = j0; j <= j1; ++j) {
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kl_ + ku_) +
                             static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j);
    if (r >= 0 && r < static_cast<std::ptrdiff_t>(ldab_))
      ab_[static_cast<std::size_t>(r) * n_ + j] = 0.0;
  }
}

void BandMatrix::zero() { std::fill(ab_.begin(), ab_.end(), 0.0); }

std::vector<double> BandMatrix::mul(std::span<const double> x) const {
  assert(x.size() == n_);
  std::vector<double> y(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    const std::size_t j0 = (i > kl_) ? i - kl_ : 0;
    const std::size_t j1 = std::min(n_ - 1, i + ku_);
    double s = 0.0;
    for (std::size_t j = j0; j <= j1; ++j) s += get(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> BandMatrix::solve_inplace(std::vector<double> b) {
  assert(b.size() == n_);
  const std::size_t kv = kl_ + ku_;  // row index of the diagonal in band storage
  std::vector<std::size_t> ipiv(n_);

  auto ref = [&](std::size_t i, std::size_t j) -> double& {
    return ab_[(kv + i - j) * n_ + j];  // caller guarantees kv+i-j in range
  };

  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t km = std::min(kl_, n_ - 1 - j);  // subdiagonal count in column j
    // partial pivot among rows j..j+km
    std::size_t jp = 0;
    double pmax = std::fabs(ab_[(kv + 0) * n_ + j]);
    for (std::size_t i = 1; i <= km; ++i) {
      const double v = std::fabs(ab_[(kv + i) * n_ + j]);
      if (v > pmax) {
        pmax = v;
        jp = i;
      }
    }
    ipiv[j] = j + jp;
    if (pmax == 0.0)
      throw NumericalError("band LU: zero pivot at column " + std::to_string(j));
    const std::size_t jmax = std::min(n_ - 1, j + kl_ + ku_);
    if (jp != 0) {
      for (std::size_t c = j; c <= jmax; ++c) {
        const std::ptrdiff_t ra = static_cast<std::ptrdiff_t>(kv + j) - static_cast<std::ptrdiff_t>(c);
        const std::ptrdiff_t rb = ra + static_cast<std::ptrdiff_t>(jp);
        if (ra < 0 || rb >= static_cast<std::ptrdiff_t>(ldab_)) continue;
        std::swap(ab_[static_cast<std::size_t>(ra) * n_ + c],
                  ab_[static_cast<std::size_t>(rb) * n_ + c]);
      }
    }
    const double piv = ref(j, j);
    for (std::size_t i = 1; i <= km; ++i) ab_[(kv + i) * n_ + j] /= piv;
    for (std::size_t c = j + 1; c <= jmax; ++c) {
      const double ajc = ref(j, c);
      if (ajc == 0.0) continue;
      for (std::size_t i = 1; i <= km; ++i) ref(j + i, c) -= ab_[(kv + i) * n_ + j] * ajc;
    }
  }

  // forward elimination on rhs
  for (std::size_t j = 0; j + 1 < n_; ++j) {
    if (ipiv[j] != j) std::swap(b[j], b[ipiv[j]]);
    const std::size_t km = std::min(kl_, n_ - 1 - j);
    for (std::size_t i = 1; i <= km; ++i) b[j + i] -= ab_[(kv + i) * n_ + j] * b[j];
  }
  // back substitution (U has bandwidth kl+ku after pivoting)
  for (std::size_t jj = n_; jj-- > 0;) {
    b[jj] /= ref(jj, jj);
    const std::size_t i0 = (jj > kl_ + ku_) ? jj - kl_ - ku_ : 0;
    for (std::size_t i = i0; i < jj; ++i) b[i] -= ref(i, jj) * b[jj];
  }
  return b;
}

}  // namespace invuq
