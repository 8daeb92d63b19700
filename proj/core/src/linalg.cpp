#include "invuq/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "invuq/errors.hpp"

namespace invuq {

namespace {

double off_diagonal_sum(const Matrix& a) {
  double s = 0.0;
  const std::size_t n = a.rows();
  for (std::size_t p = 0; p + 1 < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) s += std::fabs(a(p, q));
  return s;
}

}  // namespace

EigResult sym_eig(const Matrix& a_in) {
  const std::size_t n = a_in.rows();
  if (n == 0 || a_in.cols() != n) throw NumericalError("sym_eig: matrix must be square");

  const double amax = max_abs(a_in);
  const double sym_tol = 1e-10 * std::max(amax, 1e-300);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(a_in(i, j) - a_in(j, i)) > sym_tol)
        throw NumericalError("sym_eig: symmetry violated at (" + std::to_string(i) + "," +
                             std::to_string(j) + "): |a_ij - a_ji| = " +
                             std::to_string(std::fabs(a_in(i, j) - a_in(j, i))));

  Matrix a = a_in;
  // enforce exact symmetry so rotations stay consistent
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = a(j, i) = m;
    }

  Matrix v = Matrix::identity(n);
  const std::size_t max_sweeps = 64;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    const double off = off_diagonal_sum(a);
    if (off == 0.0) break;
    // threshold from the classical cyclic Jacobi scheme
    const double thresh = (sweep < 3) ? 0.2 * off / static_cast<double>(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::fabs(apq);
        if (sweep > 3 && std::fabs(a(p, p)) + g == std::fabs(a(p, p)) &&
            std::fabs(a(q, q)) + g == std::fabs(a(q, q))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::fabs(apq) <= thresh) continue;
        const double h = a(q, q) - a(p, p);
        double t;
        if (std::fabs(h) + g == std::fabs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double hpq = t * apq;
        a(p, p) -= hpq;
        a(q, q) += hpq;
        a(p, q) = a(q, p) = 0.0;
        auto rotate = [&](Matrix& m, std::size_t i1, std::size_t j1, std::size_t i2,
                          std::size_t j2) {
          const double g1 = m(i1, j1);
          const double g2 = m(i2, j2);
          m(i1, j1) = g1 - s * (g2 + g1 * tau);
          m(i2, j2) = g2 + s * (g1 - g2 * tau);
        };
        for (std::size_t j = 0; j < p; ++j) rotate(a, j, p, j, q);
        for (std::size_t j = p + 1; j < q; ++j) rotate(a, p, j, j, q);
        for (std::size_t j = q + 1; j < n; ++j) rotate(a, p, j, q, j);
        for (std::size_t j = 0; j < n; ++j) rotate(v, j, p, j, q);
      }
    }
    if (sweep + 1 == max_sweeps)
      throw NumericalError("sym_eig: Jacobi did not converge in 64 sweeps");
  }

  // sort descending; stable so exact ties keep original index order
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigResult r;
  r.values.resize(n);
  r.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    r.values[k] = a(src, src);
    // sign convention: largest-magnitude component positive
    std::size_t imax = 0;
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = std::fabs(v(i, src));
      if (av > vmax) {
        vmax = av;
        imax = i;
      }
    }
    const double sign = (v(imax, src) < 0.0) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) r.vectors(i, k) = sign * v(i, src);
  }
  return r;
}

CholResult cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) throw NumericalError("cholesky: matrix must be square");

  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
  double jitter = 0.0;
  const double jitter0 = 1e-10 * std::fabs(trace) / static_cast<double>(n);

  std::size_t bad_pivot = 0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Matrix l(n, n);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = a(i, j);
        if (i == j) s += jitter;
        for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        if (i == j) {
          if (s <= 0.0 || !std::isfinite(s)) {
            ok = false;
            bad_pivot = i;
            break;
          }
          l(i, i) = std::sqrt(s);
        } else {
          l(i, j) = s / l(j, j);
        }
      }
    }
    if (ok) return {std::move(l), jitter};
    jitter = (jitter == 0.0) ? std::max(jitter0, 1e-300) : 2.0 * jitter;
  }
  throw NumericalError("cholesky: not positive definite (pivot " + std::to_string(bad_pivot) +
                       " after max jitter)");
}

std::vector<double> solve_lower(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    double s = x[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

std::vector<double> solve_lower_t(const Matrix& l, std::span<const double> b) {
  const std::size_t n = l.rows();
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t ii = n; ii-- > 0;) {
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
    x[ii] = s / l(ii, ii);
  }
  return x;
}

std::vector<double> solve_spd(const Matrix& a, std::span<const double> b) {
  const CholResult c = cholesky(a);
  return solve_lower_t(c.lower, solve_lower(c.lower, b));
}

}  // namespace invuq
