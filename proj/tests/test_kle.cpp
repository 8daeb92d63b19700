#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "invuq/kle.hpp"
#include "invuq/rng.hpp"

using namespace invuq;

namespace {

std::vector<std::vector<double>> random_snapshots(std::size_t n, std::size_t support,
                                                  RngStream& rng) {
  std::vector<std::vector<double>> s(n, std::vector<double>(support));
  for (auto& snap : s) rng.fill_normal(snap);
  return s;
}

double rel_l2(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d2 += (a[i] - b[i]) * (a[i] - b[i]);
    b2 += b[i] * b[i];
  }
  return std::sqrt(d2 / std::max(b2, 1e-300));
}

}  // namespace

TEST_SUITE_BEGIN("kle");

TEST_CASE("identical snapshots give the degenerate basis") {
  std::vector<std::vector<double>> s(5, std::vector<double>{1.0, 2.0, 3.0});
  const KLEBasis b = fit_kle(s, 0.1);
  CHECK(b.degenerate);
  CHECK(b.n_modes() == 0);
  CHECK(b.mean[0] == doctest::Approx(1.0));
  CHECK(b.mean[2] == doctest::Approx(3.0));
  CHECK(retained_energy(b) == doctest::Approx(1.0));
}

TEST_CASE("rtol outside (0,1) is rejected") {
  std::vector<std::vector<double>> s(3, std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(fit_kle(s, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_kle(s, 1.0), std::invalid_argument);
}

TEST_CASE("rank-2 snapshots are reconstructed exactly") {
  RngStream rng(8);
  const std::size_t support = 40;
  std::vector<double> v1(support), v2(support), base(support);
  rng.fill_normal(v1);
  rng.fill_normal(v2);
  rng.fill_normal(base);
  std::vector<std::vector<double>> snaps;
  for (int i = 0; i < 12; ++i) {
    const double a = rng.normal(), b = rng.normal();
    std::vector<double> s = base;
    for (std::size_t r = 0; r < support; ++r) s[r] += a * v1[r] + b * v2[r];
    snaps.push_back(std::move(s));
  }
  const KLEBasis basis = fit_kle(snaps, 1e-12);
  CHECK(basis.n_modes() == 2);
  for (const auto& s : snaps) {
    const std::vector<double> rec = decode(basis, encode(basis, s));
    for (std::size_t r = 0; r < support; ++r) CHECK(std::fabs(rec[r] - s[r]) <= 1e-10);
  }
}

TEST_CASE("orthonormal modes, descending eigenvalues, trace identity") {
  RngStream rng(9);
  const auto snaps = random_snapshots(25, 60, rng);
  const KLEBasis b = fit_kle(snaps, 1e-10);
  for (std::size_t i = 0; i < b.n_modes(); ++i) {
    for (std::size_t j = i; j < b.n_modes(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < b.support(); ++r) s += b.modes(r, i) * b.modes(r, j);
      CHECK(std::fabs(s - (i == j ? 1.0 : 0.0)) <= 1e-8);
    }
    if (i > 0) CHECK(b.eigenvalues[i - 1] >= b.eigenvalues[i]);
  }
  // total energy equals the centered snapshot variance
  double total = 0.0;
  std::vector<double> mean(b.support(), 0.0);
  for (const auto& s : snaps) axpy(1.0, s, mean);
  for (auto& m : mean) m /= static_cast<double>(snaps.size());
  for (const auto& s : snaps)
    for (std::size_t r = 0; r < s.size(); ++r) total += (s[r] - mean[r]) * (s[r] - mean[r]);
  total /= static_cast<double>(snaps.size() - 1);
  CHECK(std::fabs(b.total_energy - total) / total <= 1e-8);
}

TEST_CASE("encode of the mean is zero; single-mode injection is recovered") {
  RngStream rng(12);
  const auto snaps = random_snapshots(15, 30, rng);
  const KLEBasis b = fit_kle(snaps, 1e-10);
  const std::vector<double> zero = encode(b, b.mean);
  for (double v : zero) CHECK(std::fabs(v) <= 1e-10);

  std::vector<double> f = b.mean;
  for (std::size_t r = 0; r < f.size(); ++r) f[r] += std::sqrt(b.eigenvalues[0]) * b.modes(r, 0);
  const std::vector<double> xi = encode(b, f);
  CHECK(xi[0] == doctest::Approx(1.0).epsilon(1e-9));
  for (std::size_t k = 1; k < xi.size(); ++k) CHECK(std::fabs(xi[k]) <= 1e-9);
}

TEST_CASE("decode basics: zero coeffs, idempotence, affine linearity") {
  RngStream rng(13);
  const auto snaps = random_snapshots(10, 20, rng);
  const KLEBasis b = fit_kle(snaps, 1e-10);

  const std::vector<double> at_zero = decode(b, std::vector<double>{});
  for (std::size_t r = 0; r < b.support(); ++r) CHECK(at_zero[r] == doctest::Approx(b.mean[r]));

  // in-span field: any snapshot at full rank
  const std::vector<double> rec = decode(b, encode(b, snaps[3]));
  for (std::size_t r = 0; r < b.support(); ++r) CHECK(std::fabs(rec[r] - snaps[3][r]) <= 1e-10);

  std::vector<double> a(b.n_modes()), c(b.n_modes()), apc(b.n_modes());
  rng.fill_normal(a);
  rng.fill_normal(c);
  for (std::size_t k = 0; k < a.size(); ++k) apc[k] = a[k] + c[k];
  const auto da = decode(b, a), dc = decode(b, c), dsum = decode(b, apc);
  for (std::size_t r = 0; r < b.support(); ++r)
    CHECK(dsum[r] == doctest::Approx(da[r] + dc[r] - b.mean[r]).epsilon(1e-10));
}

TEST_CASE("retained energy: full basis is 1, half-split spectrum keeps 0.5") {
  RngStream rng(14);
  const auto snaps = random_snapshots(12, 18, rng);
  const KLEBasis full = fit_kle(snaps, 1e-10);
  CHECK(retained_energy(full) >= 1.0 - 1e-9);

  // two orthogonal directions with equal energy; keep one of two modes
  std::vector<std::vector<double>> two;
  std::vector<double> e1(6, 0.0), e2(6, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  for (const double s : {1.0, -1.0}) {
    std::vector<double> a(6, 0.0), b2(6, 0.0);
    for (std::size_t r = 0; r < 6; ++r) {
      a[r] = s * e1[r];
      b2[r] = s * e2[r];
    }
    two.push_back(a);
    two.push_back(b2);
  }
  const KLEBasis half = fit_kle(two, 0.6);
  CHECK(half.n_modes() == 1);
  CHECK(retained_energy(half) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("projection is the best rank-N approximation") {
  RngStream rng(15);
  const auto snaps = random_snapshots(20, 25, rng);
  const KLEBasis b = fit_kle(snaps, 0.3);  // truncated basis
  const auto& s = snaps[5];
  const std::vector<double> xi = encode(b, s);
  const double best = rel_l2(decode(b, xi), s);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> perturbed = xi;
    for (auto& v : perturbed) v += 0.1 * rng.normal();
    CHECK(rel_l2(decode(b, perturbed), s) >= best - 1e-12);
  }
}

TEST_CASE("held-out reconstruction respects the energy bound") {
  // snapshots drawn from a fixed low-dimensional random process
  RngStream rng(16);
  const std::size_t support = 50, n_latent = 6;
  Matrix dirs(n_latent, support);
  for (auto& v : dirs.flat()) v = rng.normal();
  std::vector<double> weights = {2.0, 1.5, 1.0, 0.6, 0.3, 0.1};
  auto draw = [&](RngStream& r) {
    std::vector<double> s(support, 0.0);
    for (std::size_t k = 0; k < n_latent; ++k) {
      const double a = weights[k] * r.normal();
      for (std::size_t c = 0; c < support; ++c) s[c] += a * dirs(k, c);
    }
    return s;
  };
  std::vector<std::vector<double>> train;
  for (int i = 0; i < 60; ++i) train.push_back(draw(rng));
  const double rtol = 0.05;
  const KLEBasis b = fit_kle(train, rtol);
  // aggregate energy bound: the truncation rule caps the summed tail energy
  double err2 = 0.0, norm2 = 0.0;
  for (const auto& s : train) {
    const std::vector<double> rec = decode(b, encode(b, s));
    for (std::size_t r = 0; r < s.size(); ++r) {
      err2 += (rec[r] - s[r]) * (rec[r] - s[r]);
      norm2 += s[r] * s[r];
    }
  }
  CHECK(std::sqrt(err2 / norm2) <= std::sqrt(rtol) + 0.05);
}

TEST_SUITE_END();
