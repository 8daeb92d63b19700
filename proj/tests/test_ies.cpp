#include <doctest.h>

#include <cmath>

#include "invuq/errors.hpp"
#include "invuq/ies.hpp"

using namespace invuq;

namespace {

PriorDraw gaussian_prior(double mean, double stddev, std::size_t dim) {
  return [mean, stddev, dim](RngStream& s) {
    FieldY y;
    y.v.resize(dim);
    for (auto& v : y.v) v = mean + stddev * s.normal();
    return y;
  };
}

}  // namespace

TEST_SUITE_BEGIN("ies");

TEST_CASE("one lambda=0 iteration reproduces the hand-computed Kalman update") {
  // 2 parameters, 2 observations, linear forward map
  const Matrix g = [] {
    Matrix m(2, 2);
    m(0, 0) = 1.2;
    m(0, 1) = -0.4;
    m(1, 0) = 0.3;
    m(1, 1) = 0.9;
    return m;
  }();
  ForwardMap fwd = [&](const FieldY& y) { return matvec(g, y.v); };
  const std::vector<double> d_obs = {0.8, -0.2};
  const double sigma2 = 0.04;

  IESConfig cfg;
  cfg.n_iterations = 1;
  cfg.lambda0 = 0.0;
  cfg.ensemble_size = 30;
  const RngStream rng(77);
  const IESResult res = run_ies(fwd, gaussian_prior(0.0, 1.0, 2), d_obs, sigma2, cfg, rng);
  REQUIRE(res.accepted_iterations == 1);

  // independent dense-route oracle from the recorded initial state
  const std::size_t n = 30;
  std::vector<std::vector<double>> d(n);
  for (std::size_t j = 0; j < n; ++j) d[j] = matvec(g, res.initial_ensemble[j].v);
  std::vector<double> ymean(2, 0.0), dmean(2, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < 2; ++k) {
      ymean[k] += res.initial_ensemble[j].v[k] / static_cast<double>(n);
      dmean[k] += d[j][k] / static_cast<double>(n);
    }
  double cyd[2][2] = {}, cdd[2][2] = {};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) {
        cyd[a][b] += (res.initial_ensemble[j].v[a] - ymean[a]) * (d[j][b] - dmean[b]) /
                     static_cast<double>(n - 1);
        cdd[a][b] += (d[j][a] - dmean[a]) * (d[j][b] - dmean[b]) / static_cast<double>(n - 1);
      }
  double m[2][2] = {{cdd[0][0] + sigma2, cdd[0][1]}, {cdd[1][0], cdd[1][1] + sigma2}};
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const double minv[2][2] = {{m[1][1] / det, -m[0][1] / det}, {-m[1][0] / det, m[0][0] / det}};
  for (std::size_t j = 0; j < n; ++j) {
    const double r0 = d[j][0] - d_obs[0] - res.obs_perturbations(j, 0);
    const double r1 = d[j][1] - d_obs[1] - res.obs_perturbations(j, 1);
    const double x0 = minv[0][0] * r0 + minv[0][1] * r1;
    const double x1 = minv[1][0] * r0 + minv[1][1] * r1;
    for (std::size_t a = 0; a < 2; ++a) {
      const double expect = res.initial_ensemble[j].v[a] - (cyd[a][0] * x0 + cyd[a][1] * x1);
      CHECK(std::fabs(res.ensemble[j].v[a] - expect) <= 1e-8);
    }
  }
}

TEST_CASE("zero observations return the prior unchanged") {
  IESConfig cfg;
  cfg.n_iterations = 2;
  cfg.ensemble_size = 5;
  ForwardMap fwd = [](const FieldY&) { return std::vector<double>{}; };
  const RngStream rng(5);
  const IESResult res = run_ies(fwd, gaussian_prior(1.0, 0.5, 3), {}, 1.0, cfg, rng);
  CHECK(res.forward_calls == 0);
  REQUIRE(res.ensemble.size() == 5);
  for (std::size_t j = 0; j < 5; ++j) {
    RngStream s = rng.substream(j);
    const FieldY expect = gaussian_prior(1.0, 0.5, 3)(s);
    for (std::size_t k = 0; k < 3; ++k) CHECK(res.ensemble[j].v[k] == expect.v[k]);
  }
}

TEST_CASE("huge damping freezes the ensemble") {
  const Matrix g = Matrix::identity(2);
  ForwardMap fwd = [&](const FieldY& y) { return matvec(g, y.v); };
  IESConfig cfg;
  cfg.n_iterations = 1;
  cfg.lambda0 = 1e12;
  cfg.ensemble_size = 10;
  const IESResult res = run_ies(fwd, gaussian_prior(0.0, 1.0, 2), {1.0, 2.0}, 0.01, cfg,
                                RngStream(9));
  for (std::size_t j = 0; j < 10; ++j)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(std::fabs(res.ensemble[j].v[k] - res.initial_ensemble[j].v[k]) <= 1e-6);
}

TEST_CASE("misfit is non-increasing and calls are accounted exactly") {
  // mildly nonlinear forward map
  ForwardMap fwd = [](const FieldY& y) {
    return std::vector<double>{y.v[0] * y.v[0], y.v[0] + y.v[1], std::tanh(y.v[1])};
  };
  const std::vector<double> d_obs = {1.0, 0.5, 0.3};
  IESConfig cfg;
  cfg.n_iterations = 3;
  cfg.budget = 40;  // floor(40 / 4) = 10 members
  const IESResult res = run_ies(fwd, gaussian_prior(0.5, 0.7, 2), d_obs, 0.04, cfg, RngStream(31));
  CHECK(res.ensemble.size() == 10);
  for (std::size_t i = 1; i < res.phi_history.size(); ++i)
    CHECK(res.phi_history[i] <= res.phi_history[i - 1]);
  CHECK(res.forward_calls ==
        10 * (res.accepted_iterations + 1) + 10 * res.rejected_trials + res.resamples);
  CHECK(res.forward_calls <= cfg.budget);
}

TEST_CASE("forward failure triggers one prior resample then a hard failure") {
  std::size_t calls = 0;
  ForwardMap flaky = [&](const FieldY& y) {
    ++calls;
    if (calls == 2) throw NumericalError("synthetic failure");
    return std::vector<double>{y.v[0]};
  };
  IESConfig cfg;
  cfg.n_iterations = 1;
  cfg.ensemble_size = 4;
  const IESResult res = run_ies(flaky, gaussian_prior(0.0, 1.0, 1), {0.2}, 0.1, cfg, RngStream(7));
  CHECK(res.resamples == 1);

  ForwardMap broken = [&](const FieldY&) -> std::vector<double> {
    throw NumericalError("always fails");
  };
  CHECK_THROWS_AS(run_ies(broken, gaussian_prior(0.0, 1.0, 1), {0.2}, 0.1, cfg, RngStream(7)),
                  NumericalError);
}

TEST_CASE("budget below the minimum is rejected") {
  IESConfig cfg;
  cfg.n_iterations = 3;
  cfg.ensemble_size = 10;
  cfg.budget = 30;  // needs 40
  ForwardMap fwd = [](const FieldY& y) { return y.v; };
  CHECK_THROWS_AS(run_ies(fwd, gaussian_prior(0.0, 1.0, 1), {0.0}, 1.0, cfg, RngStream(1)),
                  ConfigError);
}

TEST_SUITE_END();
