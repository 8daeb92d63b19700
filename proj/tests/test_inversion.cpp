#include <doctest.h>

#include <cmath>

#include "invuq/errors.hpp"
#include "invuq/inversion.hpp"
#include "invuq/linalg.hpp"
#include "test_util.hpp"

using namespace invuq;

namespace {

KLEBasis identity_basis(std::size_t n) {
  KLEBasis b;
  b.mean.assign(n, 0.0);
  b.modes = Matrix::identity(n);
  b.eigenvalues.assign(n, 1.0);
  b.total_energy = static_cast<double>(n);
  b.rtol = 1e-16;
  return b;
}

SurrogateNet linear_net(const Matrix& g) {
  SurrogateNet net;
  net.widths = {g.cols(), g.rows()};
  net.activation = Activation::linear;
  net.theta.assign(net.param_count(), 0.0);
  std::copy(g.flat().begin(), g.flat().end(), net.theta.begin());
  return net;
}

OptimizerConfig tight_opt() {
  OptimizerConfig o;
  o.step = 0.05;
  o.max_iters = 6000;
  o.grad_tol = 1e-10;
  return o;
}

struct LinearSetup {
  Matrix g;
  std::vector<double> d;
  SurrogateNet net;
  KLEBasis y_basis, u_basis;
  Observations obs;
  NoiseModel noise;
};

LinearSetup make_linear(std::size_t p, std::size_t m, double sigma2, RngStream& rng) {
  LinearSetup s;
  s.g = Matrix(m, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  for (auto& v : s.g.flat()) v = scale * rng.normal();
  std::vector<double> xi_true(p);
  rng.fill_normal(xi_true);
  s.d = matvec(s.g, xi_true);
  for (auto& v : s.d) v += std::sqrt(sigma2) * rng.normal();
  s.net = linear_net(s.g);
  s.y_basis = identity_basis(p);
  s.u_basis = identity_basis(m);
  for (std::size_t i = 0; i < m; ++i) s.obs.u.push_back({i, s.d[i]});
  s.noise.sigma2_us = sigma2;
  s.noise.sigma2_xi = 1.0;
  return s;
}

// analytic Gaussian posterior for the linear setup
void analytic_posterior(const LinearSetup& s, std::vector<double>& mean, Matrix& cov) {
  const std::size_t p = s.g.cols();
  Matrix h = matmul_tn(s.g, s.g);
  for (auto& v : h.flat()) v /= s.noise.sigma2_us;
  for (std::size_t i = 0; i < p; ++i) h(i, i) += 1.0;
  const Matrix l = cholesky(h).lower;
  cov = Matrix(p, p);
  std::vector<double> e(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    e[j] = 1.0;
    const std::vector<double> x = solve_lower_t(l, solve_lower(l, e));
    for (std::size_t i = 0; i < p; ++i) cov(i, j) = x[i];
    e[j] = 0.0;
  }
  std::vector<double> rhs = matvec_t(s.g, s.d);
  for (auto& v : rhs) v /= s.noise.sigma2_us;
  mean = matvec(cov, rhs);
}

}  // namespace

TEST_SUITE_BEGIN("inversion");

TEST_CASE("zero observations give the prior mode") {
  const KLEBasis basis = identity_basis(4);
  SurrogateNet net = linear_net(Matrix(3, 4));
  Observations obs;  // empty
  NoiseModel noise;
  noise.sigma2_xi = 1.0;
  RngStream rng(3);
  const MapResult r = map_estimate(obs, noise, net, basis, identity_basis(3), rng, tight_opt());
  for (double v : r.xi) CHECK(std::fabs(v) <= 1e-6);
}

TEST_CASE("noise-free observations with an exact surrogate recover the truth") {
  RngStream rng(5);
  const std::size_t p = 6;
  Matrix g(p, p);  // well conditioned square map
  for (std::size_t i = 0; i < p; ++i) {
    g(i, i) = 2.0;
    for (std::size_t j = 0; j < p; ++j) g(i, j) += 0.2 * rng.normal();
  }
  std::vector<double> xi_true(p);
  rng.fill_normal(xi_true);
  const std::vector<double> d = matvec(g, xi_true);

  Observations obs;
  for (std::size_t i = 0; i < p; ++i) obs.u.push_back({i, d[i]});
  NoiseModel noise;
  noise.sigma2_us = 1e-8;  // near noise-free
  noise.sigma2_xi = 25.0;  // weak prior
  RngStream r2(6);
  const MapResult r =
      map_estimate(obs, noise, linear_net(g), identity_basis(p), identity_basis(p), r2, tight_opt());
  for (std::size_t i = 0; i < p; ++i) CHECK(std::fabs(r.xi[i] - xi_true[i]) <= 1e-3);
}

TEST_CASE("MAP equals the normal-equations solution in the linear-Gaussian case") {
  RngStream rng(7);
  LinearSetup s = make_linear(8, 6, 1e-2, rng);
  std::vector<double> mean;
  Matrix cov;
  analytic_posterior(s, mean, cov);
  RngStream r2(8);
  const MapResult r =
      map_estimate(s.obs, s.noise, s.net, s.y_basis, s.u_basis, r2, tight_opt());
  CHECK(max_rel_err(r.xi, mean) <= 1e-5);
}

TEST_CASE("latent loss gradient matches central differences for all variants") {
  RngStream rng(9);
  LinearSetup s = make_linear(5, 4, 1e-2, rng);
  // add a y observation to exercise that term
  s.obs.y.push_back({2, 0.4});
  s.noise.sigma2_ys = 0.5;
  // tanh net so the u-term is genuinely nonlinear
  SurrogateNet net;
  net.widths = {5, 7, 4};
  net.theta.resize(net.param_count());
  for (auto& v : net.theta) v = 0.4 * rng.normal();

  const LatentObsOperator op(s.obs, s.y_basis, s.u_basis);
  std::vector<double> alpha_u(s.obs.u.size()), alpha_y(s.obs.y.size()), beta(5);
  rng.fill_normal(alpha_u);
  rng.fill_normal(alpha_y);
  rng.fill_normal(beta);

  for (int variant = 0; variant < 3; ++variant) {
    std::span<const double> au = (variant == 0) ? std::span<const double>{} : alpha_u;
    std::span<const double> ay = (variant == 0) ? std::span<const double>{} : alpha_y;
    std::span<const double> b = (variant == 0) ? std::span<const double>{} : beta;
    const double gu = (variant == 2) ? 1.0 / s.noise.tilde_u() : 1.0 / s.noise.total_u();
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> xi(5);
      rng.fill_normal(xi);
      std::vector<double> grad(5);
      latent_loss(op, net, gu, 2.0, 1.0, au, ay, b, xi, grad);
      auto scalar = [&](std::span<const double> x) {
        std::vector<double> tmp(5);
        return latent_loss(op, net, gu, 2.0, 1.0, au, ay, b, x, tmp);
      };
      CHECK(max_rel_err(grad, fd_gradient(scalar, xi)) <= 1e-5);
    }
  }
}

TEST_CASE("gaussian sampler: tiny noise collapses to the MAP point") {
  RngStream rng(11);
  LinearSetup s = make_linear(4, 4, 1e-2, rng);
  NoiseModel tight = s.noise;
  tight.sigma2_us = 1e-12;
  // the randomized draws shrink with the variances; prior beta still spreads,
  // but the data term dominates so samples concentrate near the weighted MAP
  RngStream r2(12);
  const MapResult map =
      map_estimate(s.obs, tight, s.net, s.y_basis, s.u_basis, r2, tight_opt());
  const PosteriorEnsemble post = sample_posterior_gaussian(
      s.obs, tight, s.net, s.y_basis, s.u_basis, 8, RngStream(13), tight_opt());
  for (std::size_t i = 0; i < post.size(); ++i)
    for (std::size_t k = 0; k < post.dim(); ++k)
      CHECK(std::fabs(post.samples(i, k) - map.xi[k]) <= 1e-3);
}

TEST_CASE("gaussian sampler is reproducible and roughly calibrated") {
  RngStream rng(15);
  LinearSetup s = make_linear(4, 3, 1e-2, rng);
  const PosteriorEnsemble a = sample_posterior_gaussian(s.obs, s.noise, s.net, s.y_basis,
                                                        s.u_basis, 6, RngStream(1), tight_opt());
  const PosteriorEnsemble b = sample_posterior_gaussian(s.obs, s.noise, s.net, s.y_basis,
                                                        s.u_basis, 6, RngStream(1), tight_opt());
  for (std::size_t k = 0; k < a.samples.flat().size(); ++k)
    CHECK(a.samples.flat()[k] == b.samples.flat()[k]);

  // loose covariance smoke check at 400 samples (the acceptance suite pins
  // the tight tolerance at 2000)
  const PosteriorEnsemble post = sample_posterior_gaussian(
      s.obs, s.noise, s.net, s.y_basis, s.u_basis, 400, RngStream(2), tight_opt());
  std::vector<double> mean;
  Matrix cov;
  analytic_posterior(s, mean, cov);
  std::vector<double> emp_mean(4, 0.0);
  for (std::size_t i = 0; i < post.size(); ++i) axpy(1.0, post.samples.row(i), emp_mean);
  for (auto& v : emp_mean) v /= 400.0;
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(std::fabs(emp_mean[k] - mean[k]) <= 4.0 * std::sqrt(cov(k, k) / 400.0));
}

TEST_CASE("total sampler with identical members equals the gaussian sampler") {
  RngStream rng(17);
  LinearSetup s = make_linear(5, 4, 1e-2, rng);
  SurrogateEnsemble ens;
  ens.kind = EnsembleKind::randomized;
  for (int i = 0; i < 4; ++i) ens.members.push_back(s.net);
  // sigma2_uhat = 0 so the gaussian sampler's total variance equals tilde
  const PosteriorEnsemble total = sample_posterior_total(s.obs, s.noise, ens, s.y_basis,
                                                         s.u_basis, RngStream(4), tight_opt());
  const PosteriorEnsemble gauss = sample_posterior_gaussian(
      s.obs, s.noise, s.net, s.y_basis, s.u_basis, 4, RngStream(4), tight_opt());
  for (std::size_t k = 0; k < total.samples.flat().size(); ++k)
    CHECK(total.samples.flat()[k] == gauss.samples.flat()[k]);
  CHECK(total.method == "ri");
}

TEST_CASE("total sampler requires the randomized ensemble kind") {
  RngStream rng(18);
  LinearSetup s = make_linear(3, 2, 1e-2, rng);
  SurrogateEnsemble ens;
  ens.kind = EnsembleKind::deep_ensemble;
  ens.members = {s.net, s.net};
  CHECK_THROWS_AS(sample_posterior_total(s.obs, s.noise, ens, s.y_basis, s.u_basis, RngStream(1),
                                         tight_opt()),
                  ConfigError);
}

TEST_CASE("DE inversion: identical members coincide with the pinned MAP") {
  RngStream rng(19);
  LinearSetup s = make_linear(4, 3, 1e-2, rng);
  SurrogateEnsemble ens;
  ens.kind = EnsembleKind::deep_ensemble;
  for (int i = 0; i < 3; ++i) ens.members.push_back(s.net);
  const RngStream root(5);
  const PosteriorEnsemble post =
      de_inverse(s.obs, s.noise, ens, s.y_basis, s.u_basis, root, tight_opt());
  CHECK(post.method == "de");
  // all members identical -> identical samples
  for (std::size_t i = 1; i < post.size(); ++i)
    for (std::size_t k = 0; k < post.dim(); ++k)
      CHECK(post.samples(i, k) == post.samples(0, k));
  // the shared initialization is the first prior draw of substream(0)
  RngStream init_stream = root.substream(0);
  const MapResult map =
      map_estimate(s.obs, s.noise, s.net, s.y_basis, s.u_basis, init_stream, tight_opt());
  for (std::size_t k = 0; k < post.dim(); ++k)
    CHECK(post.samples(0, k) == doctest::Approx(map.xi[k]).epsilon(1e-12));
}

TEST_CASE("prior recovery: zero observations reproduce the latent prior") {
  const std::size_t p = 3;
  SurrogateNet net = linear_net(Matrix(2, p));
  Observations obs;
  NoiseModel noise;
  noise.sigma2_xi = 1.0;
  const std::size_t n = 3000;
  const PosteriorEnsemble post = sample_posterior_gaussian(
      obs, noise, net, identity_basis(p), identity_basis(2), n, RngStream(6), tight_opt());
  // with no data the minimizer is exactly beta ~ N(0, I)
  for (std::size_t k = 0; k < p; ++k) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += post.samples(i, k);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += std::pow(post.samples(i, k) - mean, 2);
    var /= static_cast<double>(n - 1);
    CHECK(std::fabs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::fabs(var - 1.0) <= 0.15);
  }
}

TEST_CASE("fullspace sampler: conjugate posterior with a correlated prior") {
  RngStream rng(21);
  const std::size_t dim = 5, m = 3;
  Matrix g(m, dim);
  for (auto& v : g.flat()) v = rng.normal();
  // random SPD prior covariance and nonzero mean
  Matrix b(dim, dim);
  for (auto& v : b.flat()) v = rng.normal();
  Matrix c_prior = matmul_nt(b, b);
  for (std::size_t i = 0; i < dim; ++i) c_prior(i, i) += 0.5;
  const Matrix l_prior = cholesky(c_prior).lower;
  FieldY prior_mean{std::vector<double>(dim, 0.3)};

  std::vector<double> y_true(dim);
  rng.fill_normal(y_true);
  const double sigma2 = 4e-2;
  std::vector<double> d = matvec(g, y_true);
  for (auto& v : d) v += std::sqrt(sigma2) * rng.normal();

  FieldSurrogateMap smap;
  smap.value = [&](std::span<const double> y) { return matvec(g, y); };
  smap.vjp = [&](std::span<const double>, std::span<const double> w) { return matvec_t(g, w); };

  Observations obs;
  for (std::size_t i = 0; i < m; ++i) obs.u.push_back({i, d[i]});
  NoiseModel noise;
  noise.sigma2_us = sigma2;

  OptimizerConfig opt = tight_opt();
  opt.max_iters = 8000;
  const std::size_t n = 1500;
  const std::vector<FieldY> samples =
      sample_posterior_fullspace(obs, noise, smap, prior_mean, l_prior, n, RngStream(9), opt);

  // analytic posterior: C = (G^T G / s2 + Cp^-1)^-1, m = C (G^T d / s2 + Cp^-1 m0)
  Matrix cp_inv(dim, dim);
  {
    std::vector<double> e(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      e[j] = 1.0;
      const std::vector<double> x = solve_lower_t(l_prior, solve_lower(l_prior, e));
      for (std::size_t i = 0; i < dim; ++i) cp_inv(i, j) = x[i];
      e[j] = 0.0;
    }
  }
  Matrix h = matmul_tn(g, g);
  for (auto& v : h.flat()) v /= sigma2;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) h(i, j) += cp_inv(i, j);
  std::vector<double> rhs = matvec_t(g, d);
  for (auto& v : rhs) v /= sigma2;
  const std::vector<double> pm = matvec(cp_inv, prior_mean.v);
  for (std::size_t i = 0; i < dim; ++i) rhs[i] += pm[i];
  const std::vector<double> post_mean = solve_spd(h, rhs);

  std::vector<double> emp(dim, 0.0);
  for (const auto& s : samples) axpy(1.0, s.v, emp);
  for (auto& v : emp) v /= static_cast<double>(n);
  const Matrix l_h = cholesky(h).lower;
  for (std::size_t k = 0; k < dim; ++k) {
    // posterior variance of coordinate k from H^-1
    std::vector<double> e(dim, 0.0);
    e[k] = 1.0;
    const std::vector<double> col = solve_lower_t(l_h, solve_lower(l_h, e));
    const double se = std::sqrt(col[k] / static_cast<double>(n));
    CHECK(std::fabs(emp[k] - post_mean[k]) <= 4.0 * se);
  }
}

TEST_CASE("fullspace sampler: zero observations reproduce the correlated prior") {
  RngStream rng(23);
  const std::size_t dim = 4;
  Matrix b(dim, dim);
  for (auto& v : b.flat()) v = rng.normal();
  Matrix c_prior = matmul_nt(b, b);
  for (std::size_t i = 0; i < dim; ++i) c_prior(i, i) += 0.5;
  const Matrix l_prior = cholesky(c_prior).lower;
  FieldY prior_mean{std::vector<double>{1.0, -1.0, 0.5, 0.0}};

  FieldSurrogateMap smap;
  smap.value = [](std::span<const double>) { return std::vector<double>{}; };
  smap.vjp = [](std::span<const double> y, std::span<const double>) {
    return std::vector<double>(y.size(), 0.0);
  };
  Observations obs;
  NoiseModel noise;
  const std::size_t n = 2000;
  const std::vector<FieldY> samples =
      sample_posterior_fullspace(obs, noise, smap, prior_mean, l_prior, n, RngStream(3),
                                 tight_opt());
  std::vector<double> emp(dim, 0.0);
  for (const auto& s : samples) axpy(1.0, s.v, emp);
  for (auto& v : emp) v /= static_cast<double>(n);
  Matrix cov(dim, dim);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        cov(i, j) += (s.v[i] - emp[i]) * (s.v[j] - emp[j]);
  for (auto& v : cov.flat()) v /= static_cast<double>(n - 1);
  for (std::size_t k = 0; k < dim; ++k)
    CHECK(std::fabs(emp[k] - prior_mean.v[k]) <=
          4.0 * std::sqrt(c_prior(k, k) / static_cast<double>(n)));
  Matrix diff = cov;
  for (std::size_t k = 0; k < diff.flat().size(); ++k) diff.flat()[k] -= c_prior.flat()[k];
  CHECK(frobenius_norm(diff) / frobenius_norm(c_prior) <= 0.20);
}

TEST_CASE("posterior field statistics") {
  RngStream rng(25);
  std::vector<std::vector<double>> snaps;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> s(10);
    rng.fill_normal(s);
    snaps.push_back(s);
  }
  const KLEBasis basis = fit_kle(snaps, 1e-10);

  PosteriorEnsemble zeros;
  zeros.samples = Matrix(2, basis.n_modes());
  zeros.method = "ri";
  const FieldStats st0 = posterior_field_stats(zeros, basis);
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(st0.mean[r] == doctest::Approx(basis.mean[r]));
    CHECK(st0.variance[r] == 0.0);
  }

  PosteriorEnsemble pm;
  pm.samples = Matrix(2, basis.n_modes());
  pm.samples(0, 0) = 1.0;
  pm.samples(1, 0) = -1.0;
  const FieldStats st1 = posterior_field_stats(pm, basis);
  for (std::size_t r = 0; r < 10; ++r) {
    const double expect = 2.0 * basis.eigenvalues[0] * basis.modes(r, 0) * basis.modes(r, 0);
    CHECK(st1.variance[r] == doctest::Approx(expect).epsilon(1e-10));
  }

  PosteriorEnsemble swapped = pm;
  swapped.samples(0, 0) = -1.0;
  swapped.samples(1, 0) = 1.0;
  const FieldStats st2 = posterior_field_stats(swapped, basis);
  for (std::size_t r = 0; r < 10; ++r) {
    CHECK(st2.mean[r] == doctest::Approx(st1.mean[r]));
    CHECK(st2.variance[r] == doctest::Approx(st1.variance[r]));
  }
}

TEST_CASE("gaussian log likelihood") {
  const KLEBasis u_basis = identity_basis(1);
  const KLEBasis y_basis = identity_basis(1);
  SurrogateNet net = linear_net(Matrix::identity(1));
  Observations obs;
  NoiseModel noise;
  noise.sigma2_us = 1.0;
  noise.sigma2_xi = 1.0;

  // perfect fit, one observation, unit variance
  obs.u.push_back({0, 0.5});
  const std::vector<double> xi = {0.5};
  const double ll = gaussian_log_likelihood(obs, noise, net, y_basis, u_basis, xi);
  CHECK(ll == doctest::Approx(-0.5 * std::log(2.0 * 3.14159265358979323846)).epsilon(1e-12));

  // N observations with unit variance: -N/2 log(2 pi) - ||r||^2 / 2
  const KLEBasis u3 = identity_basis(3);
  Matrix g(3, 1);
  g(0, 0) = g(1, 0) = g(2, 0) = 1.0;
  SurrogateNet net3 = linear_net(g);
  Observations obs3;
  obs3.u = {{0, 1.0}, {1, 2.0}, {2, 3.0}};
  const std::vector<double> xi3 = {1.5};
  const double ll3 = gaussian_log_likelihood(obs3, noise, net3, y_basis, u3, xi3);
  const double r2 = 0.25 + 0.25 + 2.25;
  CHECK(ll3 == doctest::Approx(-1.5 * std::log(2.0 * 3.14159265358979323846) - 0.5 * r2)
                   .epsilon(1e-12));

  // brute-force product of univariate normal densities
  double brute = 0.0;
  const std::vector<double> preds = {1.5, 1.5, 1.5};
  const std::vector<double> vals = {1.0, 2.0, 3.0};
  for (int i = 0; i < 3; ++i)
    brute += std::log(1.0 / std::sqrt(2.0 * 3.14159265358979323846) *
                      std::exp(-0.5 * std::pow(preds[i] - vals[i], 2)));
  CHECK(ll3 == doctest::Approx(brute).epsilon(1e-12));

  NoiseModel zero;
  zero.sigma2_us = 0.0;
  CHECK_THROWS_AS(gaussian_log_likelihood(obs3, zero, net3, y_basis, u3, xi3),
                  std::invalid_argument);
}

TEST_CASE("generate_measurements noise statistics and determinism") {
  Grid g = Grid::regular(4, 3, 1.0, 1.0);
  FlowProblem p;
  p.grid = g;
  p.initial_head.assign(g.n_active(), 5.0);
  p.dt.assign(3, 1.0);
  p.recharge.assign(3, 0.0);
  const FieldY y{std::vector<double>(g.n_active(), 0.0)};
  const FieldU u = solve(p, y);
  ObsSpec spec;
  spec.cells = {g.cell_id(1, 1)};
  spec.times = {p.time_of_step(1)};

  RngStream rng0(1);
  const Observations exact = generate_measurements(u, p, spec, 0.0, rng0);
  const auto a = static_cast<std::size_t>(g.active_of_cell[g.cell_id(1, 1)]);
  CHECK(exact.u[0].value == u.at(1, a));
  CHECK(exact.u[0].row == 1 * g.n_active() + a);

  RngStream rng1(2), rng2(2);
  const Observations o1 = generate_measurements(u, p, spec, 1e-2, rng1);
  const Observations o2 = generate_measurements(u, p, spec, 1e-2, rng2);
  CHECK(o1.u[0].value == o2.u[0].value);

  // empirical variance over many draws within 3% (one point, 1e5 draws)
  RngStream rng3(3);
  const double s2 = 1e-2;
  double sum = 0.0, sum2 = 0.0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    const Observations o = generate_measurements(u, p, spec, s2, rng3);
    const double eps = o.u[0].value - u.at(1, a);
    sum += eps;
    sum2 += eps * eps;
  }
  const double var = sum2 / static_cast<double>(n) - std::pow(sum / static_cast<double>(n), 2);
  CHECK(std::fabs(var - s2) / s2 <= 0.03);
}

TEST_SUITE_END();
