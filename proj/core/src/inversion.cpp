#include "invuq/inversion.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "invuq/errors.hpp"
#include "invuq/linalg.hpp"

namespace invuq {

LatentObsOperator::LatentObsOperator(const Observations& obs, const KLEBasis& y_basis,
                                     const KLEBasis& u_basis) {
  std::vector<std::size_t> urows, yrows;
  urows.reserve(obs.u.size());
  for (const auto& o : obs.u) {
    if (o.row >= u_basis.support()) throw ConfigError("observation row outside u support");
    urows.push_back(o.row);
    u_values.push_back(o.value);
  }
  for (const auto& o : obs.y) {
    if (o.row >= y_basis.support()) throw ConfigError("observation row outside y support");
    yrows.push_back(o.row);
    y_values.push_back(o.value);
  }
  u_map = scaled_modes_rows(u_basis, urows);
  y_map = scaled_modes_rows(y_basis, yrows);
  u_mean.resize(urows.size());
  for (std::size_t i = 0; i < urows.size(); ++i) u_mean[i] = u_basis.mean[urows[i]];
  y_mean.resize(yrows.size());
  for (std::size_t i = 0; i < yrows.size(); ++i) y_mean[i] = y_basis.mean[yrows[i]];
}

double latent_loss(const LatentObsOperator& op, const SurrogateNet& net, double gamma_u,
                   double gamma_y, double gamma_xi, std::span<const double> alpha_u,
                   std::span<const double> alpha_y, std::span<const double> beta,
                   std::span<const double> xi, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;

  const std::size_t nu = op.u_values.size();
  if (nu > 0) {
    NetTrace trace;
    const std::vector<double> eta = net_forward_trace(net, xi, trace);
    std::vector<double> r = matvec(op.u_map, eta);
    for (std::size_t i = 0; i < nu; ++i) {
      r[i] += op.u_mean[i] - op.u_values[i];
      if (!alpha_u.empty()) r[i] -= alpha_u[i];
      loss += 0.5 * gamma_u * r[i] * r[i];
    }
    std::vector<double> g_eta = matvec_t(op.u_map, r);
    for (auto& g : g_eta) g *= gamma_u;
    const std::vector<double> gx = net_input_vjp(net, trace, g_eta);
    axpy(1.0, gx, grad);
  }

  const std::size_t ny = op.y_values.size();
  if (ny > 0) {
    std::vector<double> r = matvec(op.y_map, xi);
    for (std::size_t i = 0; i < ny; ++i) {
      r[i] += op.y_mean[i] - op.y_values[i];
      if (!alpha_y.empty()) r[i] -= alpha_y[i];
      loss += 0.5 * gamma_y * r[i] * r[i];
    }
    const std::vector<double> gy = matvec_t(op.y_map, r);
    axpy(gamma_y, gy, grad);
  }

  for (std::size_t k = 0; k < xi.size(); ++k) {
    const double d = xi[k] - (beta.empty() ? 0.0 : beta[k]);
    loss += 0.5 * gamma_xi * d * d;
    grad[k] += gamma_xi * d;
  }
  return loss;
}

namespace {

void check_noise(const Observations& obs, double sigma2_u_variant, const NoiseModel& noise) {
  if (!obs.u.empty() && sigma2_u_variant <= 0.0)
    throw ConfigError("inversion: u observations present but their total variance is zero");
  if (!obs.y.empty() && noise.sigma2_ys <= 0.0)
    throw ConfigError("inversion: y observations present but sigma2_ys is zero");
  if (noise.sigma2_xi <= 0.0) throw ConfigError("inversion: sigma2_xi must be positive");
}

struct Draws {
  std::vector<double> alpha_u, alpha_y, beta;
};

Draws draw_noise(RngStream& rng, std::size_t nu, std::size_t ny, std::size_t nxi,
                 double s2_u, double s2_y, double s2_xi) {
  Draws d;
  d.alpha_u.resize(nu);
  for (auto& v : d.alpha_u) v = std::sqrt(s2_u) * rng.normal();
  d.alpha_y.resize(ny);
  for (auto& v : d.alpha_y) v = std::sqrt(s2_y) * rng.normal();
  d.beta.resize(nxi);
  for (auto& v : d.beta) v = std::sqrt(s2_xi) * rng.normal();
  return d;
}

SampleDiag to_diag(const MinimizeResult& r) {
  return {r.value, r.iterations, r.status == MinimizeStatus::converged};
}

MinimizeResult minimize_latent(const LatentObsOperator& op, const SurrogateNet& net,
                               double gamma_u, double gamma_y, double gamma_xi,
                               const Draws& draws, std::span<const double> x0,
                               const OptimizerConfig& opt) {
  GradObjective f = [&](std::span<const double> x, std::span<double> g) {
    return latent_loss(op, net, gamma_u, gamma_y, gamma_xi, draws.alpha_u, draws.alpha_y,
                       draws.beta, x, g);
  };
  MinimizeResult r = minimize(f, x0, opt);
  if (r.status == MinimizeStatus::diverged)
    throw NumericalError("inversion: minimization diverged at iteration " +
                         std::to_string(r.fail_iter));
  return r;
}

}  // namespace

MapResult map_estimate(const Observations& obs, const NoiseModel& noise, const SurrogateNet& net,
                       const KLEBasis& y_basis, const KLEBasis& u_basis, RngStream& rng,
                       const OptimizerConfig& opt) {
  check_noise(obs, noise.total_u(), noise);
  const LatentObsOperator op(obs, y_basis, u_basis);
  const std::size_t nxi = net.widths.front();
  const double gu = obs.u.empty() ? 0.0 : 1.0 / noise.total_u();
  const double gy = obs.y.empty() ? 0.0 : 1.0 / noise.sigma2_ys;
  const double gxi = 1.0 / noise.sigma2_xi;

  std::vector<double> x0(nxi);
  for (auto& v : x0) v = std::sqrt(noise.sigma2_xi) * rng.normal();
  const Draws none;
  MinimizeResult r = minimize_latent(op, net, gu, gy, gxi, none, x0, opt);
  return {std::move(r.x), to_diag(r)};
}

PosteriorEnsemble sample_posterior_gaussian(const Observations& obs, const NoiseModel& noise,
                                            const SurrogateNet& net, const KLEBasis& y_basis,
                                            const KLEBasis& u_basis, std::size_t n_ens,
                                            const RngStream& rng, const OptimizerConfig& opt) {
  if (n_ens < 2) throw ConfigError("sample_posterior_gaussian: n_ens must be >= 2");
  check_noise(obs, noise.total_u(), noise);
  const LatentObsOperator op(obs, y_basis, u_basis);
  const std::size_t nxi = net.widths.front();
  const double s2u = noise.total_u();
  const double gu = obs.u.empty() ? 0.0 : 1.0 / s2u;
  const double gy = obs.y.empty() ? 0.0 : 1.0 / noise.sigma2_ys;
  const double gxi = 1.0 / noise.sigma2_xi;

  PosteriorEnsemble post;
  post.method = "gauss";
  post.samples = Matrix(n_ens, nxi);
  post.diag.resize(n_ens);
  for (std::size_t i = 0; i < n_ens; ++i) {
    RngStream stream = rng.substream(i);
    const Draws d = draw_noise(stream, obs.u.size(), obs.y.size(), nxi, s2u, noise.sigma2_ys,
                               noise.sigma2_xi);
    MinimizeResult r;
    try {
      r = minimize_latent(op, net, gu, gy, gxi, d, d.beta, opt);
    } catch (const NumericalError& e) {
      throw NumericalError("sample " + std::to_string(i) + ": " + e.what());
    }
    std::copy(r.x.begin(), r.x.end(), post.samples.row(i).begin());
    post.diag[i] = to_diag(r);
  }
  return post;
}

PosteriorEnsemble sample_posterior_total(const Observations& obs, const NoiseModel& noise,
                                         const SurrogateEnsemble& ensemble,
                                         const KLEBasis& y_basis, const KLEBasis& u_basis,
                                         const RngStream& rng, const OptimizerConfig& opt) {
  if (ensemble.kind != EnsembleKind::randomized)
    throw ConfigError("sample_posterior_total: requires a randomized surrogate ensemble");
  const double s2u = noise.tilde_u();
  check_noise(obs, s2u, noise);
  const LatentObsOperator op(obs, y_basis, u_basis);
  const std::size_t nxi = ensemble.members.front().widths.front();
  const double gu = obs.u.empty() ? 0.0 : 1.0 / s2u;
  const double gy = obs.y.empty() ? 0.0 : 1.0 / noise.sigma2_ys;
  const double gxi = 1.0 / noise.sigma2_xi;

  PosteriorEnsemble post;
  post.method = "ri";
  post.samples = Matrix(ensemble.size(), nxi);
  post.diag.resize(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    RngStream stream = rng.substream(i);  // pairing: member i <-> noise draws i
    const Draws d =
        draw_noise(stream, obs.u.size(), obs.y.size(), nxi, s2u, noise.sigma2_ys, noise.sigma2_xi);
    MinimizeResult r;
    try {
      r = minimize_latent(op, ensemble.members[i], gu, gy, gxi, d, d.beta, opt);
    } catch (const NumericalError& e) {
      throw NumericalError("sample " + std::to_string(i) + ": " + e.what());
    }
    std::copy(r.x.begin(), r.x.end(), post.samples.row(i).begin());
    post.diag[i] = to_diag(r);
  }
  return post;
}

PosteriorEnsemble de_inverse(const Observations& obs, const NoiseModel& noise,
                             const SurrogateEnsemble& ensemble, const KLEBasis& y_basis,
                             const KLEBasis& u_basis, const RngStream& rng,
                             const OptimizerConfig& opt) {
  if (ensemble.kind != EnsembleKind::deep_ensemble)
    throw ConfigError("de_inverse: requires a deep-ensemble surrogate ensemble");
  check_noise(obs, noise.total_u(), noise);
  const LatentObsOperator op(obs, y_basis, u_basis);
  const std::size_t nxi = ensemble.members.front().widths.front();
  const double gu = obs.u.empty() ? 0.0 : 1.0 / noise.total_u();
  const double gy = obs.y.empty() ? 0.0 : 1.0 / noise.sigma2_ys;
  const double gxi = 1.0 / noise.sigma2_xi;

  // one shared prior-drawn start keeps identical members exactly coincident
  RngStream stream = rng.substream(0);
  std::vector<double> x0(nxi);
  for (auto& v : x0) v = std::sqrt(noise.sigma2_xi) * stream.normal();

  PosteriorEnsemble post;
  post.method = "de";
  post.samples = Matrix(ensemble.size(), nxi);
  post.diag.resize(ensemble.size());
  const Draws none;
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    MinimizeResult r;
    try {
      r = minimize_latent(op, ensemble.members[i], gu, gy, gxi, none, x0, opt);
    } catch (const NumericalError& e) {
      throw NumericalError("member " + std::to_string(i) + ": " + e.what());
    }
    std::copy(r.x.begin(), r.x.end(), post.samples.row(i).begin());
    post.diag[i] = to_diag(r);
  }
  return post;
}

double fullspace_loss(const FieldSurrogateMap& surrogate, std::span<const double> u_values,
                      std::span<const YObs> y_obs, double gamma_u, double gamma_y,
                      const Matrix& prior_chol, std::span<const double> beta,
                      std::span<const double> alpha_u, std::span<const double> alpha_y,
                      std::span<const double> y, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  if (!u_values.empty()) {
    std::vector<double> r = surrogate.value(y);
    for (std::size_t k = 0; k < r.size(); ++k) {
      r[k] -= u_values[k];
      if (!alpha_u.empty()) r[k] -= alpha_u[k];
      loss += 0.5 * gamma_u * r[k] * r[k];
    }
    for (auto& v : r) v *= gamma_u;
    const std::vector<double> gv = surrogate.vjp(y, r);
    axpy(1.0, gv, grad);
  }
  for (std::size_t k = 0; k < y_obs.size(); ++k) {
    double r = y[y_obs[k].row] - y_obs[k].value;
    if (!alpha_y.empty()) r -= alpha_y[k];
    loss += 0.5 * gamma_y * r * r;
    grad[y_obs[k].row] += gamma_y * r;
  }
  std::vector<double> d(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) d[k] = y[k] - beta[k];
  const std::vector<double> w = solve_lower(prior_chol, d);
  loss += 0.5 * dot(w, w);
  const std::vector<double> gp = solve_lower_t(prior_chol, w);
  axpy(1.0, gp, grad);
  return loss;
}

std::vector<FieldY> sample_posterior_fullspace(const Observations& obs, const NoiseModel& noise,
                                               const FieldSurrogateMap& surrogate,
                                               const FieldY& prior_mean, const Matrix& prior_chol,
                                               std::size_t n_ens, const RngStream& rng,
                                               const OptimizerConfig& opt) {
  if (n_ens < 2) throw ConfigError("sample_posterior_fullspace: n_ens must be >= 2");
  const double s2u = noise.total_u();
  if (!obs.u.empty() && s2u <= 0.0)
    throw ConfigError("sample_posterior_fullspace: zero u-noise with observations present");
  if (!obs.y.empty() && noise.sigma2_ys <= 0.0)
    throw ConfigError("sample_posterior_fullspace: zero y-noise with observations present");
  const std::size_t dim = prior_mean.v.size();
  const double gu = obs.u.empty() ? 0.0 : 1.0 / s2u;
  const double gy = obs.y.empty() ? 0.0 : 1.0 / noise.sigma2_ys;

  std::vector<FieldY> out;
  out.reserve(n_ens);
  for (std::size_t i = 0; i < n_ens; ++i) {
    RngStream stream = rng.substream(i);
    std::vector<double> alpha_u(obs.u.size());
    for (auto& v : alpha_u) v = std::sqrt(s2u) * stream.normal();
    std::vector<double> alpha_y(obs.y.size());
    for (auto& v : alpha_y) v = std::sqrt(noise.sigma2_ys) * stream.normal();
    std::vector<double> z(dim);
    stream.fill_normal(z);
    std::vector<double> beta = prior_mean.v;
    for (std::size_t r = 0; r < dim; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k <= r; ++k) s += prior_chol(r, k) * z[k];
      beta[r] += s;
    }

    std::vector<double> u_values(obs.u.size());
    for (std::size_t k = 0; k < obs.u.size(); ++k) u_values[k] = obs.u[k].value;
    GradObjective f = [&](std::span<const double> y, std::span<double> g) {
      return fullspace_loss(surrogate, u_values, obs.y, gu, gy, prior_chol, beta, alpha_u,
                            alpha_y, y, g);
    };

    MinimizeResult r = minimize(f, beta, opt);
    if (r.status == MinimizeStatus::diverged)
      throw NumericalError("fullspace sample " + std::to_string(i) + " diverged at iteration " +
                           std::to_string(r.fail_iter));
    out.push_back({std::move(r.x)});
  }
  return out;
}

FieldStats posterior_field_stats(const PosteriorEnsemble& post, const KLEBasis& y_basis) {
  if (post.size() < 2) throw ConfigError("posterior_field_stats: need at least 2 samples");
  std::vector<FieldY> fields;
  fields.reserve(post.size());
  for (std::size_t i = 0; i < post.size(); ++i)
    fields.push_back({decode(y_basis, post.samples.row(i))});
  return field_stats(fields);
}

FieldStats field_stats(const std::vector<FieldY>& fields) {
  if (fields.size() < 2) throw ConfigError("field_stats: need at least 2 samples");
  const std::size_t support = fields.front().v.size();
  FieldStats st;
  st.mean.assign(support, 0.0);
  st.variance.assign(support, 0.0);
  for (const auto& f : fields) axpy(1.0, f.v, st.mean);
  for (auto& v : st.mean) v /= static_cast<double>(fields.size());
  for (const auto& f : fields)
    for (std::size_t r = 0; r < support; ++r) {
      const double d = f.v[r] - st.mean[r];
      st.variance[r] += d * d;
    }
  for (auto& v : st.variance) v /= static_cast<double>(fields.size() - 1);
  return st;
}

Observations generate_measurements(const FieldU& u_ref, const FlowProblem& problem,
                                   const ObsSpec& spec, double sigma2_us, RngStream& rng) {
  if (sigma2_us < 0.0) throw ConfigError("generate_measurements: sigma2_us must be >= 0");
  const ResolvedObs r = resolve_obs(problem, spec);
  Observations obs;
  obs.u.reserve(r.active.size());
  const double s = std::sqrt(sigma2_us);
  for (std::size_t i = 0; i < r.active.size(); ++i) {
    if (r.step[i] < problem.n_warmup)
      throw ConfigError("generate_measurements: observation time in the warmup window");
    const std::size_t row = (r.step[i] - problem.n_warmup) * u_ref.n_active + r.active[i];
    obs.u.push_back({row, u_ref.at(r.step[i], r.active[i]) + s * rng.normal()});
  }
  return obs;
}

double gaussian_log_likelihood(const Observations& obs, const NoiseModel& noise,
                               const SurrogateNet& net, const KLEBasis& y_basis,
                               const KLEBasis& u_basis, std::span<const double> xi) {
  if (!obs.u.empty() && noise.total_u() <= 0.0)
    throw std::invalid_argument("gaussian_log_likelihood: zero total u variance");
  if (!obs.y.empty() && noise.sigma2_ys <= 0.0)
    throw std::invalid_argument("gaussian_log_likelihood: zero sigma2_ys");
  const LatentObsOperator op(obs, y_basis, u_basis);
  double ll = 0.0;
  if (!obs.u.empty()) {
    const double s2 = noise.total_u();
    const std::vector<double> eta = net_forward(net, xi);
    std::vector<double> pred = matvec(op.u_map, eta);
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] + op.u_mean[i] - op.u_values[i];
      ss += d * d;
    }
    ll += -0.5 * static_cast<double>(obs.u.size()) * std::log(2.0 * std::numbers::pi * s2) -
          0.5 * ss / s2;
  }
  if (!obs.y.empty()) {
    std::vector<double> pred = matvec(op.y_map, xi);
    double ss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] + op.y_mean[i] - op.y_values[i];
      ss += d * d;
    }
    ll += -0.5 * static_cast<double>(obs.y.size()) *
              std::log(2.0 * std::numbers::pi * noise.sigma2_ys) -
          0.5 * ss / noise.sigma2_ys;
  }
  return ll;
}

}  // namespace invuq
