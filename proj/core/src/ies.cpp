#include "invuq/ies.hpp"

#include <cmath>
#include <string>

#include "invuq/errors.hpp"
#include "invuq/linalg.hpp"

namespace invuq {

namespace {

double misfit(const Matrix& d, const std::vector<double>& d_obs, double sigma2) {
  double phi = 0.0;
  for (std::size_t j = 0; j < d.rows(); ++j) {
    const double* dj = d.data() + j * d.cols();
    for (std::size_t k = 0; k < d.cols(); ++k) {
      const double r = dj[k] - d_obs[k];
      phi += r * r / sigma2;
    }
  }
  return phi;
}

}  // namespace

IESResult run_ies(const ForwardMap& forward, const PriorDraw& prior,
                  const std::vector<double>& d_obs, double obs_variance, const IESConfig& cfg,
                  const RngStream& rng) {
  if (cfg.n_iterations < 1) throw ConfigError("ies: n_iterations must be >= 1");

  std::size_t n_members = cfg.ensemble_size;
  std::size_t budget = cfg.budget;
  if (n_members == 0) {
    if (budget == 0) throw ConfigError("ies: either ensemble_size or budget must be set");
    n_members = budget / (cfg.n_iterations + 1);
  }
  if (budget == 0) budget = n_members * (cfg.n_iterations + 1);
  if (n_members < 2) throw ConfigError("ies: ensemble size must be >= 2");
  if (budget < n_members * (cfg.n_iterations + 1))
    throw ConfigError("ies: budget below ensemble_size * (n_iterations + 1)");

  IESResult res;
  res.ensemble.reserve(n_members);

  // zero-observation case: the prior is already the answer
  if (d_obs.empty()) {
    for (std::size_t j = 0; j < n_members; ++j) {
      RngStream s = rng.substream(j);
      res.ensemble.push_back(prior(s));
    }
    res.initial_ensemble = res.ensemble;
    return res;
  }
  if (obs_variance <= 0.0) throw ConfigError("ies: observation variance must be positive");

  const std::size_t n_obs = d_obs.size();
  Matrix d(n_members, n_obs);

  auto run_member = [&](const FieldY& y) {
    ++res.forward_calls;
    return forward(y);
  };

  for (std::size_t j = 0; j < n_members; ++j) {
    RngStream s = rng.substream(j);
    FieldY y = prior(s);
    std::vector<double> dj;
    try {
      dj = run_member(y);
    } catch (const NumericalError&) {
      ++res.resamples;
      RngStream s2 = rng.substream(1000000 + j);
      y = prior(s2);
      dj = run_member(y);  // second failure propagates as hard failure
    }
    if (dj.size() != n_obs) throw ConfigError("ies: forward map output size mismatch");
    std::copy(dj.begin(), dj.end(), d.row(j).begin());
    res.ensemble.push_back(std::move(y));
  }
  res.initial_ensemble = res.ensemble;

  res.obs_perturbations = Matrix(n_members, n_obs);
  const double sd = std::sqrt(obs_variance);
  for (std::size_t j = 0; j < n_members; ++j) {
    RngStream s = rng.substream(2000000 + j);
    for (std::size_t k = 0; k < n_obs; ++k) res.obs_perturbations(j, k) = sd * s.normal();
  }

  double phi = misfit(d, d_obs, obs_variance);
  res.phi_history.push_back(phi);
  double lambda = cfg.lambda0;
  if (lambda < 0.0)
    lambda = std::pow(10.0, std::floor(std::log10(
                 std::max(phi / (2.0 * static_cast<double>(n_obs)), 1e-300))));

  const std::size_t dim = res.ensemble.front().v.size();
  const double inv_nm1 = 1.0 / static_cast<double>(n_members - 1);

  for (std::size_t it = 0; it < cfg.n_iterations; ++it) {
    if (res.forward_calls + n_members > budget) break;
    res.lambda_history.push_back(lambda);

    // anomalies of the accepted state
    std::vector<double> ymean(dim, 0.0);
    for (const auto& y : res.ensemble) axpy(1.0, y.v, ymean);
    for (auto& v : ymean) v /= static_cast<double>(n_members);
    std::vector<double> dmean(n_obs, 0.0);
    for (std::size_t j = 0; j < n_members; ++j) axpy(1.0, d.row(j), dmean);
    for (auto& v : dmean) v /= static_cast<double>(n_members);

    Matrix yc(n_members, dim), dc(n_members, n_obs);
    for (std::size_t j = 0; j < n_members; ++j) {
      for (std::size_t r = 0; r < dim; ++r) yc(j, r) = res.ensemble[j].v[r] - ymean[r];
      for (std::size_t k = 0; k < n_obs; ++k) dc(j, k) = d(j, k) - dmean[k];
    }

    // C_dd + (1+lambda) Sigma, factored once per trial
    Matrix m = matmul_tn(dc, dc);
    for (auto& v : m.flat()) v *= inv_nm1;
    for (std::size_t k = 0; k < n_obs; ++k) m(k, k) += (1.0 + lambda) * obs_variance;
    Matrix l;
    try {
      l = cholesky(m).lower;
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("ies: singular update matrix: ") + e.what());
    }

    // trial update per member: y_j - C_yd M^-1 (d_j - d_obs - eps_j)
    std::vector<FieldY> trial(n_members);
    Matrix d_trial(n_members, n_obs);
    for (std::size_t j = 0; j < n_members; ++j) {
      std::vector<double> r(n_obs);
      for (std::size_t k = 0; k < n_obs; ++k)
        r[k] = d(j, k) - d_obs[k] - res.obs_perturbations(j, k);
      const std::vector<double> x = solve_lower_t(l, solve_lower(l, r));
      // C_yd x = Yc^T (Dc x) / (n-1)
      std::vector<double> w = matvec(dc, x);
      std::vector<double> upd = matvec_t(yc, w);
      trial[j].v = res.ensemble[j].v;
      axpy(-inv_nm1, upd, trial[j].v);
      const std::vector<double> dj = run_member(trial[j]);
      std::copy(dj.begin(), dj.end(), d_trial.row(j).begin());
    }

    const double phi_trial = misfit(d_trial, d_obs, obs_variance);
    if (phi_trial <= phi) {
      res.ensemble = std::move(trial);
      d = std::move(d_trial);
      phi = phi_trial;
      lambda *= cfg.lambda_decrease;
      ++res.accepted_iterations;
      res.phi_history.push_back(phi);
    } else {
      lambda *= cfg.lambda_increase;
      ++res.rejected_trials;
    }
  }
  return res;
}

IESResult run_ies(const FlowProblem& problem, const FieldSampler& prior, const Observations& obs,
                  const NoiseModel& noise, const IESConfig& cfg, const RngStream& rng) {
  std::vector<double> d_obs;
  std::vector<std::size_t> rows;
  d_obs.reserve(obs.u.size());
  for (const auto& o : obs.u) {
    d_obs.push_back(o.value);
    rows.push_back(o.row);
  }
  ForwardMap fwd = [&problem, rows](const FieldY& y) {
    const FieldU u = solve(problem, y);
    const std::vector<double> window = monitor_window(u, problem);
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = window[rows[i]];
    return out;
  };
  PriorDraw draw = [&prior](RngStream& s) { return prior.draw(s); };
  return run_ies(fwd, draw, d_obs, noise.tilde_u(), cfg, rng);
}

}  // namespace invuq
