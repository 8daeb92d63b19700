#pragma once

#include <functional>
#include <vector>

#include "invuq/flow.hpp"
#include "invuq/inversion.hpp"
#include "invuq/matrix.hpp"
#include "invuq/random_field.hpp"
#include "invuq/rng.hpp"

namespace invuq {

/// Ensemble-form Gauss-Levenberg-Marquardt smoother settings.
struct IESConfig {
  std::size_t n_iterations = 3;
  double lambda0 = -1.0;  // < 0: misfit-scaled 10^floor(log10(phi0 / (2 N_obs)))
  double lambda_decrease = 0.5;
  double lambda_increase = 10.0;
  std::size_t ensemble_size = 0;  // 0: floor(budget / (n_iterations + 1))
  std::size_t budget = 0;         // total forward-call allowance
};

using ForwardMap = std::function<std::vector<double>(const FieldY&)>;
using PriorDraw = std::function<FieldY(RngStream&)>;

struct IESResult {
  std::vector<FieldY> ensemble;
  std::vector<FieldY> initial_ensemble;
  Matrix obs_perturbations;  // n_members x n_obs, fixed across iterations
  std::size_t forward_calls = 0;
  std::size_t accepted_iterations = 0;
  std::size_t rejected_trials = 0;
  std::size_t resamples = 0;
  std::vector<double> phi_history;     // ensemble-sum normalized misfit per accepted state
  std::vector<double> lambda_history;  // damping before each trial
};

/// Iterative ensemble smoother on a generic forward map. Member j updates as
///   y_j <- y_j - C_yd (C_dd + (1+lambda) sigma2 I)^-1 (d_j - d_obs - eps_j)
/// with empirical covariances over the ensemble and per-member perturbed
/// observations eps_j ~ N(0, sigma2 I). lambda halves on misfit decrease and
/// grows tenfold otherwise; rejected trials keep the previous ensemble.
IESResult run_ies(const ForwardMap& forward, const PriorDraw& prior,
                  const std::vector<double>& d_obs, double obs_variance, const IESConfig& cfg,
                  const RngStream& rng);

/// PDE-backed adapter: the forward map solves the flow problem and reads the
/// observation rows of the monitor window.
IESResult run_ies(const FlowProblem& problem, const FieldSampler& prior, const Observations& obs,
                  const NoiseModel& noise, const IESConfig& cfg, const RngStream& rng);

}  // namespace invuq
