#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "invuq/flow.hpp"
#include "invuq/kle.hpp"
#include "invuq/matrix.hpp"
#include "invuq/optimize.hpp"
#include "invuq/rng.hpp"
#include "invuq/surrogate.hpp"

namespace invuq {

struct UObs {
  std::size_t row = 0;  // row into the monitor-window u support
  double value = 0.0;
};
struct YObs {
  std::size_t row = 0;  // active-cell ordinal
  double value = 0.0;
};

/// Measurements in canonical (location-major) order.
struct Observations {
  std::vector<UObs> u;
  std::vector<YObs> y;
};

/// All error variances entering the likelihood weights.
struct NoiseModel {
  double sigma2_us = 0.0;    // u measurement error
  double sigma2_ys = 0.0;    // y measurement error
  double sigma2_m = 0.0;     // PDE model error
  double sigma2_uhat = 0.0;  // surrogate error
  double sigma2_xi = 1.0;    // latent prior variance

  double total_u() const { return sigma2_us + sigma2_m + sigma2_uhat; }
  double tilde_u() const { return sigma2_us + sigma2_m; }
};

struct SampleDiag {
  double final_loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct PosteriorEnsemble {
  Matrix samples;  // n_samples x latent dim
  std::string method;
  std::vector<SampleDiag> diag;

  std::size_t size() const { return samples.rows(); }
  std::size_t dim() const { return samples.cols(); }
};

/// Precomputed observation rows of the decode maps:
/// u_hat(xi; theta) = u_mean + U * NN(xi), y_hat(xi) = y_mean + Y * xi.
struct LatentObsOperator {
  Matrix u_map;
  std::vector<double> u_mean, u_values;
  Matrix y_map;
  std::vector<double> y_mean, y_values;

  LatentObsOperator(const Observations& obs, const KLEBasis& y_basis, const KLEBasis& u_basis);
};

/// One randomized (or deterministic, with empty draws) latent loss:
/// L = gu/2 ||u_hat - u_s - a_u||^2 + gy/2 ||y_hat - y_s - a_y||^2
///   + gxi/2 ||xi - b||^2, with analytic gradient.
double latent_loss(const LatentObsOperator& op, const SurrogateNet& net, double gamma_u,
                   double gamma_y, double gamma_xi, std::span<const double> alpha_u,
                   std::span<const double> alpha_y, std::span<const double> beta,
                   std::span<const double> xi, std::span<double> grad);

/// Deterministic MAP point; rng seeds the initial iterate from the prior.
struct MapResult {
  std::vector<double> xi;
  SampleDiag diag;
};
MapResult map_estimate(const Observations& obs, const NoiseModel& noise, const SurrogateNet& net,
                       const KLEBasis& y_basis, const KLEBasis& u_basis, RngStream& rng,
                       const OptimizerConfig& opt);

/// Randomize-then-minimize with a fixed surrogate and Gaussian total error
/// (variance sigma2_us + sigma2_m + sigma2_uhat). Exact posterior sampler in
/// the linear-Gaussian case.
PosteriorEnsemble sample_posterior_gaussian(const Observations& obs, const NoiseModel& noise,
                                            const SurrogateNet& net, const KLEBasis& y_basis,
                                            const KLEBasis& u_basis, std::size_t n_ens,
                                            const RngStream& rng, const OptimizerConfig& opt);

/// Total-uncertainty sampler: sample i pairs surrogate member i with noise
/// draws i; the u-noise variance is sigma2_us + sigma2_m only, the surrogate
/// spread being carried by member variability.
PosteriorEnsemble sample_posterior_total(const Observations& obs, const NoiseModel& noise,
                                         const SurrogateEnsemble& ensemble,
                                         const KLEBasis& y_basis, const KLEBasis& u_basis,
                                         const RngStream& rng, const OptimizerConfig& opt);

/// Deep-ensemble inversion: the deterministic loss minimized once per member
/// from a shared prior-drawn initial iterate (no injected noise).
PosteriorEnsemble de_inverse(const Observations& obs, const NoiseModel& noise,
                             const SurrogateEnsemble& ensemble, const KLEBasis& y_basis,
                             const KLEBasis& u_basis, const RngStream& rng,
                             const OptimizerConfig& opt);

/// Generic surrogate for samplers without latent reduction: maps the full y
/// vector to the u observations, with a vector-Jacobian product.
struct FieldSurrogateMap {
  std::function<std::vector<double>(std::span<const double>)> value;
  std::function<std::vector<double>(std::span<const double>, std::span<const double>)> vjp;
};

/// Full-space randomized loss and gradient:
/// gu/2 ||G(y) - u_s - a_u||^2 + gy/2 ||y[rows] - y_s - a_y||^2
///  + ||L^-1 (y - beta)||^2 / 2.
double fullspace_loss(const FieldSurrogateMap& surrogate, std::span<const double> u_values,
                      std::span<const YObs> y_obs, double gamma_u, double gamma_y,
                      const Matrix& prior_chol, std::span<const double> beta,
                      std::span<const double> alpha_u, std::span<const double> alpha_y,
                      std::span<const double> y, std::span<double> grad);

/// Full-space randomize-then-minimize; the prior term uses the Mahalanobis
/// norm of the supplied covariance factor, beta drawn from the prior.
std::vector<FieldY> sample_posterior_fullspace(const Observations& obs, const NoiseModel& noise,
                                               const FieldSurrogateMap& surrogate,
                                               const FieldY& prior_mean, const Matrix& prior_chol,
                                               std::size_t n_ens, const RngStream& rng,
                                               const OptimizerConfig& opt);

struct FieldStats {
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased
};

/// Decode-then-average posterior field statistics.
FieldStats posterior_field_stats(const PosteriorEnsemble& post, const KLEBasis& y_basis);
/// Same statistics for full-space sample lists (IES, fullspace sampler).
FieldStats field_stats(const std::vector<FieldY>& fields);

/// u^s = u_ref + eps at the observation points, eps ~ N(0, sigma2_us I).
/// Observation rows index the monitor window of the problem.
Observations generate_measurements(const FieldU& u_ref, const FlowProblem& problem,
                                   const ObsSpec& spec, double sigma2_us, RngStream& rng);

/// Exact Gaussian independent-error log likelihood log P(d | xi).
double gaussian_log_likelihood(const Observations& obs, const NoiseModel& noise,
                               const SurrogateNet& net, const KLEBasis& y_basis,
                               const KLEBasis& u_basis, std::span<const double> xi);

}  // namespace invuq
