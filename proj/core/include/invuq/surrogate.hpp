#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "invuq/kle.hpp"
#include "invuq/matrix.hpp"
#include "invuq/optimize.hpp"
#include "invuq/rng.hpp"

namespace invuq {

enum class Activation : std::uint32_t { tanh_act = 0, linear = 1 };

/// Fully connected latent map. theta packs, per layer, the weight matrix
/// (out x in, row-major) followed by the bias vector.
struct SurrogateNet {
  std::vector<std::size_t> widths;  // input, hidden..., output
  Activation activation = Activation::tanh_act;
  std::vector<double> theta;

  std::size_t n_layers() const { return widths.size() - 1; }
  std::size_t param_count() const;
  void validate() const;
};

std::vector<double> net_forward(const SurrogateNet& net, std::span<const double> x);

/// Single-input forward keeping activations, then J^T v against the input.
struct NetTrace {
  std::vector<std::vector<double>> acts;  // acts[0] = x, acts.back() = output
};
std::vector<double> net_forward_trace(const SurrogateNet& net, std::span<const double> x,
                                      NetTrace& trace);
std::vector<double> net_input_vjp(const SurrogateNet& net, const NetTrace& trace,
                                  std::span<const double> v);

/// Latent training pairs, one row per sample.
struct LatentDataset {
  Matrix inputs;   // N x n_xi
  Matrix targets;  // N x n_eta
  std::size_t size() const { return inputs.rows(); }
};

struct TrainConfig {
  double sigma2_eta = 1e-8;
  double sigma2_theta = 1e-3;
  std::vector<std::size_t> hidden = {256, 256, 256};
  Activation activation = Activation::tanh_act;
  OptimizerConfig opt{1e-3, 2000, 1e-10, 0.9, 0.999, 1e-8};
  std::size_t batch = 0;  // 0 = full batch

  void validate() const;
};

struct TrainResult {
  SurrogateNet net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t epochs = 0;
};

/// Deterministic fit of (1/2 sigma2_eta) sum ||NN(xi_i)-eta_i||^2
///  + (1/2 sigma2_theta) ||theta||^2 from a random initialization.
TrainResult train(const LatentDataset& data, const TrainConfig& cfg, RngStream& rng);

/// One randomized-loss posterior-approximate sample of theta: targets are
/// perturbed by alpha_i ~ N(0, sigma2_eta I) and the regularizer is centered
/// at beta ~ N(0, sigma2_theta I), both drawn fresh per call.
TrainResult train_randomized(const LatentDataset& data, const TrainConfig& cfg, RngStream& rng);

/// Training-loss value and d/d(theta) at the net's current parameters.
double lf_loss_grad(const SurrogateNet& net, const LatentDataset& data, double sigma2_eta,
                    double sigma2_theta, std::span<double> grad);

/// Randomized training loss with explicit draws: alpha perturbs the targets
/// (same shape), beta recenters the regularizer.
double lrf_loss_grad(const SurrogateNet& net, const LatentDataset& data, double sigma2_eta,
                     double sigma2_theta, const Matrix& alpha, std::span<const double> beta,
                     std::span<double> grad);

enum class EnsembleKind : std::uint32_t { deep_ensemble = 0, randomized = 1 };

struct SurrogateEnsemble {
  EnsembleKind kind = EnsembleKind::deep_ensemble;
  std::vector<SurrogateNet> members;
  std::vector<std::uint64_t> member_streams;  // substream ids used per member

  std::size_t size() const { return members.size(); }
};

/// Member i trains from rng.substream(i); all members share the architecture.
SurrogateEnsemble build_ensemble(const LatentDataset& data, const TrainConfig& cfg,
                                 EnsembleKind kind, std::size_t n_ens, const RngStream& rng);

/// Full-support prediction u_hat = decode_u(NN(xi)).
std::vector<double> predict(const SurrogateNet& net, std::span<const double> xi,
                            const KLEBasis& u_basis);

/// Pointwise ensemble mean and unbiased variance of predict over members.
struct EnsembleStats {
  std::vector<double> mean;
  std::vector<double> variance;
};
EnsembleStats ensemble_stats(const SurrogateEnsemble& ens, std::span<const double> xi,
                             const KLEBasis& u_basis);

/// Mean over observation rows and test points of the ensemble prediction
/// variance; the sigma2_uhat plug-in of the total-error budget.
double estimate_surrogate_variance(const SurrogateEnsemble& ens,
                                   const std::vector<std::vector<double>>& test_xis,
                                   const KLEBasis& u_basis, std::span<const std::size_t> obs_rows);

struct LppGridEntry {
  double sigma2_eta = 0.0;
  double sigma2_theta = 0.0;
  double lpp = 0.0;
};

/// Grid search of (sigma2_eta, sigma2_theta) by held-out log predictive
/// probability of small randomized ensembles.
std::vector<LppGridEntry> lpp_grid_search(const LatentDataset& train_set,
                                          const std::vector<std::vector<double>>& heldout_xi,
                                          const std::vector<std::vector<double>>& heldout_u,
                                          const KLEBasis& u_basis,
                                          std::span<const double> etas,
                                          std::span<const double> thetas, const TrainConfig& base,
                                          std::size_t n_members, const RngStream& rng);

}  // namespace invuq
