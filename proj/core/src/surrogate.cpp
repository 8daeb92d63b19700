#include "invuq/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "invuq/errors.hpp"
#include "invuq/metrics.hpp"

namespace invuq {

std::size_t SurrogateNet::param_count() const {
  std::size_t c = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) c += widths[l + 1] * (widths[l] + 1);
  return c;
}

void SurrogateNet::validate() const {
  if (widths.size() < 2) throw ConfigError("net: need at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw ConfigError("net: zero layer width");
  if (theta.size() != param_count())
    throw ConfigError("net: parameter count inconsistent with widths");
  if (!all_finite(theta)) throw NumericalError("net: non-finite parameters");
}

void TrainConfig::validate() const {
  if (sigma2_eta <= 0.0 || sigma2_theta <= 0.0)
    throw ConfigError("train: sigma2_eta and sigma2_theta must be positive");
}

namespace {

struct LayerView {
  const double* w;  // out x in row-major
  const double* b;
  std::size_t in, out;
};

LayerView layer_view(const SurrogateNet& net, std::size_t l) {
  std::size_t off = 0;
  for (std::size_t k = 0; k < l; ++k) off += net.widths[k + 1] * (net.widths[k] + 1);
  const std::size_t in = net.widths[l];
  const std::size_t out = net.widths[l + 1];
  return {net.theta.data() + off, net.theta.data() + off + out * in, in, out};
}

double act_apply(Activation a, double z) {
  return a == Activation::tanh_act ? std::tanh(z) : z;
}

}  // namespace

std::vector<double> net_forward(const SurrogateNet& net, std::span<const double> x) {
  NetTrace trace;
  return net_forward_trace(net, x, trace);
}

std::vector<double> net_forward_trace(const SurrogateNet& net, std::span<const double> x,
                                      NetTrace& trace) {
  if (x.size() != net.widths.front()) throw ConfigError("net: input width mismatch");
  trace.acts.assign(net.n_layers() + 1, {});
  trace.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const LayerView lv = layer_view(net, l);
    const bool last = (l + 1 == net.n_layers());
    std::vector<double>& out = trace.acts[l + 1];
    out.resize(lv.out);
    const std::vector<double>& in = trace.acts[l];
    for (std::size_t o = 0; o < lv.out; ++o) {
      const double* wr = lv.w + o * lv.in;
      double z = lv.b[o];
      for (std::size_t i = 0; i < lv.in; ++i) z += wr[i] * in[i];
      out[o] = last ? z : act_apply(net.activation, z);
    }
  }
  return trace.acts.back();
}

std::vector<double> net_input_vjp(const SurrogateNet& net, const NetTrace& trace,
                                  std::span<const double> v) {
  std::vector<double> delta(v.begin(), v.end());
  for (std::size_t li = net.n_layers(); li-- > 0;) {
    const LayerView lv = layer_view(net, li);
    std::vector<double> prev(lv.in, 0.0);
    for (std::size_t o = 0; o < lv.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* wr = lv.w + o * lv.in;
      for (std::size_t i = 0; i < lv.in; ++i) prev[i] += wr[i] * d;
    }
    if (li > 0 && net.activation == Activation::tanh_act) {
      const std::vector<double>& a = trace.acts[li];
      for (std::size_t i = 0; i < lv.in; ++i) prev[i] *= (1.0 - a[i] * a[i]);
    }
    delta = std::move(prev);
  }
  return delta;
}

namespace {

/// Batched forward keeping activations: acts[0] = X, acts[l] N x widths[l].
void forward_batch(const SurrogateNet& net, const Matrix& x, std::vector<Matrix>& acts) {
  acts.assign(net.n_layers() + 1, Matrix());
  acts[0] = x;
  const std::size_t nrows = x.rows();
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const LayerView lv = layer_view(net, l);
    const bool last = (l + 1 == net.n_layers());
    Matrix out(nrows, lv.out);
    const Matrix& in = acts[l];
    for (std::size_t r = 0; r < nrows; ++r) {
      const double* ir = in.data() + r * lv.in;
      double* orow = out.data() + r * lv.out;
      for (std::size_t o = 0; o < lv.out; ++o) {
        const double* wr = lv.w + o * lv.in;
        double z = lv.b[o];
        for (std::size_t i = 0; i < lv.in; ++i) z += wr[i] * ir[i];
        orow[o] = last ? z : act_apply(net.activation, z);
      }
    }
    acts[l + 1] = std::move(out);
  }
}

/// Accumulates d(data term)/d(theta) given delta on the outputs.
void backprop_theta(const SurrogateNet& net, const std::vector<Matrix>& acts, Matrix delta,
                    std::span<double> grad) {
  const std::size_t nrows = delta.rows();
  for (std::size_t li = net.n_layers(); li-- > 0;) {
    const LayerView lv = layer_view(net, li);
    const std::size_t off = static_cast<std::size_t>(lv.w - net.theta.data());
    double* gw = grad.data() + off;
    double* gb = grad.data() + off + lv.out * lv.in;
    const Matrix& a_in = acts[li];
    for (std::size_t r = 0; r < nrows; ++r) {
      const double* dr = delta.data() + r * lv.out;
      const double* ar = a_in.data() + r * lv.in;
      for (std::size_t o = 0; o < lv.out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwr = gw + o * lv.in;
        for (std::size_t i = 0; i < lv.in; ++i) gwr[i] += d * ar[i];
      }
    }
    if (li == 0) break;
    Matrix prev(nrows, lv.in);
    for (std::size_t r = 0; r < nrows; ++r) {
      const double* dr = delta.data() + r * lv.out;
      double* pr = prev.data() + r * lv.in;
      for (std::size_t o = 0; o < lv.out; ++o) {
        const double d = dr[o];
        if (d == 0.0) continue;
        const double* wr = lv.w + o * lv.in;
        for (std::size_t i = 0; i < lv.in; ++i) pr[i] += d * wr[i];
      }
      if (net.activation == Activation::tanh_act) {
        const double* ar = acts[li].data() + r * lv.in;
        for (std::size_t i = 0; i < lv.in; ++i) pr[i] *= (1.0 - ar[i] * ar[i]);
      }
    }
    delta = std::move(prev);
  }
}

SurrogateNet init_net(const LatentDataset& data, const TrainConfig& cfg, RngStream& rng) {
  SurrogateNet net;
  net.widths.push_back(data.inputs.cols());
  for (std::size_t h : cfg.hidden) net.widths.push_back(h);
  net.widths.push_back(data.targets.cols());
  net.activation = cfg.activation;
  net.theta.assign(net.param_count(), 0.0);
  // symmetric uniform fan-in scaling; biases start at zero
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < net.widths.size(); ++l) {
    const std::size_t in = net.widths[l];
    const std::size_t out = net.widths[l + 1];
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    for (std::size_t k = 0; k < out * in; ++k)
      net.theta[off + k] = a * (2.0 * rng.uniform01() - 1.0);
    off += out * in + out;
  }
  return net;
}

/// Shared training loop. targets may be perturbed and the regularizer may be
/// centered away from zero (randomized variant).
TrainResult fit(const LatentDataset& data, const TrainConfig& cfg, SurrogateNet net,
                const Matrix& targets, const std::vector<double>* reg_center, RngStream& rng) {
  const std::size_t n = data.size();
  const std::size_t dim = net.theta.size();
  const double wd = 1.0 / (2.0 * cfg.sigma2_eta);
  const double wr = 1.0 / (2.0 * cfg.sigma2_theta);

  std::vector<Matrix> acts;
  std::vector<double> grad(dim);

  auto loss_and_grad = [&](const Matrix& x, const Matrix& t, double scale) {
    forward_batch(net, x, acts);
    const Matrix& y = acts.back();
    Matrix delta(y.rows(), y.cols());
    double data_loss = 0.0;
    for (std::size_t k = 0; k < y.flat().size(); ++k) {
      const double r = y.flat()[k] - t.flat()[k];
      data_loss += r * r;
      delta.flat()[k] = 2.0 * wd * r * scale;
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    backprop_theta(net, acts, std::move(delta), grad);
    double reg = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = net.theta[k] - (reg_center ? (*reg_center)[k] : 0.0);
      reg += d * d;
      grad[k] += 2.0 * wr * d;
    }
    return wd * data_loss * scale + wr * reg;
  };

  TrainResult res;
  AdamState adam(dim);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  const bool full = (cfg.batch == 0 || cfg.batch >= n);
  double best_loss = 0.0;
  std::vector<double> best_theta;

  for (std::size_t epoch = 0; epoch <= cfg.opt.max_iters; ++epoch) {
    double loss;
    if (full) {
      loss = loss_and_grad(data.inputs, targets, 1.0);
    } else {
      // one random batch per step, full-loss bookkeeping at the end
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.next_u64() % i]);
      const std::size_t bs = cfg.batch;
      Matrix bx(bs, data.inputs.cols()), bt(bs, targets.cols());
      for (std::size_t r = 0; r < bs; ++r) {
        std::copy_n(data.inputs.data() + order[r] * data.inputs.cols(), data.inputs.cols(),
                    bx.data() + r * bx.cols());
        std::copy_n(targets.data() + order[r] * targets.cols(), targets.cols(),
                    bt.data() + r * bt.cols());
      }
      loss = loss_and_grad(bx, bt, static_cast<double>(n) / static_cast<double>(bs));
    }
    if (!std::isfinite(loss) || !all_finite(grad))
      throw NumericalError("train: divergent loss at epoch " + std::to_string(epoch));
    if (epoch == 0) {
      res.initial_loss = loss;
      best_loss = loss;
      best_theta = net.theta;
    } else if (loss < best_loss) {
      best_loss = loss;
      best_theta = net.theta;
    }
    res.epochs = epoch;
    if (epoch == cfg.opt.max_iters) break;
    if (norm2(grad) <= cfg.opt.grad_tol) break;
    adam.step(net.theta, grad, cfg.opt);
  }

  net.theta = std::move(best_theta);
  res.final_loss = best_loss;
  res.net = std::move(net);
  return res;
}

}  // namespace

namespace {

double loss_grad_at(const SurrogateNet& net, const LatentDataset& data, const Matrix& targets,
                    const std::vector<double>* reg_center, double sigma2_eta, double sigma2_theta,
                    std::span<double> grad) {
  const double wd = 1.0 / (2.0 * sigma2_eta);
  const double wr = 1.0 / (2.0 * sigma2_theta);
  std::vector<Matrix> acts;
  forward_batch(net, data.inputs, acts);
  const Matrix& y = acts.back();
  Matrix delta(y.rows(), y.cols());
  double data_loss = 0.0;
  for (std::size_t k = 0; k < y.flat().size(); ++k) {
    const double r = y.flat()[k] - targets.flat()[k];
    data_loss += r * r;
    delta.flat()[k] = 2.0 * wd * r;
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  backprop_theta(net, acts, std::move(delta), grad);
  double reg = 0.0;
  for (std::size_t k = 0; k < net.theta.size(); ++k) {
    const double d = net.theta[k] - (reg_center ? (*reg_center)[k] : 0.0);
    reg += d * d;
    grad[k] += 2.0 * wr * d;
  }
  return wd * data_loss + wr * reg;
}

}  // namespace

double lf_loss_grad(const SurrogateNet& net, const LatentDataset& data, double sigma2_eta,
                    double sigma2_theta, std::span<double> grad) {
  return loss_grad_at(net, data, data.targets, nullptr, sigma2_eta, sigma2_theta, grad);
}

double lrf_loss_grad(const SurrogateNet& net, const LatentDataset& data, double sigma2_eta,
                     double sigma2_theta, const Matrix& alpha, std::span<const double> beta,
                     std::span<double> grad) {
  Matrix targets = data.targets;
  for (std::size_t k = 0; k < targets.flat().size(); ++k) targets.flat()[k] += alpha.flat()[k];
  const std::vector<double> center(beta.begin(), beta.end());
  return loss_grad_at(net, data, targets, &center, sigma2_eta, sigma2_theta, grad);
}

TrainResult train(const LatentDataset& data, const TrainConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("train: empty dataset");
  SurrogateNet net = init_net(data, cfg, rng);
  return fit(data, cfg, std::move(net), data.targets, nullptr, rng);
}

TrainResult train_randomized(const LatentDataset& data, const TrainConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("train_randomized: empty dataset");
  SurrogateNet net = init_net(data, cfg, rng);
  Matrix targets = data.targets;
  const double s_eta = std::sqrt(cfg.sigma2_eta);
  for (double& t : targets.flat()) t += s_eta * rng.normal();
  std::vector<double> beta(net.theta.size());
  const double s_theta = std::sqrt(cfg.sigma2_theta);
  for (double& b : beta) b = s_theta * rng.normal();
  return fit(data, cfg, std::move(net), targets, &beta, rng);
}

SurrogateEnsemble build_ensemble(const LatentDataset& data, const TrainConfig& cfg,
                                 EnsembleKind kind, std::size_t n_ens, const RngStream& rng) {
  if (n_ens < 2) throw ConfigError("build_ensemble: need at least 2 members");
  SurrogateEnsemble ens;
  ens.kind = kind;
  ens.members.reserve(n_ens);
  for (std::size_t i = 0; i < n_ens; ++i) {
    RngStream member_rng = rng.substream(i);
    try {
      TrainResult r = (kind == EnsembleKind::deep_ensemble) ? train(data, cfg, member_rng)
                                                            : train_randomized(data, cfg, member_rng);
      ens.members.push_back(std::move(r.net));
      ens.member_streams.push_back(member_rng.stream());
    } catch (const NumericalError& e) {
      throw NumericalError("build_ensemble: member " + std::to_string(i) +
                           " failed: " + e.what());
    }
  }
  return ens;
}

std::vector<double> predict(const SurrogateNet& net, std::span<const double> xi,
                            const KLEBasis& u_basis) {
  const std::vector<double> eta = net_forward(net, xi);
  if (eta.size() != u_basis.n_modes())
    throw ConfigError("predict: net output width must equal u-basis mode count");
  return decode(u_basis, eta);
}

EnsembleStats ensemble_stats(const SurrogateEnsemble& ens, std::span<const double> xi,
                             const KLEBasis& u_basis) {
  if (ens.size() < 2) throw ConfigError("ensemble_stats: need at least 2 members");
  const std::size_t support = u_basis.support();
  EnsembleStats st;
  st.mean.assign(support, 0.0);
  st.variance.assign(support, 0.0);
  std::vector<std::vector<double>> preds;
  preds.reserve(ens.size());
  for (const auto& m : ens.members) {
    preds.push_back(predict(m, xi, u_basis));
    axpy(1.0, preds.back(), st.mean);
  }
  const double inv_n = 1.0 / static_cast<double>(ens.size());
  for (auto& v : st.mean) v *= inv_n;
  for (const auto& pr : preds)
    for (std::size_t r = 0; r < support; ++r) {
      const double d = pr[r] - st.mean[r];
      st.variance[r] += d * d;
    }
  const double inv_nm1 = 1.0 / static_cast<double>(ens.size() - 1);
  for (auto& v : st.variance) v *= inv_nm1;
  return st;
}

double estimate_surrogate_variance(const SurrogateEnsemble& ens,
                                   const std::vector<std::vector<double>>& test_xis,
                                   const KLEBasis& u_basis,
                                   std::span<const std::size_t> obs_rows) {
  if (test_xis.empty()) throw ConfigError("estimate_surrogate_variance: need >= 1 test point");
  if (obs_rows.empty()) throw ConfigError("estimate_surrogate_variance: need >= 1 obs row");
  double acc = 0.0;
  std::vector<std::vector<double>> preds(ens.size());
  for (const auto& xi : test_xis) {
    for (std::size_t m = 0; m < ens.size(); ++m) {
      const std::vector<double> eta = net_forward(ens.members[m], xi);
      preds[m] = decode_rows(u_basis, eta, obs_rows);
    }
    for (std::size_t r = 0; r < obs_rows.size(); ++r) {
      double mean = 0.0;
      for (const auto& pr : preds) mean += pr[r];
      mean /= static_cast<double>(ens.size());
      double var = 0.0;
      for (const auto& pr : preds) var += (pr[r] - mean) * (pr[r] - mean);
      var /= static_cast<double>(ens.size() - 1);
      acc += var;
    }
  }
  return acc / (static_cast<double>(test_xis.size()) * static_cast<double>(obs_rows.size()));
}

std::vector<LppGridEntry> lpp_grid_search(const LatentDataset& train_set,
                                          const std::vector<std::vector<double>>& heldout_xi,
                                          const std::vector<std::vector<double>>& heldout_u,
                                          const KLEBasis& u_basis,
                                          std::span<const double> etas,
                                          std::span<const double> thetas, const TrainConfig& base,
                                          std::size_t n_members, const RngStream& rng) {
  if (heldout_xi.size() != heldout_u.size() || heldout_xi.empty())
    throw ConfigError("lpp_grid_search: held-out sets are empty or mismatched");
  std::vector<LppGridEntry> out;
  std::size_t cell = 0;
  for (double se : etas) {
    for (double st : thetas) {
      TrainConfig cfg = base;
      cfg.sigma2_eta = se;
      cfg.sigma2_theta = st;
      const SurrogateEnsemble ens =
          build_ensemble(train_set, cfg, EnsembleKind::randomized, n_members,
                         rng.substream(cell++));
      double total = 0.0;
      for (std::size_t i = 0; i < heldout_xi.size(); ++i) {
        const EnsembleStats stx = ensemble_stats(ens, heldout_xi[i], u_basis);
        total += lpp(stx.mean, stx.variance, heldout_u[i]);
      }
      out.push_back({se, st, total});
    }
  }
  return out;
}

}  // namespace invuq
