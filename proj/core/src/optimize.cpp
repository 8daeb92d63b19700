#include "invuq/optimize.hpp"

#include <cmath>

#include "invuq/matrix.hpp"

namespace invuq {

void AdamState::step(std::span<double> x, std::span<const double> grad,
                     const OptimizerConfig& cfg) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grad[i];
    v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    x[i] -= cfg.step * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

MinimizeResult minimize(const GradObjective& f, std::span<const double> x0,
                        const OptimizerConfig& cfg) {
  MinimizeResult res;
  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> grad(x.size(), 0.0);
  AdamState adam(x.size());

  double fx = f(x, grad);
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx) || !all_finite(grad)) {
    res.status = MinimizeStatus::diverged;
    res.fail_iter = 0;
    return res;
  }

  double gnorm = norm2(grad);
  res.log.push_back({0, fx, gnorm});
  if (gnorm <= cfg.grad_tol) {
    res.status = MinimizeStatus::converged;
    return res;
  }

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    adam.step(x, grad, cfg);
    fx = f(x, grad);
    if (!std::isfinite(fx) || !all_finite(grad)) {
      res.status = MinimizeStatus::diverged;
      res.fail_iter = it;
      res.iterations = it;
      res.log.push_back({it, fx, std::nan("")});
      return res;  // res.x still holds the last finite best iterate
    }
    if (fx < res.value) {
      res.value = fx;
      res.x = x;
    }
    gnorm = norm2(grad);
    res.iterations = it;
    if (gnorm <= cfg.grad_tol) {
      res.status = MinimizeStatus::converged;
      res.log.push_back({it, fx, gnorm});
      return res;
    }
  }
  res.status = MinimizeStatus::max_iters;
  res.log.push_back({res.iterations, fx, gnorm});
  return res;
}

}  // namespace invuq
