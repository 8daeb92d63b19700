#pragma once

#include <functional>
#include <span>
#include <vector>

namespace invuq {

/// First-order adaptive-moment minimizer settings.
struct OptimizerConfig {
  double step = 1e-2;
  std::size_t max_iters = 1000;
  double grad_tol = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class MinimizeStatus { converged, max_iters, diverged };

struct IterRecord {
  std::size_t iter;
  double value;
  double grad_norm;
};

struct MinimizeResult {
  std::vector<double> x;   // best iterate seen
  double value = 0.0;      // objective at x
  MinimizeStatus status = MinimizeStatus::max_iters;
  std::size_t iterations = 0;
  std::size_t fail_iter = 0;  // meaningful when status == diverged
  std::vector<IterRecord> log;
};

/// Objective: returns f(x) and writes df/dx into grad_out.
using GradObjective = std::function<double(std::span<const double>, std::span<double>)>;

/// Adam. Deterministic given (x0, cfg). Always returns the best iterate
/// encountered, so result.value <= f(x0). On NaN/Inf the last finite
/// iterate is kept and status is set to diverged.
MinimizeResult minimize(const GradObjective& f, std::span<const double> x0,
                        const OptimizerConfig& cfg);

/// Reusable Adam state for training loops that manage their own iterations.
class AdamState {
 public:
  explicit AdamState(std::size_t dim) : m_(dim, 0.0), v_(dim, 0.0) {}
  void step(std::span<double> x, std::span<const double> grad, const OptimizerConfig& cfg);

 private:
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace invuq
