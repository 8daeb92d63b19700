#pragma once

#include <cstddef>
#include <vector>

#include "invuq/grid.hpp"

namespace invuq {

struct WellSpec {
  std::size_t cell = 0;             // flat cell id (must be active)
  std::vector<double> rate;        // per time step, 1/time units (<0 extracts)
};

struct GhbSpec {  // head-dependent flux (river-analog) cell
  std::size_t cell = 0;
  double conductance = 0.0;  // area/time
  double external_head = 0.0;
};

struct FixedHeadSpec {
  std::size_t cell = 0;
  double head = 0.0;
};

enum class FaceWeighting { central, upstream };

/// Nonlinear unconfined-flow problem: Sy*u*du/dt = div(K u grad u) + u*(f+g)
/// on the active cells, implicit Euler in time, Picard in the nonlinearity.
struct FlowProblem {
  Grid grid;
  double specific_yield = 0.25;
  double dry_floor = 1e-3;
  std::vector<double> initial_head;  // per active cell
  std::vector<double> dt;            // per step, all > 0
  std::size_t n_warmup = 0;          // leading steps excluded from the monitored window
  std::vector<double> recharge;      // f(t) per step, 1/time
  std::vector<WellSpec> wells;
  std::vector<GhbSpec> ghb;
  std::vector<FixedHeadSpec> fixed_head;
  FaceWeighting weighting = FaceWeighting::central;
  double picard_tol = 1e-10;
  std::size_t picard_max = 50;

  std::size_t n_steps() const { return dt.size(); }
  std::size_t n_monitor() const { return dt.size() - n_warmup; }
  /// End-of-step time of step s (cumulative dt).
  double time_of_step(std::size_t s) const;
  void validate() const;
};

/// Head per active cell per time step, step-major layout.
struct FieldU {
  std::size_t n_active = 0;
  std::size_t n_steps = 0;
  std::vector<double> v;  // v[s*n_active + a]

  double at(std::size_t step, std::size_t a) const { return v[step * n_active + a]; }
};

struct SolveStats {
  std::size_t total_picard = 0;
  double max_mass_error = 0.0;  // max over steps of relative mass-balance error
  double max_residual = 0.0;    // max over steps of final Picard residual
};

FieldU solve(const FlowProblem& problem, const FieldY& y, SolveStats* stats = nullptr);

/// Observation request: every cell paired with every time (location-major,
/// time-minor). Times snap to the nearest time-grid point.
struct ObsSpec {
  std::vector<std::size_t> cells;  // flat cell ids, must be active
  std::vector<double> times;
};

struct ResolvedObs {
  std::vector<std::size_t> active;  // active ordinal per observation
  std::vector<std::size_t> step;    // time-step index per observation
};

ResolvedObs resolve_obs(const FlowProblem& problem, const ObsSpec& spec);
std::vector<double> observe(const FieldU& u, const FlowProblem& problem, const ObsSpec& spec);

/// Copy of the problem with well rates and recharge scaled.
FlowProblem scenario(const FlowProblem& problem, double pumping_scale, double recharge_scale);

/// Monitor-window slice of a solution, flattened step-major
/// (row = (step - n_warmup)*n_active + a).
std::vector<double> monitor_window(const FieldU& u, const FlowProblem& problem);

}  // namespace invuq
