#include <doctest.h>

#include <cmath>

#include "flow_cases.hpp"
#include "invuq/errors.hpp"
#include "invuq/flow.hpp"

using namespace invuq;

namespace {

FlowProblem small_problem() {
  Grid g = Grid::regular(6, 5, 10.0, 10.0);
  FlowProblem p;
  p.grid = g;
  p.specific_yield = 0.2;
  p.initial_head.assign(g.n_active(), 8.0);
  p.dt.assign(6, 5.0);
  p.n_warmup = 2;
  p.recharge.assign(6, 2e-4);
  for (std::size_t iy = 0; iy < 5; ++iy) p.ghb.push_back({g.cell_id(0, iy), 4.0, 7.5});
  WellSpec w;
  w.cell = g.cell_id(4, 2);
  w.rate.assign(6, -1e-3);
  p.wells.push_back(w);
  return p;
}

FieldY flat_y(const FlowProblem& p, double v) {
  return {std::vector<double>(p.grid.n_active(), v)};
}

}  // namespace

TEST_SUITE_BEGIN("flow");

TEST_CASE("equilibrium invariance with no sources and no-flow boundaries") {
  Grid g = Grid::regular(7, 4, 3.0, 2.0);
  FlowProblem p;
  p.grid = g;
  p.specific_yield = 0.25;
  p.initial_head.assign(g.n_active(), 7.0);
  p.dt.assign(5, 10.0);
  p.recharge.assign(5, 0.0);
  const FieldU u = solve(p, flat_y(p, 0.3));
  for (std::size_t s = 0; s < u.n_steps; ++s)
    for (std::size_t a = 0; a < u.n_active; ++a) CHECK(u.at(s, a) == 7.0);
}

TEST_CASE("dupuit steady profile at 200 cells") {
  const auto r = flow_cases::dupuit_case(200);
  CHECK(r.linf <= 1e-3 * r.range);
}

TEST_CASE("manufactured solution converges at order 2 in space, 1 in time") {
  const auto orders = flow_cases::convergence_orders();
  CHECK(orders.space >= 1.8);
  CHECK(orders.time >= 0.9);
}

TEST_CASE("mass balance holds on a stressed transient run") {
  const FlowProblem p = small_problem();
  SolveStats stats;
  solve(p, flat_y(p, 0.5), &stats);
  CHECK(stats.max_mass_error <= 1e-8);
  CHECK(stats.max_residual <= p.picard_tol);
}

TEST_CASE("monotone response to recharge") {
  const FlowProblem p = small_problem();
  FlowProblem wetter = p;
  for (auto& r : wetter.recharge) r *= 1.2;
  const FieldY y = flat_y(p, 0.4);
  const FieldU u0 = solve(p, y);
  const FieldU u1 = solve(wetter, y);
  for (std::size_t k = 0; k < u0.v.size(); ++k) CHECK(u1.v[k] >= u0.v[k] - 1e-9);
}

TEST_CASE("solve is deterministic") {
  const FlowProblem p = small_problem();
  const FieldY y = flat_y(p, 0.7);
  const FieldU a = solve(p, y);
  const FieldU b = solve(p, y);
  for (std::size_t k = 0; k < a.v.size(); ++k) CHECK(a.v[k] == b.v[k]);
}

TEST_CASE("dewatering is flagged") {
  Grid g = Grid::regular(2, 1, 1.0, 1.0);
  FlowProblem p;
  p.grid = g;
  p.specific_yield = 0.2;
  p.dry_floor = 1e-3;
  p.initial_head.assign(2, 0.5);
  p.dt.assign(3, 100.0);
  p.recharge.assign(3, 0.0);
  p.fixed_head.push_back({g.cell_id(0, 0), 5e-4});  // below the floor
  CHECK_THROWS_WITH_AS(solve(p, flat_y(p, 0.0)), doctest::Contains("dewatering"),
                       NumericalError);
}

TEST_CASE("observe basics") {
  const FlowProblem p = small_problem();
  const FieldU u = solve(p, flat_y(p, 0.2));

  ObsSpec one;
  one.cells = {p.grid.cell_id(2, 1)};
  one.times = {p.time_of_step(3)};
  const auto v1 = observe(u, p, one);
  REQUIRE(v1.size() == 1);
  const auto a = static_cast<std::size_t>(p.grid.active_of_cell[p.grid.cell_id(2, 1)]);
  CHECK(v1[0] == u.at(3, a));

  ObsSpec grid13;  // location-major, time-minor ordering
  grid13.cells = {p.grid.cell_id(1, 1), p.grid.cell_id(3, 2)};
  grid13.times = {p.time_of_step(2), p.time_of_step(4), p.time_of_step(5)};
  const auto v = observe(u, p, grid13);
  REQUIRE(v.size() == 6);
  const auto b = static_cast<std::size_t>(p.grid.active_of_cell[p.grid.cell_id(1, 1)]);
  CHECK(v[0] == u.at(2, b));
  CHECK(v[2] == u.at(5, b));

  ObsSpec dup;  // duplicated entries are kept
  dup.cells = {p.grid.cell_id(1, 1), p.grid.cell_id(1, 1)};
  dup.times = {p.time_of_step(2)};
  const auto vd = observe(u, p, dup);
  REQUIRE(vd.size() == 2);
  CHECK(vd[0] == vd[1]);
}

TEST_CASE("observe rejects inactive cells and off-grid times") {
  FlowProblem p = small_problem();
  p.grid.set_inactive(5, 4);
  p.grid.finalize();
  p.initial_head.assign(p.grid.n_active(), 8.0);
  const FieldU u = solve(p, flat_y(p, 0.2));

  ObsSpec bad_cell;
  bad_cell.cells = {p.grid.cell_id(5, 4)};
  bad_cell.times = {p.time_of_step(1)};
  CHECK_THROWS_AS(observe(u, p, bad_cell), ConfigError);

  ObsSpec bad_time;
  bad_time.cells = {p.grid.cell_id(1, 1)};
  bad_time.times = {p.time_of_step(p.n_steps() - 1) + 100.0};
  CHECK_THROWS_AS(observe(u, p, bad_time), ConfigError);
}

TEST_CASE("scenario scales wells and recharge") {
  const FlowProblem p = small_problem();
  const FlowProblem same = scenario(p, 1.0, 1.0);
  CHECK(same.wells[0].rate[0] == p.wells[0].rate[0]);
  CHECK(same.recharge[3] == p.recharge[3]);

  const FlowProblem forecast = scenario(p, 1.5, 0.6);
  CHECK(forecast.wells[0].rate[2] == doctest::Approx(1.5 * p.wells[0].rate[2]));
  CHECK(forecast.recharge[2] == doctest::Approx(0.6 * p.recharge[2]));
  CHECK(forecast.ghb[0].conductance == p.ghb[0].conductance);

  const FlowProblem off = scenario(p, 0.0, 0.0);
  CHECK(off.wells[0].rate[1] == 0.0);
  CHECK(off.recharge[1] == 0.0);
}

TEST_CASE("monitor window drops the warmup steps") {
  const FlowProblem p = small_problem();
  const FieldU u = solve(p, flat_y(p, 0.2));
  const auto w = monitor_window(u, p);
  CHECK(w.size() == p.n_monitor() * u.n_active);
  CHECK(w[0] == u.at(p.n_warmup, 0));
}

TEST_CASE("upstream weighting also conserves mass") {
  FlowProblem p = small_problem();
  p.weighting = FaceWeighting::upstream;
  SolveStats stats;
  solve(p, flat_y(p, 0.5), &stats);
  CHECK(stats.max_mass_error <= 1e-8);
}

TEST_SUITE_END();
