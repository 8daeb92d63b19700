#include "invuq/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "invuq/band.hpp"
#include "invuq/errors.hpp"
#include "invuq/matrix.hpp"

namespace invuq {

double FlowProblem::time_of_step(std::size_t s) const {
  double t = 0.0;
  for (std::size_t i = 0; i <= s; ++i) t += dt[i];
  return t;
}

void FlowProblem::validate() const {
  if (specific_yield <= 0.0) throw ConfigError("flow: specific yield must be > 0");
  if (initial_head.size() != grid.n_active())
    throw ConfigError("flow: initial head length must equal active cell count");
  if (dt.empty()) throw ConfigError("flow: at least one time step required");
  for (double d : dt)
    if (d <= 0.0) throw ConfigError("flow: time steps must be positive");
  if (n_warmup >= dt.size()) throw ConfigError("flow: warmup must leave monitored steps");
  if (recharge.size() != dt.size())
    throw ConfigError("flow: recharge series length must equal step count");
  for (const auto& w : wells) {
    if (w.cell >= grid.mask.size() || !grid.mask[w.cell])
      throw ConfigError("flow: well cell " + std::to_string(w.cell) + " is not active");
    if (w.rate.size() != dt.size())
      throw ConfigError("flow: well rate series length must equal step count");
  }
  for (const auto& g : ghb)
    if (g.cell >= grid.mask.size() || !grid.mask[g.cell])
      throw ConfigError("flow: ghb cell is not active");
  for (const auto& f : fixed_head) {
    if (f.cell >= grid.mask.size() || !grid.mask[f.cell])
      throw ConfigError("flow: fixed-head cell is not active");
    if (!std::isfinite(f.head)) throw ConfigError("flow: fixed-head value not finite");
  }
}

namespace {

struct Face {
  std::size_t a, b;   // active ordinals, a < b
  double geom;        // face_length / distance
};

std::vector<Face> build_faces(const Grid& g) {
  std::vector<Face> faces;
  for (std::size_t iy = 0; iy < g.ny; ++iy) {
    for (std::size_t ix = 0; ix < g.nx; ++ix) {
      if (!g.is_active(ix, iy)) continue;
      const std::size_t a = static_cast<std::size_t>(g.active_of_cell[g.cell_id(ix, iy)]);
      if (ix + 1 < g.nx && g.is_active(ix + 1, iy)) {
        const std::size_t b = static_cast<std::size_t>(g.active_of_cell[g.cell_id(ix + 1, iy)]);
        faces.push_back({a, b, g.dy / g.dx});
      }
      if (iy + 1 < g.ny && g.is_active(ix, iy + 1)) {
        const std::size_t b = static_cast<std::size_t>(g.active_of_cell[g.cell_id(ix, iy + 1)]);
        faces.push_back({a, b, g.dx / g.dy});
      }
    }
  }
  return faces;
}

}  // namespace

FieldU solve(const FlowProblem& p, const FieldY& y, SolveStats* stats) {
  p.validate();
  const Grid& g = p.grid;
  const std::size_t n = g.n_active();
  if (y.v.size() != n) throw ConfigError("flow: y field length must equal active cell count");

  std::vector<double> hk(n);
  for (std::size_t a = 0; a < n; ++a) hk[a] = std::exp(y.v[a]);

  const std::vector<Face> faces = build_faces(g);
  std::size_t band = 1;
  for (const auto& f : faces) band = std::max(band, f.b - f.a);

  std::vector<char> fixed(n, 0);
  std::vector<double> fixed_value(n, 0.0);
  for (const auto& f : p.fixed_head) {
    const std::size_t a = static_cast<std::size_t>(g.active_of_cell[f.cell]);
    fixed[a] = 1;
    fixed_value[a] = f.head;
  }

  // per-cell well rate series summed onto active ordinals
  std::vector<double> well_rate(n * p.n_steps(), 0.0);
  for (const auto& w : p.wells) {
    const std::size_t a = static_cast<std::size_t>(g.active_of_cell[w.cell]);
    for (std::size_t s = 0; s < p.n_steps(); ++s) well_rate[s * n + a] += w.rate[s];
  }

  const double area = g.dx * g.dy;
  const double sy = p.specific_yield;

  FieldU out;
  out.n_active = n;
  out.n_steps = p.n_steps();
  out.v.resize(n * p.n_steps());

  std::vector<double> u_old = p.initial_head;
  for (std::size_t a = 0; a < n; ++a)
    if (fixed[a]) u_old[a] = fixed_value[a];

  std::vector<double> u = u_old;
  std::vector<double> tface(faces.size());

  for (std::size_t s = 0; s < p.n_steps(); ++s) {
    const double dt = p.dt[s];
    const double f_rate = p.recharge[s];

    auto face_t = [&](const Face& fc, const std::vector<double>& uref) {
      const double kh = 2.0 * hk[fc.a] * hk[fc.b] / (hk[fc.a] + hk[fc.b]);
      double uf;
      if (p.weighting == FaceWeighting::central)
        uf = 0.5 * (uref[fc.a] + uref[fc.b]);
      else
        uf = (uref[fc.a] >= uref[fc.b]) ? uref[fc.a] : uref[fc.b];
      return kh * std::max(uf, p.dry_floor) * fc.geom;
    };

    auto assemble = [&](const std::vector<double>& uref, BandMatrix& A, std::vector<double>& rhs) {
      A.zero();
      std::fill(rhs.begin(), rhs.end(), 0.0);
      for (std::size_t a = 0; a < n; ++a) {
        if (fixed[a]) {
          A.at(a, a) = 1.0;
          rhs[a] = fixed_value[a];
          continue;
        }
        const double uc = std::max(uref[a], p.dry_floor);
        const double stor = sy * uc * area / dt;
        const double src = f_rate + well_rate[s * n + a];
        A.at(a, a) = stor - src * area;
        rhs[a] = stor * u_old[a];
      }
      for (std::size_t fi = 0; fi < faces.size(); ++fi) {
        const Face& fc = faces[fi];
        const double t = face_t(fc, uref);
        tface[fi] = t;
        if (!fixed[fc.a]) {
          A.add(fc.a, fc.a, t);
          A.add(fc.a, fc.b, -t);
        }
        if (!fixed[fc.b]) {
          A.add(fc.b, fc.b, t);
          A.add(fc.b, fc.a, -t);
        }
      }
      for (const auto& gh : p.ghb) {
        const std::size_t a = static_cast<std::size_t>(g.active_of_cell[gh.cell]);
        if (fixed[a]) continue;
        A.add(a, a, gh.conductance);
        rhs[a] += gh.conductance * gh.external_head;
      }
    };

    bool converged = false;
    bool have_solve = false;
    double resid = 0.0;
    BandMatrix A(n, band, band);
    std::vector<double> rhs(n);
    std::vector<double> uref_solve, tface_solve;
    for (std::size_t it = 0; it < p.picard_max; ++it) {
      assemble(u, A, rhs);
      const std::vector<double> au = A.mul(u);
      double rr = 0.0, bb = 0.0;
      for (std::size_t a = 0; a < n; ++a) {
        rr += (au[a] - rhs[a]) * (au[a] - rhs[a]);
        bb += rhs[a] * rhs[a];
      }
      resid = std::sqrt(rr) / std::max(std::sqrt(bb), 1e-300);
      if (stats) stats->total_picard++;
      if (resid <= p.picard_tol) {
        converged = true;
        break;
      }
      uref_solve = u;
      tface_solve = tface;
      have_solve = true;
      u = A.solve_inplace(rhs);
      if (!all_finite(u))
        throw NumericalError("flow: non-finite head at step " + std::to_string(s));
    }
    if (!converged)
      throw NumericalError("flow: Picard did not converge at step " + std::to_string(s) +
                           " (residual " + std::to_string(resid) + ")");
    for (std::size_t a = 0; a < n; ++a)
      if (!fixed[a] && u[a] <= p.dry_floor)
        throw NumericalError("flow: dewatering at step " + std::to_string(s) + ", active cell " +
                             std::to_string(a));

    // Discrete mass balance of the update actually applied: coefficients of
    // the last solved system with its exact solution, so the identity holds
    // to solver precision.
    const std::vector<double>& uc_ref = have_solve ? uref_solve : u;
    const std::vector<double>& tf_ref = have_solve ? tface_solve : tface;
    double storage = 0.0, source = 0.0, ghbflux = 0.0, fixedflux = 0.0;
    double gross = 0.0;  // sum of absolute contributions (percent-discrepancy scale)
    for (std::size_t a = 0; a < n; ++a) {
      if (fixed[a]) continue;
      const double st = sy * std::max(uc_ref[a], p.dry_floor) * (u[a] - u_old[a]) / dt * area;
      const double sr = (f_rate + well_rate[s * n + a]) * u[a] * area;
      storage += st;
      source += sr;
      gross += std::fabs(st) + std::fabs(sr);
    }
    for (const auto& gh : p.ghb) {
      const std::size_t a = static_cast<std::size_t>(g.active_of_cell[gh.cell]);
      if (fixed[a]) continue;
      const double q = gh.conductance * (gh.external_head - u[a]);
      ghbflux += q;
      gross += std::fabs(q);
    }
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      const Face& fc = faces[fi];
      const double t = tf_ref[fi];
      double q = 0.0;
      if (fixed[fc.a] && !fixed[fc.b]) q = t * (u[fc.a] - u[fc.b]);
      if (fixed[fc.b] && !fixed[fc.a]) q = t * (u[fc.b] - u[fc.a]);
      fixedflux += q;
      gross += std::fabs(q);
    }
    const double err = storage - source - ghbflux - fixedflux;
    const double rel = (gross > 0.0) ? std::fabs(err) / gross : 0.0;
    if (stats) {
      stats->max_mass_error = std::max(stats->max_mass_error, rel);
      stats->max_residual = std::max(stats->max_residual, resid);
    }
    if (rel > 1e-8)
      throw NumericalError("flow: mass balance violated at step " + std::to_string(s) +
                           " (relative error " + std::to_string(rel) + ")");

    std::copy(u.begin(), u.end(), out.v.begin() + static_cast<std::ptrdiff_t>(s * n));
    u_old = u;
  }
  return out;
}

ResolvedObs resolve_obs(const FlowProblem& p, const ObsSpec& spec) {
  const Grid& g = p.grid;
  ResolvedObs r;
  std::vector<double> step_time(p.n_steps());
  double t = 0.0;
  for (std::size_t s = 0; s < p.n_steps(); ++s) {
    t += p.dt[s];
    step_time[s] = t;
  }
  std::vector<std::size_t> steps;
  for (double tq : spec.times) {
    std::size_t best = 0;
    double dbest = std::fabs(tq - step_time[0]);
    for (std::size_t s = 1; s < p.n_steps(); ++s) {
      const double d = std::fabs(tq - step_time[s]);
      if (d < dbest) {
        dbest = d;
        best = s;
      }
    }
    if (dbest > 0.5 * p.dt[best] + 1e-9 * step_time.back())
      throw ConfigError("observe: time " + std::to_string(tq) + " is off the time grid");
    steps.push_back(best);
  }
  for (std::size_t c : spec.cells) {
    if (c >= g.mask.size() || !g.mask[c])
      throw ConfigError("observe: cell " + std::to_string(c) + " is not active");
    const std::size_t a = static_cast<std::size_t>(g.active_of_cell[c]);
    for (std::size_t s : steps) {
      r.active.push_back(a);
      r.step.push_back(s);
    }
  }
  return r;
}

std::vector<double> observe(const FieldU& u, const FlowProblem& p, const ObsSpec& spec) {
  const ResolvedObs r = resolve_obs(p, spec);
  std::vector<double> out(r.active.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u.at(r.step[i], r.active[i]);
  return out;
}

FlowProblem scenario(const FlowProblem& p, double pumping_scale, double recharge_scale) {
  if (pumping_scale < 0.0 || recharge_scale < 0.0)
    throw ConfigError("scenario: scales must be >= 0");
  FlowProblem q = p;
  for (auto& w : q.wells)
    for (auto& r : w.rate) r *= pumping_scale;
  for (auto& r : q.recharge) r *= recharge_scale;
  return q;
}

std::vector<double> monitor_window(const FieldU& u, const FlowProblem& p) {
  const std::size_t n = u.n_active;
  const std::size_t m = p.n_monitor();
  std::vector<double> out(m * n);
  std::copy(u.v.begin() + static_cast<std::ptrdiff_t>(p.n_warmup * n), u.v.end(), out.begin());
  return out;
}

}  // namespace invuq
