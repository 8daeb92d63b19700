#include <benchmark/benchmark.h>

#include "invuq/flow.hpp"
#include "invuq/inversion.hpp"
#include "invuq/kle.hpp"
#include "invuq/linalg.hpp"
#include "invuq/rng.hpp"
#include "invuq/surrogate.hpp"

using namespace invuq;

namespace {

Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = rng.normal();
      a(i, j) = v;
      a(j, i) = v;
    }
  return a;
}

void BM_SymEig(benchmark::State& state) {
  const Matrix a = random_symmetric(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) {
    const EigResult e = sym_eig(a);
    benchmark::DoNotOptimize(e.values[0]);
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SymEig)->Arg(50)->Arg(100)->Arg(200)->Complexity();

void BM_Cholesky(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Matrix b = random_symmetric(n, 2);
  Matrix a = matmul_nt(b, b);
  for (std::size_t i = 0; i < n; ++i) a(i, i) += static_cast<double>(n);
  for (auto _ : state) {
    const CholResult c = cholesky(a);
    benchmark::DoNotOptimize(c.lower(0, 0));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Cholesky)->Arg(100)->Arg(200)->Arg(400)->Complexity();

FlowProblem bench_problem(std::size_t nx, std::size_t ny) {
  Grid g = Grid::regular(nx, ny, 50.0, 50.0);
  FlowProblem p;
  p.grid = g;
  p.initial_head.assign(g.n_active(), 20.0);
  p.dt.assign(25, 30.0);
  p.recharge.assign(25, 2e-4);
  for (std::size_t iy = 0; iy < ny; ++iy) p.ghb.push_back({g.cell_id(0, iy), 15.0, 18.5});
  WellSpec w;
  w.cell = g.cell_id(nx / 2, ny / 2);
  w.rate.assign(25, -4e-2);
  p.wells.push_back(w);
  return p;
}

void BM_FlowSolve(benchmark::State& state) {
  const auto nx = static_cast<std::size_t>(state.range(0));
  const FlowProblem p = bench_problem(nx, 2 * nx);
  RngStream rng(3);
  std::vector<double> y(p.grid.n_active());
  for (auto& v : y) v = 1.6 + 0.5 * rng.normal();
  const FieldY field{y};
  for (auto _ : state) {
    const FieldU u = solve(p, field);
    benchmark::DoNotOptimize(u.v.back());
  }
}
BENCHMARK(BM_FlowSolve)->Arg(10)->Arg(20);

void BM_KleFit(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  RngStream rng(4);
  std::vector<std::vector<double>> snaps(n, std::vector<double>(2000));
  for (auto& s : snaps) rng.fill_normal(s);
  for (auto _ : state) {
    const KLEBasis b = fit_kle(snaps, 0.1);
    benchmark::DoNotOptimize(b.eigenvalues[0]);
  }
}
BENCHMARK(BM_KleFit)->Arg(50)->Arg(100);

void BM_TrainEpoch(benchmark::State& state) {
  RngStream rng(5);
  LatentDataset d;
  d.inputs = Matrix(500, 30);
  d.targets = Matrix(500, 40);
  for (auto& v : d.inputs.flat()) v = rng.normal();
  for (auto& v : d.targets.flat()) v = rng.normal();
  SurrogateNet net;
  net.widths = {30, 48, 48, 40};
  net.theta.resize(net.param_count());
  for (auto& v : net.theta) v = 0.1 * rng.normal();
  std::vector<double> grad(net.theta.size());
  for (auto _ : state) {
    const double loss = lf_loss_grad(net, d, 1e-8, 1e-3, grad);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_TrainEpoch);

void BM_LatentLossGrad(benchmark::State& state) {
  RngStream rng(6);
  const std::size_t n_xi = 30, n_eta = 40, n_obs = 325, support = 20000;
  KLEBasis yb, ub;
  ub.mean.assign(support, 0.0);
  ub.eigenvalues.assign(n_eta, 1.0);
  ub.modes = Matrix(support, n_eta);
  for (auto& v : ub.modes.flat()) v = rng.normal();
  ub.total_energy = n_eta;
  yb.mean.assign(800, 0.0);
  yb.eigenvalues.assign(n_xi, 1.0);
  yb.modes = Matrix(800, n_xi);
  yb.total_energy = n_xi;

  Observations obs;
  for (std::size_t i = 0; i < n_obs; ++i) obs.u.push_back({i * 17 % support, rng.normal()});
  const LatentObsOperator op(obs, yb, ub);
  SurrogateNet net;
  net.widths = {n_xi, 48, 48, n_eta};
  net.theta.resize(net.param_count());
  for (auto& v : net.theta) v = 0.1 * rng.normal();

  std::vector<double> xi(n_xi), grad(n_xi);
  rng.fill_normal(xi);
  for (auto _ : state) {
    const double loss =
        latent_loss(op, net, 100.0, 0.0, 1.0, {}, {}, {}, xi, grad);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_LatentLossGrad);

}  // namespace

BENCHMARK_MAIN();
