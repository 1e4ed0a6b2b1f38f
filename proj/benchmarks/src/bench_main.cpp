// Microbenchmarks for the hot paths: single point solves, full density
// grids, gaussian quadrature, the moment recursion, and the end-to-end
// empirical spectrum of a small network.

#include <benchmark/benchmark.h>

#include <complex>
#include <cstddef>
#include <vector>

#include "djs/activation.hpp"
#include "djs/measure.hpp"
#include "djs/network.hpp"
#include "djs/simulate.hpp"
#include "djs/solver.hpp"
#include "djs/stransform.hpp"

namespace {

djs::SpectralMeasure two_atom_law() {
  return djs::SpectralMeasure::from_atoms({{0.5, 0.4}, {1.5, 0.6}});
}

void BM_SolveHKPoint(benchmark::State& state) {
  const auto nu = two_atom_law();
  const std::complex<double> z(1.1, 1e-3);
  for (auto _ : state) {
    const auto sol = djs::solve_hk(nu, nu, z);
    benchmark::DoNotOptimize(sol.f);
  }
}
BENCHMARK(BM_SolveHKPoint);

void BM_ResolveDensity(benchmark::State& state) {
  const auto nu = two_atom_law();
  djs::SolverConfig config;
  config.grid_points = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const auto grid = djs::resolve_density(nu, nu, config);
    benchmark::DoNotOptimize(grid.mass_estimate);
  }
}
BENCHMARK(BM_ResolveDensity)->Arg(500)->Arg(1000)->Arg(2000);

void BM_Diamond(benchmark::State& state) {
  const auto nu = two_atom_law();
  djs::SolverConfig config;
  config.grid_points = 500;
  for (auto _ : state) {
    const auto law = djs::diamond(nu, nu, config);
    benchmark::DoNotOptimize(law.size());
  }
}
BENCHMARK(BM_Diamond);

void BM_GaussExpect(benchmark::State& state) {
  const auto act = djs::make_tanh();
  for (auto _ : state) {
    const double v = djs::gauss_expect(
        [&](double x) { return act.dphi(x) * act.dphi(x); }, 1.3);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_GaussExpect);

void BM_DeepMomentSeries(benchmark::State& state) {
  const auto nu = two_atom_law();
  for (auto _ : state) {
    const auto moments =
        djs::deep_moment_series(nu, static_cast<std::size_t>(state.range(0)), 6);
    benchmark::DoNotOptimize(moments.back());
  }
}
BENCHMARK(BM_DeepMomentSeries)->Arg(1)->Arg(3);

void BM_JacobianSpectrum(benchmark::State& state) {
  djs::NetworkConfig config;
  config.layers = 2;
  config.widths.assign(3, static_cast<std::size_t>(state.range(0)));
  config.activation = "tanh";
  config.sigma_b2 = 0.1;
  config.input_mode = djs::InputMode::q1_target;
  config.q1 = 0.8;
  std::size_t replica = 0;
  for (auto _ : state) {
    const auto spec = djs::jacobian_spectrum(config, replica++);
    benchmark::DoNotOptimize(spec.eigenvalues.back());
  }
}
BENCHMARK(BM_JacobianSpectrum)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
