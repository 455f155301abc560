// Serial vs OpenMP timings for the data-parallel kernels, with a correctness
// column: the parallel variants are chunk-deterministic, so the difference
// must be exactly zero.

#include <chrono>
#include <cstdio>
#include <vector>

#include "starmin/asympt.hpp"
#include "starmin/genfun.hpp"
#include "starmin/kernels.hpp"
#include "starmin/meanfield.hpp"
#include "starmin/netsim.hpp"

using namespace starmin;
using Clock = std::chrono::steady_clock;

namespace {

double seconds(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

void row(const char* name, double t_serial, double t_parallel, double diff) {
  std::printf("%-34s %10.3f ms %10.3f ms %7.2fx   max|diff| = %g\n", name, t_serial * 1e3,
              t_parallel * 1e3, t_serial / t_parallel, diff);
}

void bench_coeffs_double(int M) {
  const auto t0 = Clock::now();
  const auto a = genfun::scaled_coefficients<double>(0.9, M, kernels::Exec::serial);
  const auto t1 = Clock::now();
  const auto b = genfun::scaled_coefficients<double>(0.9, M, kernels::Exec::parallel);
  const auto t2 = Clock::now();
  double diff = 0;
  for (int k = 1; k <= std::min(a.M, b.M); ++k) diff = std::max(diff, std::abs(a.c[k] - b.c[k]));
  row("coefficients (double)", seconds(t0, t1), seconds(t1, t2), diff);
}

void bench_coeffs_big(int M) {
  PrecisionGuard guard(320);
  const auto t0 = Clock::now();
  const auto a = genfun::scaled_coefficients<BigFloat>(0.9, M, kernels::Exec::serial);
  const auto t1 = Clock::now();
  const auto b = genfun::scaled_coefficients<BigFloat>(0.9, M, kernels::Exec::parallel);
  const auto t2 = Clock::now();
  double diff = 0;
  for (int k = 1; k <= std::min(a.M, b.M); ++k)
    diff = std::max(diff, std::abs(to_double(a.c[k] - b.c[k])));
  row("coefficients (320-bit)", seconds(t0, t1), seconds(t1, t2), diff);
}

void bench_meanfield_grid() {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> abar_s(grid.size()), abar_p(grid.size());
  const auto solve_into = [&](std::vector<double>& out, kernels::Exec exec) {
    kernels::for_each_index(
        grid.size(),
        [&](std::size_t i) {
          out[i] = meanfield::solve<double>(meanfield::SystemParams::from_rho(grid[i]), 1e-13)
                       .alpha_bar;
        },
        exec);
  };
  const auto t0 = Clock::now();
  solve_into(abar_s, kernels::Exec::serial);
  const auto t1 = Clock::now();
  solve_into(abar_p, kernels::Exec::parallel);
  const auto t2 = Clock::now();
  double diff = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    diff = std::max(diff, std::abs(abar_s[i] - abar_p[i]));
  row("equilibrium over rho grid", seconds(t0, t1), seconds(t1, t2), diff);
}

void bench_replicas() {
  const auto topo = netsim::Topology::star(40, 0.5);
  netsim::SimParams params;
  params.horizon = 400.0;
  const std::vector<std::uint64_t> seeds{11, 12, 13, 14, 15, 16, 17, 18};
  const auto t0 = Clock::now();
  const auto a = netsim::simulate_replicas(topo, params, seeds, false);
  const auto t1 = Clock::now();
  const auto b = netsim::simulate_replicas(topo, params, seeds, true);
  const auto t2 = Clock::now();
  double diff = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i)
    diff = std::max(diff, netsim::tv_distance(a[i].empirical_alpha, b[i].empirical_alpha));
  row("simulation replicas (8x)", seconds(t0, t1), seconds(t1, t2), diff);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", kernels::max_threads());
  std::printf("%-34s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");
  bench_coeffs_double(3000);
  bench_coeffs_big(700);
  bench_meanfield_grid();
  bench_replicas();
  return 0;
}
