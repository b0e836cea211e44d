#include <benchmark/benchmark.h>

#include "hbt/detector.hpp"
#include "hbt/equilibrium.hpp"
#include "hbt/expansion.hpp"
#include "hbt/flux_exact.hpp"
#include "hbt/model.hpp"
#include "hbt/oracle.hpp"

namespace {

using namespace hbt;

void bm_solve_fugacity(benchmark::State& s) {
  const auto tr = trap::isotropic();
  const double t = static_cast<double>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(solve_fugacity(tr, t, 1e6).fugacity);
}
BENCHMARK(bm_solve_fugacity)->Arg(20)->Arg(93)->Arg(300);

void bm_critical_temperature(benchmark::State& s) {
  const auto tr = trap::isotropic();
  for (auto _ : s) benchmark::DoNotOptimize(critical_temperature(tr, 1e6));
}
BENCHMARK(bm_critical_temperature);

// g2 at the cloud centre; the argument is T - T* in hbar omega / k_B
void bm_g2_eq(benchmark::State& s) {
  const auto tr = trap::isotropic();
  const auto st = solve_fugacity(tr, critical_temperature(tr, 1e6) + static_cast<double>(s.range(0)), 1e6);
  for (auto _ : s) benchmark::DoNotOptimize(g2_eq(st, tr, {{0.1, 0, 0}, {}}));
}
BENCHMARK(bm_g2_eq)->Arg(-2)->Arg(0)->Arg(2)->Arg(50);

void bm_g2_flux_leading(benchmark::State& s) {
  const trap tr{{0.5, 1.0, 2.0}, 0.3, 50.0};
  const auto st = solve_fugacity(tr, 25.0, 2e4);
  const double t0 = fall_time(tr);
  const auto p = plane_pair(tr, 0.3, 0, -0.1, 0.2);
  for (auto _ : s) benchmark::DoNotOptimize(g2_flux_leading(st, tr, t0 + 0.1, t0 - 0.1, p));
}
BENCHMARK(bm_g2_flux_leading);

void bm_g2_flux_exact(benchmark::State& s) {
  const trap tr{{0.5, 1.0, 2.0}, 0.3, 50.0};
  const auto st = solve_fugacity(tr, 25.0, 2e4);
  const double t0 = fall_time(tr);
  const auto p = plane_pair(tr, 0.3, 0, -0.1, 0.2);
  for (auto _ : s) benchmark::DoNotOptimize(g2_flux_exact(st, tr, t0 + 0.1, t0 - 0.1, p).g2);
}
BENCHMARK(bm_g2_flux_exact);

void bm_kernel_gu(benchmark::State& s) {
  const complex u(0.3, 1.1);
  for (auto _ : s) benchmark::DoNotOptimize(kernel_gu(0.4, -0.7, u));
}
BENCHMARK(bm_kernel_gu);

void bm_averaged_g2(benchmark::State& s) {
  const auto tr = trap::isotropic();
  const auto st = solve_fugacity(tr, critical_temperature(tr, 1e6), 1e6);
  for (auto _ : s) benchmark::DoNotOptimize(averaged_g2(st, tr, 0.1, {1, 0, 0}));
}
BENCHMARK(bm_averaged_g2)->Unit(benchmark::kMillisecond);

void bm_hermite_table(benchmark::State& s) {
  const int n = static_cast<int>(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(hermite_table(n, 1.3).back());
}
BENCHMARK(bm_hermite_table)->Arg(60)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();
