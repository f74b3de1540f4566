#include <benchmark/benchmark.h>

#include "h2spec/h2spec.hpp"

using namespace h2spec;

namespace {

RankStructuredMatrix make(const PointCloud& cloud, Format f, double eps) {
  const ClusterTree t = build_tree(cloud, sfc_order(cloud), 32);
  return construct(laplace_kernel(), t, classify(t, admissibility_for(f, 1.0)), eps);
}

// Factorization time on a 1D chain; the complexity fit should report ~N.
void BM_GldlChain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const RankStructuredMatrix H = make(generate_grid(n, 1), Format::H2, 1e-8);
  const Interval g = gershgorin_interval(H);
  const double mu = 0.5 * (g.lo + g.hi) + 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(generalized_ldl(H, mu).inertia.neg);
  state.SetComplexityN(n);
}
BENCHMARK(BM_GldlChain)->RangeMultiplier(2)->Range(1024, 8192)->Unit(benchmark::kMillisecond)->Complexity();

// One inertia evaluation on the circle, per format.
void BM_InertiaCircle(benchmark::State& state) {
  const Format f = static_cast<Format>(state.range(0));
  const RankStructuredMatrix H = make(generate_circle(static_cast<int>(state.range(1))), f, 1e-7);
  for (auto _ : state) benchmark::DoNotOptimize(inertia(H, 1500.0).neg);
  state.SetLabel(format_name(f));
  state.counters["max_rank"] = max_rank(H);
}
BENCHMARK(BM_InertiaCircle)
    ->ArgsProduct({{static_cast<int>(Format::BLR2), static_cast<int>(Format::HSS), static_cast<int>(Format::H2)},
                   {512, 1024}})
    ->Unit(benchmark::kMillisecond);

// Construction cost on 3D grids, reporting the maximum rank.
void BM_Construct3D(benchmark::State& state) {
  const Format f = static_cast<Format>(state.range(0));
  const PointCloud cloud = generate_grid(static_cast<int>(state.range(1)), 3);
  int rank = 0;
  for (auto _ : state) rank = max_rank(make(cloud, f, 1e-6));
  state.SetLabel(format_name(f));
  state.counters["max_rank"] = rank;
}
BENCHMARK(BM_Construct3D)
    ->ArgsProduct({{static_cast<int>(Format::HSS), static_cast<int>(Format::H2)}, {6, 8}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
