#include "mfspc/embedding.hpp"
#include "mfspc/manifold_fit.hpp"
#include "mfspc/processes.hpp"
#include "mfspc/rankcharts.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace mfspc;

namespace {

RowMatrix sphere_rows(Index n, Index D) {
  SphereConfig c;
  c.D = D;
  c.n = n;
  c.seed = 17;
  return generate_sphere_process(c).observations;
}

}  // namespace

static void BM_Deviation(benchmark::State& state) {
  const Index D = state.range(0);
  const RowMatrix rows = sphere_rows(700, D);
  FitConfig f;
  f.d_hint = 2;
  const ManifoldFit fit = fit_manifold(PointCloud(rows), f, 0.1);
  const RowMatrix probes = sphere_rows(64, D);
  Index i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(deviation(fit.manifold, probes.row(i++ % 64).transpose()));
  }
}
BENCHMARK(BM_Deviation)->Arg(6)->Arg(300);

static void BM_UdfmUpdate(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> ref(100);
  for (double& v : ref) v = normal(rng);
  ChartConfig c;
  c.permutations = static_cast<int>(state.range(0));
  UdfmChart chart(ref, c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chart.update(normal(rng)));
  }
}
BENCHMARK(BM_UdfmUpdate)->Arg(1000)->Iterations(500);

static void BM_KnnGraph(benchmark::State& state) {
  const PointCloud cloud(sphere_rows(state.range(0), 6));
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_knn_graph(cloud, 15));
  }
}
BENCHMARK(BM_KnnGraph)->Arg(700)->Arg(2000);

static void BM_LppFit(benchmark::State& state) {
  const PointCloud cloud(sphere_rows(700, state.range(0)));
  const NeighborGraph graph = build_knn_graph(cloud, 15);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_lpp(cloud, 3, graph));
  }
}
BENCHMARK(BM_LppFit)->Arg(6)->Arg(50);
BENCHMARK_MAIN();
