#include <benchmark/benchmark.h>

#include "geognn/filterbank.hpp"
#include "geognn/gnn.hpp"
#include "geognn/manifold.hpp"
#include "geognn/spectral.hpp"

namespace {

using namespace geognn;

KernelConfig dense_rate_kernel() {
  KernelConfig k;
  k.kind = KernelKind::DenseGaussian;
  k.intrinsic_dim = 1;
  k.eps_rule = EpsRule::DenseRate;
  return k;
}

void BM_BuildDenseGraph(benchmark::State& state) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  const int n = static_cast<int>(state.range(0));
  const auto cloud = sample_uniform(m, n, 1);
  for (auto _ : state) {
    const GeoGraph g = build_graph(cloud, dense_rate_kernel());
    benchmark::DoNotOptimize(g.avg_degree());
  }
}
BENCHMARK(BM_BuildDenseGraph)->Arg(250)->Arg(500)->Arg(1000);

void BM_BuildSparseGraph(benchmark::State& state) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  const int n = static_cast<int>(state.range(0));
  const auto cloud = sample_uniform(m, n, 1);
  KernelConfig k;
  k.kind = KernelKind::SparseCompact;
  k.intrinsic_dim = 1;
  k.eps_rule = EpsRule::SparseRate;
  for (auto _ : state) {
    const GeoGraph g = build_graph(cloud, k);
    benchmark::DoNotOptimize(g.avg_degree());
  }
}
BENCHMARK(BM_BuildSparseGraph)->Arg(500)->Arg(1000)->Arg(2000);

void BM_EigSym(benchmark::State& state) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  const int n = static_cast<int>(state.range(0));
  const auto cloud = sample_uniform(m, n, 1);
  const GeoGraph g = build_graph(cloud, dense_rate_kernel());
  for (auto _ : state) {
    const Spectrum s = eig_sym(g, std::min(n, 64));
    benchmark::DoNotOptimize(s.eigenvalues(0));
  }
}
BENCHMARK(BM_EigSym)->Arg(100)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Lanczos(benchmark::State& state) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  const int n = static_cast<int>(state.range(0));
  const auto cloud = sample_uniform(m, n, 1);
  const GeoGraph g = build_graph(cloud, dense_rate_kernel());
  for (auto _ : state) {
    const Spectrum s = eig_sym_lanczos(g, 8);
    benchmark::DoNotOptimize(s.eigenvalues(0));
  }
}
BENCHMARK(BM_Lanczos)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_GraphFilterApply(benchmark::State& state) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  const int n = static_cast<int>(state.range(0));
  const GeoGraph g = build_graph(sample_uniform(m, n, 1), dense_rate_kernel());
  const FilterCoeffs h{{0.1, 0.5, 0.3, 0.1}};
  Vector x(n);
  for (int i = 0; i < n; ++i) x(i) = std::sin(0.1 * i);
  graph_filter_apply(h, g, x);  // warm the spectrum cache
  for (auto _ : state) benchmark::DoNotOptimize(graph_filter_apply(h, g, x));
}
BENCHMARK(BM_GraphFilterApply)->Arg(250)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_GnnForward(benchmark::State& state) {
  const auto m = ManifoldModel::make(ManifoldKind::Circle);
  const int n = static_cast<int>(state.range(0));
  const GeoGraph g = build_graph(sample_uniform(m, n, 1), dense_rate_kernel());
  const GnnArch arch = GnnArch::make({3, 16, 8}, 5, Nonlinearity::ReLU, 3);
  Matrix x(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = std::sin(0.1 * i + j);
  gnn_forward(arch, g, x);  // warm the spectrum cache
  for (auto _ : state) benchmark::DoNotOptimize(gnn_forward(arch, g, x).output);
}
BENCHMARK(BM_GnnForward)->Arg(300)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
