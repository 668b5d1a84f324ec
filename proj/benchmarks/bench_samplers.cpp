#include <benchmark/benchmark.h>

#include "sidgff/covariance.hpp"
#include "sidgff/green.hpp"
#include "sidgff/samplers.hpp"
#include "sidgff/second_moment.hpp"

namespace {

using namespace sidgff;

void BM_GreenMatrix(benchmark::State& state) {
  const GridSize g(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(green_matrix(grid_rect(g)));
}
BENCHMARK(BM_GreenMatrix)->DenseRange(3, 6)->Unit(benchmark::kMillisecond);

void BM_DgffSample(benchmark::State& state) {
  const GridSize g(static_cast<int>(state.range(0)));
  const auto method = state.range(1) == 0 ? DgffMethod::cholesky : DgffMethod::precision;
  const DgffSampler sampler(g, method);
  Eigen::VectorXd out;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    sampler.sample_interior(++seed, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_DgffSample)->ArgsProduct({{4, 5, 6}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_PsiSample(benchmark::State& state) {
  const GridSize g(static_cast<int>(state.range(0)));
  const PsiSampler sampler(named_profile("convex2"), g, DgffMethod::precision);
  Eigen::VectorXd phi, out;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    sampler.sample_interior(++seed, phi, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_PsiSample)->DenseRange(4, 6)->Unit(benchmark::kMicrosecond);

void BM_IbrwSample(benchmark::State& state) {
  const IbrwSampler sampler(named_profile("convex2"), GridSize(static_cast<int>(state.range(0))));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(++seed).values.data());
}
BENCHMARK(BM_IbrwSample)->DenseRange(4, 8, 2)->Unit(benchmark::kMicrosecond);

void BM_MibrwSample(benchmark::State& state) {
  const MibrwSampler sampler(named_profile("convex2"), GridSize(static_cast<int>(state.range(0))));
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(++seed).values.data());
}
BENCHMARK(BM_MibrwSample)->DenseRange(4, 8, 2)->Unit(benchmark::kMicrosecond);

void BM_MibrwSpectralPair(benchmark::State& state) {
  const MibrwSpectralSampler sampler(named_profile("convex2"),
                                     GridSize(static_cast<int>(state.range(0))));
  std::vector<double> a, b;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    sampler.sample_pair(++seed, a, b);
    benchmark::DoNotOptimize(a.data());
  }
}
BENCHMARK(BM_MibrwSpectralPair)->DenseRange(4, 8, 2)->Unit(benchmark::kMicrosecond);

void BM_PathEventHits(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const StepProfile p = named_profile("convex2");
  const MibrwSampler sampler(p, GridSize(n), 0, true);
  const PathEventSpec spec = PathEventSpec::make(p, n, 0.0, 2.0);
  const FieldSample s = sampler.sample(1);
  for (auto _ : state) benchmark::DoNotOptimize(path_event_hits(s, spec).size());
}
BENCHMARK(BM_PathEventHits)->DenseRange(5, 7)->Unit(benchmark::kMicrosecond);

void BM_CovPsi(benchmark::State& state) {
  const GridSize g(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cov_psi(named_profile("convex2"), g));
}
BENCHMARK(BM_CovPsi)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
