#include <benchmark/benchmark.h>

#include "fredholm/family.hpp"
#include "fredholm/linalg.hpp"

using namespace fredholm;

static void BM_HermitianEig(benchmark::State& state) {
  const auto dim = static_cast<int>(state.range(0));
  const auto a = HermitianOperator::symmetrized(random_hermitian(dim, 1));
  for (auto _ : state) benchmark::DoNotOptimize(hermitian_eig(a));
}
BENCHMARK(BM_HermitianEig)->RangeMultiplier(2)->Range(4, 128);

static void BM_SpectralProjection(benchmark::State& state) {
  const auto dim = static_cast<int>(state.range(0));
  const auto eig = hermitian_eig(HermitianOperator::symmetrized(random_hermitian(dim, 2)));
  for (auto _ : state) benchmark::DoNotOptimize(spectral_projection(eig, Window::at_least(0.0137)));
}
BENCHMARK(BM_SpectralProjection)->RangeMultiplier(2)->Range(4, 128);

static void BM_SubspaceDistance(benchmark::State& state) {
  const auto dim = static_cast<Eigen::Index>(state.range(0));
  const Subspace v = Subspace::span_of(random_hermitian(static_cast<int>(dim), 3).leftCols(dim / 2));
  const Subspace w = Subspace::span_of(random_hermitian(static_cast<int>(dim), 4).leftCols(dim / 2));
  for (auto _ : state) benchmark::DoNotOptimize(subspace_distance(v, w));
}
BENCHMARK(BM_SubspaceDistance)->RangeMultiplier(2)->Range(4, 128);

static void BM_PolarPartialIsometry(benchmark::State& state) {
  const auto dim = static_cast<int>(state.range(0));
  const ComplexMatrix b = random_hermitian(dim, 5) * random_hermitian(dim, 6);
  for (auto _ : state) benchmark::DoNotOptimize(polar_partial_isometry(b));
}
BENCHMARK(BM_PolarPartialIsometry)->RangeMultiplier(2)->Range(4, 64);
