#include <numbers>

#include <benchmark/benchmark.h>

#include "fredholm/index.hpp"
#include "fredholm/polarize.hpp"
#include "fredholm/suspension.hpp"

using namespace fredholm;

static void BM_BuildAtlas(benchmark::State& state) {
  const auto f = random_smooth(static_cast<int>(state.range(0)), 7);
  for (auto _ : state) benchmark::DoNotOptimize(build_atlas(f));
}
BENCHMARK(BM_BuildAtlas)->Arg(4)->Arg(8)->Arg(16);

static void BM_FlowChartwise(benchmark::State& state) {
  const auto f = random_smooth(static_cast<int>(state.range(0)), 8);
  const auto atlas = build_atlas(f);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_flow_chartwise(index_chain(f, atlas)));
}
BENCHMARK(BM_FlowChartwise)->Arg(4)->Arg(8)->Arg(16);

static void BM_FlowOracle(benchmark::State& state) {
  const auto f = random_smooth(static_cast<int>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(spectral_flow_oracle(f));
}
BENCHMARK(BM_FlowOracle)->Arg(4)->Arg(8)->Arg(16);

static void BM_SuspensionIndex(benchmark::State& state) {
  const auto f = crossing(2, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(suspension_index(suspend(f)));
}
BENCHMARK(BM_SuspensionIndex)->Arg(2)->Arg(6);

static void BM_SectionExistence(benchmark::State& state) {
  const auto f = rotation(static_cast<int>(state.range(0)), 2.0 * std::numbers::pi, 101, 1);
  for (auto _ : state) benchmark::DoNotOptimize(section_existence(f));
}
BENCHMARK(BM_SectionExistence)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_PolarizedReplace(benchmark::State& state) {
  const auto f = truncated_shift_flow(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(flow_preservation_check(finite_polarized_replace(f)));
}
BENCHMARK(BM_PolarizedReplace)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
