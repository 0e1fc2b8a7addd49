#include <benchmark/benchmark.h>

#include "slt/decomposition.hpp"
#include "slt/lattice_walk.hpp"
#include "slt/local_times.hpp"
#include "slt/montecarlo.hpp"
#include "slt/site_counter.hpp"

namespace {

void BM_DirectionSampler(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  slt::RngStream rng(1, 0);
  slt::DirectionSampler dir(d);
  int acc = 0;
  for (auto _ : state) {
    for (int i = 0; i < 1024; ++i) acc += dir.next(rng);
  }
  benchmark::DoNotOptimize(acc);
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_DirectionSampler)->Arg(3)->Arg(4)->Arg(5);

void BM_BulkSteps(benchmark::State& state) {
  const int d = 3;
  const auto steps = static_cast<std::uint64_t>(state.range(0));
  slt::RngStream rng(2, 0);
  std::vector<slt::Coord> pos(d, 0);
  for (auto _ : state) {
    slt::add_bulk_steps(rng, d, steps, pos);
    benchmark::DoNotOptimize(pos.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BulkSteps)->Arg(64)->Arg(4096)->Arg(1 << 20);

void BM_OccupancyPath(benchmark::State& state) {
  const auto n = static_cast<std::uint64_t>(state.range(0));
  slt::PathSampler ps(3, n);
  std::uint64_t replica = 0;
  for (auto _ : state) {
    slt::RngStream rng(3, replica++);
    benchmark::DoNotOptimize(ps.sample(rng, n).size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OccupancyPath)->Arg(4096)->Arg(1 << 16);

void BM_Accumulate(benchmark::State& state) {
  slt::RngStream rng(4, 0);
  const auto inc = slt::generate_increments(3, state.range(0), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(slt::accumulate(inc).site_count());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Accumulate)->Arg(4096)->Arg(1 << 16);

void BM_VerifySandwich(benchmark::State& state) {
  slt::RngStream rng(5, 0);
  const auto inc = slt::generate_increments(3, 4096, rng);
  const auto sub = slt::Subdivision::dyadic(4096);
  const int depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(slt::verify_sandwich(inc, depth, 2.5, sub).upper);
  }
}
BENCHMARK(BM_VerifySandwich)->Arg(1)->Arg(6);

void BM_StrandProfileAllDepths(benchmark::State& state) {
  slt::RngStream rng(6, 0);
  const auto inc = slt::generate_increments(3, 4096, rng);
  const auto sub = slt::Subdivision::dyadic(4096);
  for (auto _ : state) {
    const slt::StrandProfile profile(inc, 6);
    double acc = 0.0;
    for (int depth = 1; depth <= 6; ++depth) {
      for (const double q : {1.5, 2.0, 2.5, 3.0}) acc += profile.report(depth, q, sub).upper;
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_StrandProfileAllDepths);

}  // namespace
BENCHMARK_MAIN();
