#include <benchmark/benchmark.h>

#include "bench_common.hpp"

using namespace ones;

static void BM_EvolveRound(benchmark::State& state) {
  ClusterSpec cluster{16, 4};
  ProgressModel model;
  auto jobs = bench::make_jobs(static_cast<int>(state.range(0)), 4);
  auto ctx = make_evolve_context(cluster, jobs, model,
                                 packed_throughput_fn(cluster), 1000.0);
  EvolutionConfig cfg;
  Rng rng(1);
  auto pop = init_population(ctx, cfg, rng);
  std::uint64_t round = 0;
  for (auto _ : state) {
    pop = evolve_round(pop, ctx, cfg, derive_seed(7, round++));
    benchmark::DoNotOptimize(pop.members.data());
  }
}
BENCHMARK(BM_EvolveRound)->Arg(4)->Arg(16)->Arg(30);

static void BM_Refresh(benchmark::State& state) {
  ClusterSpec cluster{16, 4};
  ProgressModel model;
  auto jobs = bench::make_jobs(20, 8);
  auto ctx = make_evolve_context(cluster, jobs, model,
                                 packed_throughput_fn(cluster), 1000.0);
  EvolutionConfig cfg;
  Rng rng(3);
  auto pop = init_population(ctx, cfg, rng);
  for (auto _ : state) {
    auto g = refresh(pop.members[0], ctx, rng);
    benchmark::DoNotOptimize(g.slots.data());
  }
}
BENCHMARK(BM_Refresh);

static void BM_Reorder(benchmark::State& state) {
  ClusterSpec cluster{16, 4};
  ProgressModel model;
  auto jobs = bench::make_jobs(24, 0);
  auto ctx = make_evolve_context(cluster, jobs, model,
                                 packed_throughput_fn(cluster), 1000.0);
  Rng rng(5);
  auto pop = init_population(ctx, {}, rng);
  for (auto _ : state) {
    auto g = reorder(pop.members[0]);
    benchmark::DoNotOptimize(g.slots.data());
  }
}
BENCHMARK(BM_Reorder);
