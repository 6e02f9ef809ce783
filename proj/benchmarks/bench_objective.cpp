#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "ones/objective.hpp"

using namespace ones;

static void BM_ScoreCandidates(benchmark::State& state) {
  ClusterSpec cluster{16, 4};
  ProgressModel model;
  auto jobs = bench::make_jobs(static_cast<int>(state.range(0)), 4);
  auto ctx = make_evolve_context(cluster, jobs, model,
                                 packed_throughput_fn(cluster), 1000.0);
  EvolutionConfig cfg;
  Rng rng(11);
  auto pop = init_population(ctx, cfg, rng);
  auto rho = mean_rho(jobs, model);
  for (auto _ : state) {
    auto scores = score_candidates(pop.members, jobs, ctx.throughput_fn, rho);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(pop.members.size()));
}
BENCHMARK(BM_ScoreCandidates)->Arg(8)->Arg(30);

static void BM_DrawRho(benchmark::State& state) {
  ProgressModel model;
  auto jobs = bench::make_jobs(30, 10);
  Rng rng(13);
  for (auto _ : state) {
    auto rho = draw_rho(jobs, model, rng);
    benchmark::DoNotOptimize(&rho);
  }
}
BENCHMARK(BM_DrawRho);

static void BM_PredictorFit(benchmark::State& state) {
  Rng rng(17);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  ProgressModel model;
  for (int i = 0; i < 500; ++i) {
    PredictorFeatures x{1000.0 + i * 17.0, 1.0, 400.0 * (i + 1), unit(rng),
                        unit(rng)};
    model.add_sample({x, unit(rng)});
  }
  for (auto _ : state) {
    auto res = model.fit();
    benchmark::DoNotOptimize(&res);
  }
}
BENCHMARK(BM_PredictorFit);
