#include <benchmark/benchmark.h>

#include "ones/baselines.hpp"
#include "ones/cluster_sim.hpp"
#include "ones/scheduler.hpp"
#include "ones/traces.hpp"

using namespace ones;

static void BM_SimulateOnes(benchmark::State& state) {
  auto trace = generate(default_templates(), state.range(0), 0.004, 1);
  trace.cluster = {4, 4};
  for (auto _ : state) {
    OnesScheduler policy(trace.cluster, {}, {}, 1);
    SimConfig cfg;
    cfg.cluster = trace.cluster;
    cfg.seed = 1;
    auto res = run(trace.jobs, policy, cfg);
    benchmark::DoNotOptimize(res.records.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateOnes)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

static void BM_SimulateBaseline(benchmark::State& state) {
  auto trace = generate(default_templates(), 60, 0.004, 1);
  trace.cluster = {4, 4};
  auto kind = static_cast<SchedulerKind>(state.range(0));
  for (auto _ : state) {
    BaselineConfig bcfg;
    bcfg.kind = kind;
    auto policy = make_baseline(bcfg);
    SimConfig cfg;
    cfg.cluster = trace.cluster;
    cfg.seed = 1;
    auto res = run(trace.jobs, *policy, cfg);
    benchmark::DoNotOptimize(res.records.data());
  }
}
BENCHMARK(BM_SimulateBaseline)
    ->Arg(static_cast<int>(SchedulerKind::FifoFixed))
    ->Arg(static_cast<int>(SchedulerKind::LasTiresias))
    ->Arg(static_cast<int>(SchedulerKind::SrptGreedy))
    ->Unit(benchmark::kMillisecond);
