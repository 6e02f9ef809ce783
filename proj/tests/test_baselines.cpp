#include <cmath>

#include "doctest.h"
#include "ones/baselines.hpp"
#include "ones/cluster_sim.hpp"
#include "ones/throughput.hpp"
#include "ones/traces.hpp"
#include "test_util.hpp"

using namespace ones;
using test::make_job;
using test::set_running;

namespace {

Job fixed_job(JobId id, std::int64_t batch, std::int64_t max_local,
              double arrival = 0.0) {
  auto job = make_job(id, max_local, batch);
  job.spec.initial_batch = batch;
  job.spec.arrival_time = arrival;
  job.rt.batch_limit = batch;
  job.rt.status = JobStatus::Waiting;
  return job;
}

}  // namespace

TEST_CASE("fifo places the head on the lowest free slots") {
  ClusterSpec cluster{1, 4};
  JobTable jobs;
  jobs.emplace(0, fixed_job(0, 1024, 512));  // wants 2 GPUs
  Genome deployed(4);
  std::vector<JobId> fresh{0};
  SchedulerContext ctx{cluster, jobs, 0.0, deployed, fresh};
  FifoFixedScheduler fifo{{}};
  auto g = fifo.schedule(ctx);
  CHECK(g.slots[0] == GenomeSlot{0, 512});
  CHECK(g.slots[1] == GenomeSlot{0, 512});
  CHECK(g.slots[2].idle());
  CHECK(!validate(g, jobs));
}

TEST_CASE("fifo gang-blocks strictly") {
  ClusterSpec cluster{2, 4};
  JobTable jobs;
  auto runner = fixed_job(0, 512, 128);  // occupies 4 GPUs
  set_running(runner, 512, 4, 1000.0);
  jobs.emplace(0, std::move(runner));
  jobs.emplace(1, fixed_job(1, 1024, 128, 1.0));  // head wants 8, only 4 free
  jobs.emplace(2, fixed_job(2, 128, 128, 2.0));   // would fit, must wait

  Genome deployed(8);
  for (int i = 0; i < 4; ++i) deployed.slots[static_cast<std::size_t>(i)] = {0, 128};
  std::vector<JobId> fresh{1, 2};
  SchedulerContext ctx{cluster, jobs, 5.0, deployed, fresh};
  FifoFixedScheduler fifo{{}};
  auto g = fifo.schedule(ctx);
  CHECK(gpu_count_of(g, 0) == 4);  // untouched
  CHECK(gpu_count_of(g, 1) == 0);  // blocked head
  CHECK(gpu_count_of(g, 2) == 0);  // strict FIFO: blocked behind the head
  // empty queue leaves the cluster idle
  JobTable none;
  std::vector<JobId> no_fresh;
  SchedulerContext empty_ctx{cluster, none, 0.0, deployed, no_fresh};
  CHECK(idle_slots(fifo.schedule(empty_ctx)).size() == 8);
}

TEST_CASE("fifo never changes a running job's allocation") {
  auto trace = generate(default_templates(), 25, 0.1, 29).jobs;
  FifoFixedScheduler policy{{}};
  SimConfig cfg;
  cfg.cluster = {1, 4};
  cfg.seed = 2;
  auto res = run(trace, policy, cfg);
  CHECK(res.stats.reconfigurations == 0);
  for (const auto& r : res.records) CHECK(r.preemptions == 0);
  for (const auto& s : res.audit) CHECK(s.old_batch == 0);  // starts only
}

TEST_CASE("las bins by attained service and lets fresh jobs preempt") {
  BaselineConfig cfg;
  cfg.kind = SchedulerKind::LasTiresias;
  LasTiresiasScheduler las{cfg};
  CHECK(las.queue_bin(600.0) == 0);   // (c=2, t=300s) -> 600 GPU-s
  CHECK(las.queue_bin(5e3) == 1);
  CHECK(las.queue_bin(5e4) == 2);
  CHECK(las.queue_bin(5e5) == 3);

  ClusterSpec cluster{1, 2};
  JobTable jobs;
  auto old_job = fixed_job(0, 512, 256);  // needs both GPUs
  set_running(old_job, 512, 2, 90000.0);
  old_job.rt.attained_gpu_seconds = 5e4;
  jobs.emplace(0, std::move(old_job));
  auto fresh = fixed_job(1, 512, 256, 100.0);  // same demand, zero service
  jobs.emplace(1, std::move(fresh));

  Genome deployed(2);
  deployed.slots[0] = {0, 256};
  deployed.slots[1] = {0, 256};
  std::vector<JobId> fresh_ids{1};
  SchedulerContext ctx{cluster, jobs, 100.0, deployed, fresh_ids};
  auto g = las.schedule(ctx);
  CHECK(gpu_count_of(g, 1) == 2);  // newcomer wins
  CHECK(gpu_count_of(g, 0) == 0);  // long runner preempted

  // same bin: FIFO within the bin
  jobs.at(0).rt.attained_gpu_seconds = 100.0;
  auto g2 = las.schedule(ctx);
  CHECK(gpu_count_of(g2, 0) == 2);
  CHECK(gpu_count_of(g2, 1) == 0);
}

TEST_CASE("srpt adds gpus while the marginal gain stays positive") {
  BaselineConfig cfg;
  cfg.kind = SchedulerKind::SrptGreedy;
  SrptGreedyScheduler srpt{cfg};

  ClusterSpec cluster{2, 4};
  JobTable jobs;
  auto job = fixed_job(0, 64, 64);
  job.spec.tput.per_gpu_peak = 1000.0;
  job.spec.tput.half_batch = 32.0;
  job.spec.tput.comm_penalty = 0.1;
  jobs.emplace(0, std::move(job));

  Genome deployed(8);
  std::vector<JobId> fresh{0};
  SchedulerContext ctx{cluster, jobs, 0.0, deployed, fresh};
  auto g = srpt.schedule(ctx);

  // independent recompute: grow c while T(c) - T(c+1) > 0
  auto time_at = [&](std::int32_t c) {
    return srpt.estimated_remaining_work(jobs.at(0)) /
           throughput_packed(jobs.at(0).spec.tput, cluster, 64, c);
  };
  std::int32_t expect = 1;
  while (expect + 1 <= 8 && time_at(expect) - time_at(expect + 1) > 0.0) ++expect;
  CHECK(gpu_count_of(g, 0) == expect);
  CHECK(expect < 8);  // the knee stops growth before the cluster is exhausted
  CHECK(global_batch_of(g, 0) == 64);  // batch stays fixed
}

TEST_CASE("srpt splits symmetric jobs evenly, earlier arrival first") {
  BaselineConfig cfg;
  cfg.kind = SchedulerKind::SrptGreedy;
  SrptGreedyScheduler srpt{cfg};
  ClusterSpec cluster{1, 4};
  JobTable jobs;
  jobs.emplace(0, fixed_job(0, 256, 256, 0.0));
  jobs.emplace(1, fixed_job(1, 256, 256, 1.0));
  Genome deployed(4);
  std::vector<JobId> fresh{0, 1};
  SchedulerContext ctx{cluster, jobs, 2.0, deployed, fresh};
  auto g = srpt.schedule(ctx);
  CHECK(gpu_count_of(g, 0) == 2);
  CHECK(gpu_count_of(g, 1) == 2);
  CHECK(!validate(g, jobs));
}

TEST_CASE("srpt deploys only at interval ticks after the bootstrap") {
  auto trace = generate(default_templates(), 15, 0.02, 31).jobs;
  BaselineConfig bcfg;
  bcfg.kind = SchedulerKind::SrptGreedy;
  bcfg.reschedule_interval = 600.0;
  SrptGreedyScheduler policy{bcfg};
  SimConfig cfg;
  cfg.cluster = {1, 4};
  cfg.seed = 4;
  auto res = run(trace, policy, cfg);
  for (const auto& s : res.audit) {
    double phase = std::fmod(s.time, 600.0);
    bool on_tick = phase < 1e-6 || 600.0 - phase < 1e-6;
    if (!on_tick) {
      // bootstrap deployments happen only when nothing was running; those
      // are starts from an idle cluster
      CHECK(s.old_batch == 0);
    }
  }
}

TEST_CASE("all baselines produce valid schedules across a full run") {
  auto trace = generate(default_templates(), 30, 0.08, 37).jobs;
  for (auto kind : {SchedulerKind::FifoFixed, SchedulerKind::LasTiresias,
                    SchedulerKind::SrptGreedy}) {
    BaselineConfig bcfg;
    bcfg.kind = kind;
    auto policy = make_baseline(bcfg);
    REQUIRE(policy);
    SimConfig cfg;
    cfg.cluster = {2, 2};
    cfg.seed = 6;
    auto res = run(trace, *policy, cfg);  // deploy() validates internally
    CHECK(res.records.size() == trace.size());
  }
}
