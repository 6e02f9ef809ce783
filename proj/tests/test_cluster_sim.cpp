#include <stdexcept>
#include <sstream>

#include "doctest.h"
#include "ones/baselines.hpp"
#include "ones/cluster_sim.hpp"
#include "ones/throughput.hpp"
#include "ones/traces.hpp"
#include "test_util.hpp"

using namespace ones;

namespace {

JobSpec simple_spec(JobId id, double arrival, std::int64_t epoch = 10000,
                    std::int64_t epochs = 4, std::int64_t batch = 256) {
  JobSpec s;
  s.id = id;
  s.arrival_time = arrival;
  s.epoch_size = epoch;
  s.total_workload = epoch * epochs;
  s.initial_batch = batch;
  s.initial_lr = 0.1;
  s.max_local_batch = 512;
  s.loss_init = 1.0;
  s.tput.per_gpu_peak = 1000.0;
  s.tput.half_batch = 128.0;
  s.tput.comm_penalty = 0.1;
  s.curve.k = 4.0;
  s.curve.noise = 0.0;
  return s;
}

SimConfig small_config(std::int32_t nodes = 1, std::int32_t per_node = 4) {
  SimConfig cfg;
  cfg.cluster = {nodes, per_node};
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("single job on an empty cluster matches the closed form") {
  std::vector<JobSpec> trace{simple_spec(0, 5.0)};
  FifoFixedScheduler policy{{}};
  auto cfg = small_config();
  auto res = run(trace, policy, cfg);

  REQUIRE(res.records.size() == 1);
  const auto& r = res.records[0];
  // fixed 1-GPU service at the initial batch, no contention, no reconfigs
  double x = 1000.0 * 256.0 / (256.0 + 128.0);
  double expect = 40000.0 / x;
  CHECK(r.queuing == doctest::Approx(0.0));
  CHECK(r.execution == doctest::Approx(expect).epsilon(1e-9));
  CHECK(r.jct == doctest::Approx(expect).epsilon(1e-9));
  CHECK(r.start == doctest::Approx(5.0));
  CHECK(r.finish == doctest::Approx(5.0 + expect).epsilon(1e-9));
  CHECK(r.preemptions == 0);
}

TEST_CASE("two identical jobs on one GPU serialize under FIFO") {
  std::vector<JobSpec> trace{simple_spec(0, 0.0), simple_spec(1, 0.0)};
  trace[1].id = 1;
  FifoFixedScheduler policy{{}};
  auto cfg = small_config(1, 1);
  auto res = run(trace, policy, cfg);

  REQUIRE(res.records.size() == 2);
  CHECK(res.records[0].queuing == doctest::Approx(0.0));
  CHECK(res.records[1].queuing ==
        doctest::Approx(res.records[0].execution).epsilon(1e-9));
}

TEST_CASE("identical runs produce byte-identical outputs") {
  auto trace = generate(default_templates(), 30, 0.05, 3).jobs;
  auto run_once = [&] {
    OnesScheduler policy({1, 4}, {}, {}, 21);
    auto cfg = small_config();
    auto res = run(trace, policy, cfg);
    std::ostringstream out;
    write_metrics_csv(out, res.records);
    for (const auto& s : res.audit) write_audit_line(out, s);
    return out.str();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("progress conservation: every job processes exactly its workload") {
  auto trace = generate(default_templates(), 20, 0.05, 5).jobs;
  OnesScheduler policy({1, 4}, {}, {}, 9);
  auto cfg = small_config();
  auto res = run(trace, policy, cfg);
  REQUIRE(res.records.size() == trace.size());
  for (const auto& [id, job] : res.final_jobs) {
    CHECK(job.rt.status == JobStatus::Completed);
    CHECK(job.rt.processed ==
          doctest::Approx(static_cast<double>(job.spec.total_workload))
              .epsilon(1e-6));
  }
}

TEST_CASE("metrics identity: jct = queuing + execution") {
  auto trace = generate(default_templates(), 25, 0.08, 7).jobs;
  OnesScheduler policy({2, 2}, {}, {}, 13);
  auto cfg = small_config(2, 2);
  auto res = run(trace, policy, cfg);
  for (const auto& r : res.records)
    CHECK(r.jct == doctest::Approx(r.queuing + r.execution).epsilon(1e-9));
}

TEST_CASE("checkpoint overhead exceeds elastic by 19s per reconfiguration") {
  auto trace = generate(default_templates(), 25, 0.1, 17).jobs;
  auto run_with = [&](OverheadMode mode) {
    OnesScheduler policy({1, 4}, {}, {}, 5);
    auto cfg = small_config();
    cfg.overhead_mode = mode;
    return run(trace, policy, cfg);
  };
  auto elastic = run_with(OverheadMode::Elastic);
  auto checkpoint = run_with(OverheadMode::Checkpoint);

  // identical trajectories: the overhead model is pure accounting
  REQUIRE(elastic.records.size() == checkpoint.records.size());
  CHECK(elastic.stats.reconfigurations == checkpoint.stats.reconfigurations);
  double total_delta = 0.0;
  for (std::size_t i = 0; i < elastic.records.size(); ++i) {
    const auto& e = elastic.records[i];
    const auto& c = checkpoint.records[i];
    CHECK(e.finish == c.finish);
    double delta = c.execution - e.execution;
    CHECK(delta >= -1e-9);
    const auto& job = elastic.final_jobs.at(e.job_id);
    CHECK(delta == doctest::Approx(19.0 * job.rt.reconfig_count).epsilon(1e-9));
    total_delta += delta;
  }
  CHECK(total_delta ==
        doctest::Approx(19.0 * elastic.stats.reconfigurations).epsilon(1e-9));
}

TEST_CASE("large-batch inefficiency slows progress above the critical batch") {
  // one job forced to a large batch via a fixed-size policy
  auto spec = simple_spec(0, 0.0, 10000, 4, 512);
  spec.max_local_batch = 512;
  std::vector<JobSpec> trace{spec};

  auto run_with = [&](double inefficiency) {
    FifoFixedScheduler policy{{}};
    auto cfg = small_config();
    cfg.large_batch_inefficiency = inefficiency;
    cfg.critical_batch_factor = 0.5;  // 512 is already past the knee
    return run(trace, policy, cfg).records[0].execution;
  };
  CHECK(run_with(2.0) == doctest::Approx(2.0 * run_with(1.0)).epsilon(1e-9));
}

TEST_CASE("the evolution log records generations and diversity") {
  auto trace = generate(default_templates(), 8, 0.05, 41).jobs;
  OnesScheduler policy({1, 4}, {}, {}, 2);
  std::ostringstream log;
  policy.set_evolution_log(&log);
  auto cfg = small_config();
  run(trace, policy, cfg);
  std::istringstream lines(log.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 2);
  }
  CHECK(count > 0);
}

TEST_CASE("unsorted traces are rejected before simulation") {
  std::vector<JobSpec> trace{simple_spec(0, 10.0), simple_spec(1, 5.0)};
  trace[1].id = 1;
  FifoFixedScheduler policy{{}};
  auto cfg = small_config();
  CHECK_THROWS_AS(run(trace, policy, cfg), std::invalid_argument);
}

TEST_CASE("aggregate statistics and cumulative frequency curves") {
  CHECK_THROWS_AS(aggregate({}), std::invalid_argument);

  std::vector<MetricsRecord> one(1);
  one[0].jct = 100.0;
  one[0].queuing = 40.0;
  one[0].execution = 60.0;
  auto s1 = aggregate(one);
  CHECK(s1.jct.mean == doctest::Approx(100.0));
  CHECK(s1.jct.median == doctest::Approx(100.0));
  CHECK(s1.jct.max == doctest::Approx(100.0));

  std::vector<MetricsRecord> two(2);
  two[0].jct = 100.0;
  two[1].jct = 300.0;
  CHECK(aggregate(two).jct.mean == doctest::Approx(200.0));
  CHECK(aggregate(two).jct.median == doctest::Approx(200.0));

  auto cf = cf_curve({5.0, 1.0, 3.0});
  REQUIRE(cf.size() == 3);
  CHECK(cf[0].first == doctest::Approx(1.0));
  CHECK(cf.back().first == doctest::Approx(5.0));
  CHECK(cf.back().second == doctest::Approx(1.0));
}

TEST_CASE("batch growth stays within x2 per deployment and under the limit") {
  auto trace = generate(default_templates(), 40, 0.1, 23).jobs;
  OnesScheduler policy({2, 4}, {}, {}, 3);
  auto cfg = small_config(2, 4);
  auto res = run(trace, policy, cfg);
  CHECK(!res.stats.batch_limit_violated);
  CHECK(res.stats.max_batch_growth <= 2.0 + 1e-9);
  for (const auto& step : res.audit)
    if (step.old_batch > 0)
      CHECK(step.new_batch <= 2 * step.old_batch);
}
