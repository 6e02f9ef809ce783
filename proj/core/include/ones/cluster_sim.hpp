#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ones/domain.hpp"
#include "ones/scaling_policy.hpp"
#include "ones/scheduler.hpp"

namespace ones {

struct OverheadModelParams {
  double elastic_scale_seconds = 1.0;
  double checkpoint_scale_seconds = 20.0;
};

enum class OverheadMode { Auto, Elastic, Checkpoint };

// Tie priority is the declaration order: completions free resources before
// the scheduler looks at the cluster.
enum class EventKind : int {
  JobComplete = 0,
  EpochComplete = 1,
  JobArrival = 2,
  ScaleComplete = 3,
  SchedulerWake = 4,
};

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::SchedulerWake;
  JobId job = kNoJob;
};

struct MetricsRecord {
  JobId job_id = kNoJob;
  double arrival = 0.0;
  double start = 0.0;
  double finish = 0.0;
  double jct = 0.0;       // queuing + execution
  double queuing = 0.0;
  double execution = 0.0;  // running time plus scaling overhead
  std::int64_t final_batch = 0;
  std::int32_t preemptions = 0;
};

struct SimConfig {
  ClusterSpec cluster{16, 4};
  OverheadModelParams overhead;
  OverheadMode overhead_mode = OverheadMode::Auto;
  PolicyConfig policy;
  std::uint64_t seed = 1;
  // optional progress slowdown above a per-job critical batch (off by default)
  double large_batch_inefficiency = 1.0;
  double critical_batch_factor = 8.0;
  // simulated seconds of scheduler compute charged per deployment (reported
  // only, never slows jobs)
  double evolution_compute_seconds = 0.0;
};

struct SimStats {
  double makespan = 0.0;
  std::int64_t deployments = 0;
  std::int64_t reconfigurations = 0;
  std::int64_t events = 0;
  double scheduler_compute_charged = 0.0;
  // largest deployed-batch growth factor observed for an already-running job
  double max_batch_growth = 0.0;
  bool batch_limit_violated = false;
};

struct SimResult {
  std::vector<MetricsRecord> records;  // ordered by job id
  std::vector<ScalingStep> audit;
  SimStats stats;
  JobTable final_jobs;
};

// Trace-driven run: arrivals from `trace` (sorted by arrival time), one
// policy, deterministic under (trace, config, seed).
SimResult run(std::span<const JobSpec> trace, SchedulerPolicy& policy,
              const SimConfig& config);

struct AggregateStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

struct Summary {
  std::size_t count = 0;
  AggregateStats jct;
  AggregateStats queuing;
  AggregateStats execution;
};

// Mean/median/p95/max over the records; throws on an empty set.
Summary aggregate(std::span<const MetricsRecord> records);

// (value, cumulative fraction) points of the sorted sample; the final point
// always carries fraction 1.
std::vector<std::pair<double, double>> cf_curve(std::vector<double> values);

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records);
void write_cf_csv(std::ostream& out,
                  std::span<const std::pair<double, double>> points);
void write_summary(std::ostream& out, const char* scheduler, const Summary& s,
                   const SimStats& stats);

}  // namespace ones
