#pragma once

#include <memory>
#include <vector>

#include "ones/scheduler.hpp"

namespace ones {

struct BaselineConfig {
  SchedulerKind kind = SchedulerKind::FifoFixed;
  double reschedule_interval = 600.0;  // SrptGreedy only
  std::vector<double> queue_thresholds = {1e3, 1e4, 1e5};  // LasTiresias, GPU-s
  double srpt_cold_remaining_epochs = 10.0;  // proxy before any checkpoint
  double srpt_target_loss_fraction = 0.05;   // assumed convergence level
};

// GPUs a fixed-size job asks for: the fewest that fit its batch in memory.
std::int32_t requested_gpus(const JobSpec& spec, const ClusterSpec& cluster);

// Arrival-order service at fixed (c, B); the head of the queue blocks
// everything behind it. Never touches a running job.
class FifoFixedScheduler : public SchedulerPolicy {
 public:
  explicit FifoFixedScheduler(BaselineConfig cfg) : cfg_(std::move(cfg)) {}
  const char* name() const override { return "fifo"; }
  bool ready(const SchedulerContext&) override { return true; }
  Genome schedule(const SchedulerContext& ctx) override;

 private:
  BaselineConfig cfg_;
};

// Multi-level queue by attained GPU-service; lower-service queues preempt
// higher ones, FIFO within a queue, fixed (c, B).
class LasTiresiasScheduler : public SchedulerPolicy {
 public:
  explicit LasTiresiasScheduler(BaselineConfig cfg) : cfg_(std::move(cfg)) {}
  const char* name() const override { return "las"; }
  bool ready(const SchedulerContext&) override { return true; }
  Genome schedule(const SchedulerContext& ctx) override;

  std::size_t queue_bin(double attained_gpu_seconds) const;

 private:
  BaselineConfig cfg_;
};

// Interval-driven greedy allocation: one GPU per runnable job, then one more
// GPU at a time to whichever job gains the largest drop in estimated
// remaining time. Batch stays fixed; local batches rescale with c.
class SrptGreedyScheduler : public SchedulerPolicy {
 public:
  explicit SrptGreedyScheduler(BaselineConfig cfg) : cfg_(std::move(cfg)) {}
  const char* name() const override { return "srpt"; }
  bool ready(const SchedulerContext& ctx) override;
  Genome schedule(const SchedulerContext& ctx) override;
  std::optional<double> next_wake(double now) const override;

  // Oracle-free remaining-work estimate: remaining epochs extrapolated from
  // the per-epoch loss slope of the last two checkpoints.
  double estimated_remaining_work(const Job& job) const;

 private:
  BaselineConfig cfg_;
};

std::unique_ptr<SchedulerPolicy> make_baseline(const BaselineConfig& cfg);

}  // namespace ones
