#include "ones/scaling_policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace ones {

const char* to_string(ScalingReason r) {
  switch (r) {
    case ScalingReason::Start: return "start";
    case ScalingReason::ResumeRejected: return "resume_rejected";
    case ScalingReason::ScaleUp: return "scale_up";
    case ScalingReason::ScaleDown: return "scale_down";
    case ScalingReason::Deploy: return "deploy";
  }
  return "?";
}

std::int64_t limit_on_start(const JobSpec& spec) {
  return std::max<std::int64_t>(std::min(spec.initial_batch, spec.max_local_batch), 1);
}

std::int64_t limit_on_resume_rejected(std::int64_t limit) {
  return std::max<std::int64_t>(limit / 2, 1);
}

std::int64_t limit_on_epoch(std::int64_t limit, std::int64_t cluster_cap) {
  return std::min(2 * limit, cluster_cap);
}

std::int64_t limit_on_scale_down(std::int64_t limit, double t_processed,
                                 double sigma) {
  double divisor = std::ceil(sigma * t_processed + 1.0);
  if (divisor < 1.0) divisor = 1.0;
  auto penalized = static_cast<std::int64_t>(
      std::ceil(2.0 * static_cast<double>(limit) / divisor));
  return std::max<std::int64_t>(penalized, 1);
}

std::int64_t limit_on_epoch_boundary(std::int64_t limit, double t_processed,
                                     double sigma, std::int64_t cluster_cap) {
  auto up = limit_on_epoch(limit, cluster_cap);
  if (sigma <= 0.0) return up;  // no arrival-rate estimate, no penalty yet
  auto penalized = limit_on_scale_down(up, t_processed, sigma);
  return std::min(penalized, cluster_cap);
}

double scaled_learning_rate(double lr0, std::int64_t batch0,
                            std::int64_t batch_new) {
  return lr0 * static_cast<double>(batch_new) / static_cast<double>(batch0);
}

void ArrivalRateEstimator::observe_arrival(double time) {
  ++count_;
  if (count_ == 1) {
    last_arrival_ = time;
    return;
  }
  double gap = std::max(time - last_arrival_, 1e-9);
  last_arrival_ = time;
  // half-life of 20 arrivals
  constexpr double kDecay = 0.96593632892484;  // 0.5^(1/20)
  if (count_ == 2)
    mean_gap_ = gap;
  else
    mean_gap_ = kDecay * mean_gap_ + (1.0 - kDecay) * gap;
  rate_ = 1.0 / mean_gap_;
}

std::vector<ScalingStep> collect_scaling_steps(const JobTable& jobs,
                                               const Genome& deployed,
                                               double now) {
  std::vector<ScalingStep> steps;
  for (const auto& [id, job] : jobs) {
    const auto& rt = job.rt;
    if (rt.status == JobStatus::Completed) continue;
    auto new_batch = global_batch_of(deployed, id);
    if (new_batch == 0 || new_batch == rt.global_batch) continue;

    ScalingStep step;
    step.time = now;
    step.job = id;
    step.old_batch = rt.global_batch;
    step.new_batch = new_batch;
    step.old_lr = rt.current_lr;
    // Linear scaling anchored at the submitted (batch, lr) pair.
    step.new_lr = scaled_learning_rate(job.spec.initial_lr, job.spec.initial_batch,
                                       new_batch);
    if (rt.global_batch == 0) {
      if (!rt.started())
        step.reason = ScalingReason::Start;
      else
        step.reason = rt.rejected_since_preempt ? ScalingReason::ResumeRejected
                                                : ScalingReason::Deploy;
    } else {
      step.reason = new_batch > rt.global_batch ? ScalingReason::ScaleUp
                                                : ScalingReason::ScaleDown;
    }
    steps.push_back(step);
  }
  return steps;
}

std::vector<ScalingStep> apply_policies(JobTable& jobs, const Genome& deployed,
                                        double now, const PolicyConfig& config) {
  (void)config;
  auto steps = collect_scaling_steps(jobs, deployed, now);
  for (auto& [id, job] : jobs) {
    auto& rt = job.rt;
    if (rt.status != JobStatus::Waiting) continue;
    if (global_batch_of(deployed, id) > 0) continue;
    // Rejected again. The resume rule only applies to jobs with history: a
    // job that never ran keeps its start limit while queued.
    if (rt.started()) {
      rt.batch_limit = limit_on_resume_rejected(rt.batch_limit);
      rt.rejected_since_preempt = true;
    }
  }
  return steps;
}

void write_audit_header(std::ostream& out) {
  out << "time,job_id,reason,old_batch,new_batch,old_lr,new_lr\n";
}

void write_audit_line(std::ostream& out, const ScalingStep& step) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.6f,%d,%s,%lld,%lld,%.9g,%.9g\n", step.time,
                step.job, to_string(step.reason),
                static_cast<long long>(step.old_batch),
                static_cast<long long>(step.new_batch), step.old_lr, step.new_lr);
  out << buf;
}

}  // namespace ones
