#include "ones/cluster_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "ones/evolution.hpp"
#include "ones/throughput.hpp"

namespace ones {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Engine {
  const SimConfig& cfg;
  SchedulerPolicy& policy;
  std::span<const JobSpec> trace;

  double now = 0.0;
  std::size_t next_arrival = 0;
  JobTable jobs;
  Genome deployed;
  std::vector<JobId> new_jobs;
  bool wake_pending = false;
  ArrivalRateEstimator lambda_est;
  double overhead_per_reconfig;
  SimResult result;

  Engine(const SimConfig& c, SchedulerPolicy& p, std::span<const JobSpec> t)
      : cfg(c), policy(p), trace(t),
        deployed(static_cast<std::size_t>(c.cluster.total_gpus())) {
    bool checkpoint = cfg.overhead_mode == OverheadMode::Checkpoint ||
                      (cfg.overhead_mode == OverheadMode::Auto && !policy.elastic());
    overhead_per_reconfig = checkpoint ? cfg.overhead.checkpoint_scale_seconds
                                       : cfg.overhead.elastic_scale_seconds;
  }

  double rate_of(const Job& job) const {
    double x = throughput_in_genome(job.spec, deployed, cfg.cluster);
    if (cfg.large_batch_inefficiency > 1.0 &&
        job.rt.global_batch >
            static_cast<std::int64_t>(cfg.critical_batch_factor *
                                      static_cast<double>(job.spec.initial_batch)))
      x /= cfg.large_batch_inefficiency;
    return x;
  }

  bool all_done() const {
    if (next_arrival < trace.size()) return false;
    for (const auto& [id, job] : jobs)
      if (job.rt.status != JobStatus::Completed) return false;
    return true;
  }

  void advance(double dt) {
    if (dt <= 0.0) return;
    for (auto& [id, job] : jobs) {
      auto& rt = job.rt;
      if (rt.status == JobStatus::Running) {
        rt.processed += rate_of(job) * dt;
        rt.executed_time += dt;
        rt.attained_gpu_seconds += rt.gpu_count * dt;
      } else if (rt.status == JobStatus::Waiting) {
        rt.waiting_time += dt;
      }
    }
    now += dt;
  }

  std::vector<Event> next_events() {
    double best = kInf;
    std::vector<Event> batch;
    auto offer = [&](double t, EventKind kind, JobId id) {
      if (t > best) return;
      if (t < best) {
        best = t;
        batch.clear();
      }
      batch.push_back({t, kind, id});
    };

    if (next_arrival < trace.size())
      offer(trace[next_arrival].arrival_time, EventKind::JobArrival,
            trace[next_arrival].id);
    for (const auto& [id, job] : jobs) {
      const auto& rt = job.rt;
      if (rt.status != JobStatus::Running) continue;
      double rate = rate_of(job);
      if (!(rate > 0.0))
        throw std::logic_error("running job " + std::to_string(id) +
                               " has no throughput");
      double to_done =
          (static_cast<double>(job.spec.total_workload) - rt.processed) / rate;
      offer(now + std::max(to_done, 0.0), EventKind::JobComplete, id);
      double boundary = static_cast<double>(
          (rt.epochs_completed + 1) * job.spec.epoch_size);
      if (boundary < static_cast<double>(job.spec.total_workload)) {
        double to_epoch = (boundary - rt.processed) / rate;
        offer(now + std::max(to_epoch, 0.0), EventKind::EpochComplete, id);
      }
    }
    if (wake_pending) offer(now, EventKind::SchedulerWake, kNoJob);
    if (!all_done()) {
      if (auto tick = policy.next_wake(now); tick && *tick > now)
        offer(*tick, EventKind::SchedulerWake, kNoJob);
    }

    std::sort(batch.begin(), batch.end(), [](const Event& a, const Event& b) {
      if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
      return a.job < b.job;
    });
    // one wake per instant
    bool seen_wake = false;
    std::erase_if(batch, [&](const Event& e) {
      if (e.kind != EventKind::SchedulerWake) return false;
      if (seen_wake) return true;
      seen_wake = true;
      return false;
    });
    return batch;
  }

  void on_arrival(const JobSpec& spec) {
    Job job;
    job.spec = spec;
    job.rt.status = JobStatus::Waiting;
    job.rt.batch_limit = limit_on_start(spec);
    job.rt.current_loss = spec.loss_init;
    job.rt.current_lr = spec.initial_lr;
    job.rt.submit_time = now;
    jobs.emplace(spec.id, std::move(job));
    new_jobs.push_back(spec.id);
    lambda_est.observe_arrival(now);
    ++next_arrival;
    wake_pending = true;
  }

  void on_epoch(Job& job) {
    auto& rt = job.rt;
    if (rt.status != JobStatus::Running) return;
    ++rt.epochs_completed;
    rt.processed = static_cast<double>(rt.epochs_completed * job.spec.epoch_size);

    // synthetic convergence curve, reported by the workers at epoch ends
    double progress = rt.processed / static_cast<double>(job.spec.total_workload);
    Rng noise_rng(
        derive_seed(cfg.seed, 0xC0FFEE + static_cast<std::uint64_t>(job.spec.id) * 131 +
                                  static_cast<std::uint64_t>(rt.epochs_completed)));
    double noise =
        1.0 + job.spec.curve.noise *
                  std::uniform_real_distribution<double>(-1.0, 1.0)(noise_rng);
    rt.current_loss =
        std::max(job.spec.loss_init * std::exp(-job.spec.curve.k * progress) * noise,
                 1e-9);
    double improvement =
        std::clamp(1.0 - rt.current_loss / job.spec.loss_init, 0.0, 1.0);
    rt.current_accuracy = logistic(8.0 * (improvement - 0.5));
    rt.checkpoints.push_back({now, rt.processed, rt.current_loss, rt.current_accuracy});

    if (policy.elastic() && rt.epochs_completed >= cfg.policy.warmup_epochs) {
      double sigma = cfg.policy.sigma_auto
                         ? (lambda_est.has_estimate() ? lambda_est.rate() : 0.0)
                         : cfg.policy.sigma;
      auto cap = static_cast<std::int64_t>(cfg.cluster.total_gpus()) *
                 job.spec.max_local_batch;
      // the limit never undercuts the batch already deployed; the penalty
      // acts by stopping growth and by the halvings a job takes while it
      // waits
      rt.batch_limit = std::max(
          limit_on_epoch_boundary(rt.batch_limit, rt.executed_time, sigma, cap),
          rt.global_batch);
    }
    wake_pending = true;
  }

  void on_complete(Job& job) {
    auto& rt = job.rt;
    if (rt.status != JobStatus::Running) return;
    rt.processed = static_cast<double>(job.spec.total_workload);
    rt.status = JobStatus::Completed;
    rt.finish_time = now;

    MetricsRecord rec;
    rec.job_id = job.spec.id;
    rec.arrival = rt.submit_time;
    rec.start = rt.start_time;
    rec.finish = now;
    rec.queuing = rt.waiting_time;
    rec.execution = rt.executed_time + rt.overhead_seconds;
    rec.jct = rec.queuing + rec.execution;
    rec.final_batch = rt.global_batch;
    rec.preemptions = rt.preemptions;
    result.records.push_back(rec);

    clear_job(deployed, job.spec.id);
    rt.global_batch = 0;
    rt.gpu_count = 0;
    policy.job_completed(job);
    wake_pending = true;
  }

  void deploy(Genome g) {
    if (auto bad = validate(g, jobs))
      throw std::logic_error("policy produced an invalid schedule: " + bad->reason);

    // Gradual growth: one deployment may at most double a running job's batch.
    for (auto& [id, job] : jobs) {
      auto old_batch = job.rt.global_batch;
      if (old_batch <= 0) continue;
      auto new_batch = global_batch_of(g, id);
      if (new_batch > 2 * old_batch) {
        auto slots = slots_of(g, id);
        set_job_allocation(g, id, slots, 2 * old_batch, job.spec.max_local_batch);
      }
    }

    std::vector<ScalingStep> steps =
        policy.elastic() ? apply_policies(jobs, g, now, cfg.policy)
                         : collect_scaling_steps(jobs, g, now);
    for (const auto& s : steps) result.audit.push_back(s);

    for (auto& [id, job] : jobs) {
      auto& rt = job.rt;
      if (rt.status == JobStatus::Completed) continue;
      auto new_batch = global_batch_of(g, id);
      auto new_slots = slots_of(g, id);
      auto old_slots = slots_of(deployed, id);
      bool started_before = rt.started();
      bool was_running = rt.status == JobStatus::Running;

      if (new_batch > 0) {
        if (rt.batch_limit > 0 && new_batch > rt.batch_limit) {
          result.stats.batch_limit_violated = true;
          throw std::logic_error("deployed batch over limit for job " +
                                 std::to_string(id));
        }
        if (was_running && rt.global_batch > 0) {
          double growth = static_cast<double>(new_batch) /
                          static_cast<double>(rt.global_batch);
          result.stats.max_batch_growth =
              std::max(result.stats.max_batch_growth, growth);
        }
        bool changed = new_batch != rt.global_batch || new_slots != old_slots;
        rt.status = JobStatus::Running;
        if (!started_before) rt.start_time = now;
        if (changed) {
          rt.current_lr = scaled_learning_rate(job.spec.initial_lr,
                                               job.spec.initial_batch, new_batch);
          if (started_before) {
            ++rt.reconfig_count;
            ++result.stats.reconfigurations;
            rt.overhead_seconds += overhead_per_reconfig;
          }
        }
        rt.global_batch = new_batch;
        rt.gpu_count = static_cast<std::int32_t>(new_slots.size());
        rt.rejected_since_preempt = false;
      } else if (was_running) {
        rt.prev_gpu_count = rt.gpu_count;
        rt.status = JobStatus::Waiting;
        rt.global_batch = 0;
        rt.gpu_count = 0;
        ++rt.preemptions;
        ++rt.reconfig_count;
        ++result.stats.reconfigurations;
        rt.overhead_seconds += overhead_per_reconfig;
      }
    }

    deployed = std::move(g);
    ++result.stats.deployments;
    result.stats.scheduler_compute_charged += cfg.evolution_compute_seconds;
    new_jobs.clear();
  }

  void on_wake() {
    // a same-instant arrival still pending lands before the scheduler looks
    if (next_arrival < trace.size() &&
        trace[next_arrival].arrival_time <= now) {
      wake_pending = true;
      return;
    }
    wake_pending = false;
    SchedulerContext ctx{cfg.cluster, jobs, now, deployed, new_jobs};
    if (!policy.ready(ctx)) return;
    deploy(policy.schedule(ctx));
  }

  SimResult run() {
    while (!all_done()) {
      auto batch = next_events();
      if (batch.empty())
        throw std::logic_error("simulation stuck at t=" + std::to_string(now));
      advance(batch.front().time - now);
      for (const auto& e : batch) {
        ++result.stats.events;
        switch (e.kind) {
          case EventKind::JobArrival:
            on_arrival(trace[next_arrival]);
            break;
          case EventKind::EpochComplete:
            on_epoch(jobs.at(e.job));
            break;
          case EventKind::JobComplete:
            on_complete(jobs.at(e.job));
            break;
          case EventKind::ScaleComplete:
            break;  // overhead is charged at deployment time
          case EventKind::SchedulerWake:
            on_wake();
            break;
        }
      }
      for (const auto& [id, job] : jobs)
        if (job.rt.status == JobStatus::Running &&
            job.rt.global_batch > job.rt.batch_limit)
          result.stats.batch_limit_violated = true;
    }
    result.stats.makespan = now;
    std::sort(result.records.begin(), result.records.end(),
              [](const MetricsRecord& a, const MetricsRecord& b) {
                return a.job_id < b.job_id;
              });
    result.final_jobs = std::move(jobs);
    return std::move(result);
  }
};

}  // namespace

SimResult run(std::span<const JobSpec> trace, SchedulerPolicy& policy,
              const SimConfig& config) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i].arrival_time < trace[i - 1].arrival_time)
      throw std::invalid_argument("trace arrivals not sorted at row " +
                                  std::to_string(i));
  Engine engine(config, policy, trace);
  return engine.run();
}

Summary aggregate(std::span<const MetricsRecord> records) {
  if (records.empty())
    throw std::invalid_argument("aggregate: no records");
  auto stats_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    AggregateStats s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    s.median = v.size() % 2 == 1 ? v[v.size() / 2]
                                 : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    auto p95_idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(v.size())) - 1);
    s.p95 = v[std::min(p95_idx, v.size() - 1)];
    s.max = v.back();
    return s;
  };
  std::vector<double> jct, queuing, execution;
  for (const auto& r : records) {
    jct.push_back(r.jct);
    queuing.push_back(r.queuing);
    execution.push_back(r.execution);
  }
  Summary s;
  s.count = records.size();
  s.jct = stats_of(std::move(jct));
  s.queuing = stats_of(std::move(queuing));
  s.execution = stats_of(std::move(execution));
  return s;
}

std::vector<std::pair<double, double>> cf_curve(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> points;
  points.reserve(values.size());
  auto n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    points.emplace_back(values[i], static_cast<double>(i + 1) / n);
  return points;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << "job_id,arrival,start,finish,jct,queuing,execution,final_batch,"
         "preemptions\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%lld,%d\n",
                  r.job_id, r.arrival, r.start, r.finish, r.jct, r.queuing,
                  r.execution, static_cast<long long>(r.final_batch),
                  r.preemptions);
    out << buf;
  }
}

void write_cf_csv(std::ostream& out,
                  std::span<const std::pair<double, double>> points) {
  out << "value,cumulative_fraction\n";
  char buf[80];
  for (const auto& [v, f] : points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.8f\n", v, f);
    out << buf;
  }
}

void write_summary(std::ostream& out, const char* scheduler, const Summary& s,
                   const SimStats& stats) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "scheduler %s\njobs %zu\nmakespan %.6f\ndeployments %lld\n"
                "reconfigurations %lld\nscheduler_compute %.6f\n"
                "jct_mean %.6f\njct_median %.6f\njct_p95 %.6f\njct_max %.6f\n"
                "queuing_mean %.6f\nqueuing_median %.6f\n"
                "execution_mean %.6f\nexecution_median %.6f\n",
                scheduler, s.count, stats.makespan,
                static_cast<long long>(stats.deployments),
                static_cast<long long>(stats.reconfigurations),
                stats.scheduler_compute_charged, s.jct.mean, s.jct.median,
                s.jct.p95, s.jct.max, s.queuing.mean, s.queuing.median,
                s.execution.mean, s.execution.median);
  out << buf;
}

}  // namespace ones
