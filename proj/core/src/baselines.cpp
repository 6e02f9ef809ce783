#include "ones/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "ones/throughput.hpp"

namespace ones {
namespace {

// Assign `count` slots to the job, preferring the slots it already holds in
// the deployed genome, then the lowest-ordered free ones.
void place_fixed(Genome& g, const Job& job, std::int32_t count,
                 const Genome& deployed) {
  std::vector<std::int32_t> chosen;
  for (auto s : slots_of(deployed, job.spec.id)) {
    if (static_cast<std::int32_t>(chosen.size()) == count) break;
    if (g.slots[static_cast<std::size_t>(s)].idle()) chosen.push_back(s);
  }
  for (std::size_t i = 0; i < g.size() &&
                          static_cast<std::int32_t>(chosen.size()) < count;
       ++i) {
    auto s = static_cast<std::int32_t>(i);
    if (g.slots[i].idle() &&
        std::find(chosen.begin(), chosen.end(), s) == chosen.end())
      chosen.push_back(s);
  }
  std::sort(chosen.begin(), chosen.end());
  set_job_allocation(g, job.spec.id, chosen, job.spec.initial_batch,
                     job.spec.max_local_batch);
}

bool runnable(const Job& job, double now) {
  return job.rt.status != JobStatus::Completed && job.spec.arrival_time <= now;
}

}  // namespace

std::int32_t requested_gpus(const JobSpec& spec, const ClusterSpec& cluster) {
  auto needed = (spec.initial_batch + spec.max_local_batch - 1) /
                spec.max_local_batch;
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(
      needed, 1, cluster.total_gpus()));
}

Genome FifoFixedScheduler::schedule(const SchedulerContext& ctx) {
  Genome g(static_cast<std::size_t>(ctx.cluster.total_gpus()));
  // running jobs keep their slots untouched
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& s = ctx.deployed.slots[i];
    if (s.idle()) continue;
    auto it = ctx.jobs.find(s.job);
    if (it != ctx.jobs.end() && it->second.rt.status == JobStatus::Running)
      g.slots[i] = s;
  }
  std::int32_t free = 0;
  for (const auto& s : g.slots) free += s.idle() ? 1 : 0;

  // id order is arrival order; the first job that does not fit blocks the rest
  for (const auto& [id, job] : ctx.jobs) {
    if (!runnable(job, ctx.now) || job.rt.status == JobStatus::Running) continue;
    auto want = requested_gpus(job.spec, ctx.cluster);
    if (want > free) break;
    place_fixed(g, job, want, ctx.deployed);
    free -= want;
  }
  return g;
}

std::size_t LasTiresiasScheduler::queue_bin(double attained_gpu_seconds) const {
  std::size_t bin = 0;
  for (double t : cfg_.queue_thresholds) {
    if (attained_gpu_seconds < t) break;
    ++bin;
  }
  return bin;
}

Genome LasTiresiasScheduler::schedule(const SchedulerContext& ctx) {
  struct Entry {
    std::size_t bin;
    JobId id;
    const Job* job;
  };
  std::vector<Entry> order;
  for (const auto& [id, job] : ctx.jobs)
    if (runnable(job, ctx.now))
      order.push_back({queue_bin(job.rt.attained_gpu_seconds), id, &job});
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    return a.bin != b.bin ? a.bin < b.bin : a.id < b.id;  // FIFO within a bin
  });

  Genome g(static_cast<std::size_t>(ctx.cluster.total_gpus()));
  std::int32_t free = ctx.cluster.total_gpus();
  for (const auto& e : order) {
    auto want = requested_gpus(e.job->spec, ctx.cluster);
    if (want > free) continue;  // stays (or becomes) waiting
    place_fixed(g, *e.job, want, ctx.deployed);
    free -= want;
  }
  return g;
}

double SrptGreedyScheduler::estimated_remaining_work(const Job& job) const {
  const auto& log = job.rt.checkpoints;
  double epochs = cfg_.srpt_cold_remaining_epochs;
  if (log.size() >= 2) {
    const auto& prev = log[log.size() - 2];
    const auto& cur = log.back();
    if (prev.loss > 0.0 && cur.loss > 0.0 && prev.loss > cur.loss) {
      double kappa = std::log(prev.loss / cur.loss);  // per epoch
      double target = cfg_.srpt_target_loss_fraction * job.spec.loss_init;
      if (kappa > 1e-9 && target > 0.0)
        epochs = std::log(std::max(cur.loss, target) / target) / kappa;
    }
  }
  epochs = std::max(epochs, 0.1);
  return epochs * static_cast<double>(job.spec.epoch_size);
}

bool SrptGreedyScheduler::ready(const SchedulerContext& ctx) {
  // Strictly periodic, except to bootstrap a fully drained cluster: a fresh
  // burst into an empty system starts immediately, everything else waits
  // for the next tick.
  bool drained = true;
  for (const auto& [id, job] : ctx.jobs) {
    if (job.rt.status == JobStatus::Running) {
      drained = false;
      break;
    }
    if (job.rt.status == JobStatus::Waiting &&
        job.spec.arrival_time < ctx.now) {
      drained = false;
      break;
    }
  }
  if (drained) return true;
  double phase = std::fmod(ctx.now, cfg_.reschedule_interval);
  double eps = 1e-9 * std::max(1.0, ctx.now);
  return phase < eps || cfg_.reschedule_interval - phase < eps;
}

std::optional<double> SrptGreedyScheduler::next_wake(double now) const {
  double next =
      (std::floor(now / cfg_.reschedule_interval) + 1.0) * cfg_.reschedule_interval;
  return next;
}

Genome SrptGreedyScheduler::schedule(const SchedulerContext& ctx) {
  std::vector<const Job*> jobs;
  for (const auto& [id, job] : ctx.jobs)
    if (runnable(job, ctx.now)) jobs.push_back(&job);

  Genome g(static_cast<std::size_t>(ctx.cluster.total_gpus()));
  if (jobs.empty()) return g;

  std::int32_t left = ctx.cluster.total_gpus();
  std::vector<std::int32_t> gpus(jobs.size(), 0);

  // fairness floor: one GPU each in arrival order while supply lasts
  for (std::size_t i = 0; i < jobs.size() && left > 0; ++i) {
    gpus[i] = 1;
    --left;
  }

  auto remaining_time = [&](const Job& job, std::int32_t c) {
    double x = throughput_packed(job.spec.tput, ctx.cluster,
                                 job.spec.initial_batch, c);
    return estimated_remaining_work(job) / x;
  };

  while (left > 0) {
    double best_gain = 0.0;
    std::size_t best = jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (gpus[i] < 1) continue;
      auto cap = std::min<std::int64_t>(jobs[i]->spec.initial_batch,
                                        ctx.cluster.total_gpus());
      if (gpus[i] + 1 > cap) continue;  // local batches must stay >= 1
      double gain =
          remaining_time(*jobs[i], gpus[i]) - remaining_time(*jobs[i], gpus[i] + 1);
      if (gain > best_gain) {  // ties keep the earlier arrival
        best_gain = gain;
        best = i;
      }
    }
    if (best == jobs.size()) break;  // no positive marginal gain left
    ++gpus[best];
    --left;
  }

  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (gpus[i] > 0) place_fixed(g, *jobs[i], gpus[i], ctx.deployed);
  return g;
}

std::unique_ptr<SchedulerPolicy> make_baseline(const BaselineConfig& cfg) {
  switch (cfg.kind) {
    case SchedulerKind::FifoFixed:
      return std::make_unique<FifoFixedScheduler>(cfg);
    case SchedulerKind::LasTiresias:
      return std::make_unique<LasTiresiasScheduler>(cfg);
    case SchedulerKind::SrptGreedy:
      return std::make_unique<SrptGreedyScheduler>(cfg);
    case SchedulerKind::Ones:
      break;
  }
  return nullptr;
}

}  // namespace ones
