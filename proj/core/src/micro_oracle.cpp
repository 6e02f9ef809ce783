#include "ones/micro_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ones/throughput.hpp"

namespace ones {

MicroInstance make_micro_instance(std::int32_t gpus, std::int32_t n_jobs,
                                  std::int32_t max_options, std::uint64_t seed) {
  MicroInstance inst;
  inst.cluster = {1, gpus};
  Rng rng(seed);
  std::uniform_int_distribution<std::int64_t> batch_pick(5, 9);  // 32..512
  std::uniform_int_distribution<std::int32_t> options_pick(1, max_options);
  std::uniform_real_distribution<double> processed_pick(1000.0, 20000.0);
  std::uniform_real_distribution<double> peak_pick(300.0, 2000.0);
  std::uniform_real_distribution<double> gamma_pick(0.05, 0.3);
  std::uniform_real_distribution<double> loss_pick(0.2, 0.9);

  for (std::int32_t i = 0; i < n_jobs; ++i) {
    Job job;
    job.spec.id = i;
    job.spec.arrival_time = 0.0;
    job.spec.epoch_size = 2000;
    job.spec.total_workload = 200000;
    auto unit = std::int64_t{1} << batch_pick(rng);
    job.spec.initial_batch = unit;
    job.spec.max_local_batch = unit;  // the limit steps in whole GPUs
    job.spec.initial_lr = 0.1;
    job.spec.loss_init = 1.0;
    job.spec.tput.per_gpu_peak = peak_pick(rng);
    job.spec.tput.half_batch = static_cast<double>(unit) / 2.0;
    job.spec.tput.comm_penalty = gamma_pick(rng);
    job.rt.status = JobStatus::Running;
    job.rt.batch_limit = unit * options_pick(rng);
    job.rt.processed = processed_pick(rng);
    job.rt.executed_time = job.rt.processed / job.spec.tput.per_gpu_peak;
    job.rt.epochs_completed =
        static_cast<std::int64_t>(job.rt.processed) / job.spec.epoch_size;
    job.rt.current_loss = loss_pick(rng);
    job.rt.current_accuracy = 1.0 - job.rt.current_loss;
    job.rt.current_lr = job.spec.initial_lr;
    job.rt.global_batch = unit;
    job.rt.gpu_count = 1;
    inst.jobs.emplace(job.spec.id, std::move(job));
  }
  return inst;
}

OracleResult brute_force_optimum(const MicroInstance& inst,
                                 const ProgressModel& model) {
  auto gpus = inst.cluster.total_gpus();
  auto n_jobs = static_cast<std::int32_t>(inst.jobs.size());
  if (gpus > kOracleMaxGpus || n_jobs > kOracleMaxJobs)
    throw std::invalid_argument("micro oracle: instance exceeds bounds (" +
                                std::to_string(kOracleMaxGpus) + " gpus, " +
                                std::to_string(kOracleMaxJobs) + " jobs)");

  // Scoring inputs, computed here from first principles rather than through
  // the scheduler's scoring path.
  struct Entry {
    const Job* job;
    double urgency;       // 1/rho - 1 at the Beta mean
    std::int32_t max_gpus;  // beyond this the limit caps the batch anyway
  };
  std::vector<Entry> entries;
  for (const auto& [id, job] : inst.jobs) {
    auto params = model.predict(features_of(job));
    double rho = params.alpha / (params.alpha + params.beta);
    auto needed = (job.rt.batch_limit + job.spec.max_local_batch - 1) /
                  job.spec.max_local_batch;
    entries.push_back({&job, 1.0 / rho - 1.0,
                       static_cast<std::int32_t>(
                           std::min<std::int64_t>(needed, gpus))});
  }

  // A schedule is a stable outcome of the search only if either every GPU is
  // occupied or every job already runs at its batch limit; anything else the
  // idle-fill step would keep extending. For a given GPU count the batch is
  // min(R, c * max_local): smaller batches only slow the job down, so the
  // splits below cover the optimum.
  OracleResult result;
  result.best_score = std::numeric_limits<double>::infinity();
  std::vector<std::int32_t> counts(entries.size(), 0);

  auto evaluate = [&](std::int32_t used) {
    bool full = used == gpus;
    bool all_maxed = true;
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (counts[i] != entries[i].max_gpus) {
        all_maxed = false;
        break;
      }
    if (!full && !all_maxed) return;
    ++result.enumerated;
    double total = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& job = *entries[i].job;
      auto c = counts[i];
      std::int64_t batch;
      if (c > 0) {
        batch = std::min<std::int64_t>(
            job.rt.batch_limit,
            static_cast<std::int64_t>(c) * job.spec.max_local_batch);
      } else {
        // a parked job still owes its remainder, priced at its resume size
        auto prev = job.rt.gpu_count > 0 ? job.rt.gpu_count : job.rt.prev_gpu_count;
        auto needed = (job.rt.batch_limit + job.spec.max_local_batch - 1) /
                      job.spec.max_local_batch;
        c = static_cast<std::int32_t>(std::max<std::int64_t>(
            std::min<std::int64_t>(std::max(prev, 1), needed), 1));
        batch = std::min<std::int64_t>(
            job.rt.batch_limit,
            static_cast<std::int64_t>(c) * job.spec.max_local_batch);
      }
      double x = throughput_packed(job.spec.tput, inst.cluster, batch, c);
      if (!(x > 0.0)) return;
      total += job.rt.processed * c / x * entries[i].urgency;
    }
    if (total < result.best_score) {
      result.best_score = total;
      result.best_gpus = counts;
    }
  };

  auto recurse = [&](auto&& self, std::size_t i, std::int32_t used) -> void {
    if (i == entries.size()) {
      evaluate(used);
      return;
    }
    auto cap = std::min(entries[i].max_gpus, gpus - used);
    for (std::int32_t c = 0; c <= cap; ++c) {
      counts[i] = c;
      self(self, i + 1, used + c);
    }
    counts[i] = 0;
  };
  recurse(recurse, 0, 0);

  if (entries.empty()) {
    result.best_score = 0.0;
    result.best_gpus.clear();
    result.enumerated = 1;
  }
  return result;
}

}  // namespace ones
