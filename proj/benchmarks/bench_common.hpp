#pragma once

#include "ones/evolution.hpp"
#include "ones/predictor.hpp"
#include "ones/throughput.hpp"

namespace ones::bench {

// A mid-run cluster snapshot: `running` jobs on the GPUs plus a short queue.
inline JobTable make_jobs(int running, int waiting) {
  JobTable jobs;
  JobId id = 0;
  for (int i = 0; i < running + waiting; ++i, ++id) {
    Job job;
    job.spec.id = id;
    job.spec.epoch_size = 20000;
    job.spec.total_workload = 600000;
    job.spec.initial_batch = 128;
    job.spec.initial_lr = 0.1;
    job.spec.max_local_batch = 512;
    job.spec.loss_init = 1.0;
    job.spec.tput = {2000.0, 24.0, 0.1, 0.5};
    job.rt.batch_limit = 1024;
    job.rt.current_loss = 0.6;
    job.rt.current_lr = 0.1;
    if (i < running) {
      job.rt.status = JobStatus::Running;
      job.rt.global_batch = 512;
      job.rt.gpu_count = 2;
      job.rt.processed = 150000.0 + 10000.0 * i;
      job.rt.executed_time = 120.0 + 5.0 * i;
      job.rt.start_time = 0.0;
      job.rt.epochs_completed = 7;
    } else {
      job.rt.status = JobStatus::Waiting;
    }
    jobs.emplace(id, std::move(job));
  }
  return jobs;
}

}  // namespace ones::bench
