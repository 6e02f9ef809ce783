#include "ones/scheduler.hpp"

#include <limits>
#include <set>

#include "ones/objective.hpp"

namespace ones {

const char* to_string(SchedulerKind k) {
  switch (k) {
    case SchedulerKind::Ones: return "ones";
    case SchedulerKind::FifoFixed: return "fifo";
    case SchedulerKind::LasTiresias: return "las";
    case SchedulerKind::SrptGreedy: return "srpt";
  }
  return "?";
}

std::optional<SchedulerKind> parse_scheduler_kind(const std::string& name) {
  if (name == "ones") return SchedulerKind::Ones;
  if (name == "fifo") return SchedulerKind::FifoFixed;
  if (name == "las") return SchedulerKind::LasTiresias;
  if (name == "srpt") return SchedulerKind::SrptGreedy;
  return std::nullopt;
}

OnesScheduler::OnesScheduler(const ClusterSpec& cluster, EvolutionConfig evolution,
                             PredictorConfig predictor, std::uint64_t seed)
    : cluster_(cluster),
      cfg_(evolution),
      model_(predictor),
      seed_(derive_seed(seed, 0x0e5)) {}

bool OnesScheduler::ready(const SchedulerContext& ctx) {
  return should_update(ctx.jobs, last_deploy_epochs_);
}

Genome OnesScheduler::schedule(const SchedulerContext& ctx) {
  auto ectx = make_evolve_context(ctx.cluster, ctx.jobs, model_,
                                  packed_throughput_fn(ctx.cluster), ctx.now,
                                  ctx.new_jobs);
  if (!initialized_) {
    Rng rng(derive_seed(seed_, 1));
    population_ = init_population(ectx, cfg_, rng);
    initialized_ = true;
  }

  for (std::int32_t g = 0; g < cfg_.generations_per_round; ++g) {
    auto round_seed =
        derive_seed(seed_, 100 + round_ * 100000 + static_cast<std::uint64_t>(g));
    population_ = evolve_round(population_, ectx, cfg_, round_seed);
    if (evolution_log_) {
      auto rho = mean_rho(ctx.jobs, model_);
      double best = std::numeric_limits<double>::infinity();
      std::set<std::string> distinct;
      for (const auto& member : population_.members) {
        best = std::min(best, utilization_score(member, ctx.jobs,
                                                ectx.throughput_fn, rho));
        distinct.insert(genome_to_text(member, ctx.cluster));
      }
      *evolution_log_ << population_.generation << "," << best << ","
                      << distinct.size() << "\n";
    }
  }

  Rng pick_rng(derive_seed(seed_, 7 + round_));
  Genome best;
  if (cfg_.score_at_beta_mean) {
    auto rho = mean_rho(ctx.jobs, model_);
    best = probability_sample_best_with(population_.members, ctx.jobs,
                                        ectx.throughput_fn, rho);
  } else {
    best = probability_sample_best(population_.members, ctx.jobs,
                                   ectx.throughput_fn, model_, pick_rng,
                                   cfg_.rho_draws);
  }

  last_deploy_epochs_.clear();
  for (const auto& [id, job] : ctx.jobs)
    if (global_batch_of(best, id) > 0)
      last_deploy_epochs_[id] = job.rt.epochs_completed;
  ++round_;
  return best;
}

void OnesScheduler::job_completed(const Job& job) {
  model_.record_completion(job.spec, job.rt.checkpoints, job.rt.processed);
  model_.fit();
}

}  // namespace ones
