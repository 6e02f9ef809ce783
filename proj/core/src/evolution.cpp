#include "ones/evolution.hpp"

#include <algorithm>
#include <cmath>

namespace ones {
namespace {

constexpr double kWeightFloor = 1e-9;

std::int64_t start_batch(const Job& job) {
  return std::max<std::int64_t>(
      std::min(job.rt.batch_limit, job.spec.max_local_batch), 1);
}

bool arrived(const Job& job, double now) { return job.spec.arrival_time <= now; }

// Per-job (batch, gpus) summary of one genome, in first-occurrence order.
// Slot lists are fetched on demand for the few jobs an operator touches.
struct Alloc {
  std::int64_t batch = 0;
  std::int32_t gpus = 0;
};

struct AllocMap {
  std::vector<std::pair<JobId, Alloc>> entries;

  Alloc& get(JobId id) {
    for (auto& [jid, a] : entries)
      if (jid == id) return a;
    entries.emplace_back(id, Alloc{});
    return entries.back().second;
  }
  const Alloc* find(JobId id) const {
    for (const auto& [jid, a] : entries)
      if (jid == id) return &a;
    return nullptr;
  }
  auto begin() { return entries.begin(); }
  auto end() { return entries.end(); }
  auto begin() const { return entries.begin(); }
  auto end() const { return entries.end(); }
};

AllocMap alloc_of(const Genome& g) {
  AllocMap out;
  out.entries.reserve(8);
  for (const auto& s : g.slots) {
    if (s.idle()) continue;
    auto& a = out.get(s.job);
    a.batch += s.local_batch;
    ++a.gpus;
  }
  return out;
}

bool has_idle(const Genome& g) {
  for (const auto& s : g.slots)
    if (s.idle()) return true;
  return false;
}

// Remaining-utilization contribution of one job at (batch, gpus).
double contribution(const EvolveContext& ctx, const EvolveContext::JobView& view,
                    std::int64_t batch, std::int32_t gpus) {
  if (gpus < 1 || batch < 1) return 0.0;
  double processed = view.job->rt.processed;
  if (processed <= 0.0) return 0.0;
  double x = ctx.throughput_fn(*view.job, batch, gpus);
  if (!(x > 0.0)) return 0.0;
  return processed * gpus / x * view.urgency;
}

struct FillCandidate {
  JobId id = kNoJob;
  std::int32_t want = 0;       // additional slots requested
  double weight = kWeightFloor;
};

// The idle-fill loop shared by refresh and mutation: repeatedly samples one
// job from the utilization-gain weights and grants it slots until no idle
// GPU or no candidate remains.
void fill_idle(Genome& g, const EvolveContext& ctx, Rng& rng) {
  if (!has_idle(g)) return;
  auto idle = idle_slots(g);
  auto alloc = alloc_of(g);

  auto candidate_for = [&](JobId id) -> FillCandidate {
    const auto& view = ctx.views.at(id);
    const auto& job = *view.job;
    const auto& rt = job.rt;
    if (rt.status == JobStatus::Completed || !arrived(job, ctx.now)) return {};
    auto limit = rt.batch_limit;
    const auto* it = alloc.find(id);
    if (it == nullptr) {
      // waiting (w.r.t. this genome): resume at min(previous c, slots for R)
      std::int32_t want = view.resume_gpus;
      auto target_batch =
          std::min<std::int64_t>(limit, static_cast<std::int64_t>(want) *
                                            job.spec.max_local_batch);
      double gain = 0.0 - contribution(ctx, view, target_batch, want);
      return {id, want, std::max(gain * view.remaining_mean, kWeightFloor)};
    }
    auto batch = it->batch;
    auto gpus = it->gpus;
    if (limit <= batch) return {};  // already at its limit
    auto target_gpus = static_cast<std::int32_t>(limit * gpus / batch);
    if (target_gpus <= gpus) return {};
    auto target_batch = std::min<std::int64_t>(
        limit, static_cast<std::int64_t>(target_gpus) * job.spec.max_local_batch);
    double gain = contribution(ctx, view, batch, gpus) -
                  contribution(ctx, view, target_batch, target_gpus);
    return {id, target_gpus - gpus,
            std::max(gain * view.remaining_mean, kWeightFloor)};
  };

  std::vector<FillCandidate> candidates;
  for (const auto& [id, view] : ctx.views) {
    auto c = candidate_for(id);
    if (c.id != kNoJob && c.want > 0) candidates.push_back(c);
  }

  while (!idle.empty() && !candidates.empty()) {
    double total = 0.0;
    for (const auto& c : candidates) total += c.weight;
    double pick = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t chosen = 0;
    for (; chosen + 1 < candidates.size(); ++chosen) {
      pick -= candidates[chosen].weight;
      if (pick <= 0.0) break;
    }
    auto id = candidates[chosen].id;
    auto grant = std::min<std::size_t>(candidates[chosen].want, idle.size());

    auto slots = slots_of(g, id);
    for (std::size_t i = 0; i < grant; ++i) slots.push_back(idle[i]);
    idle.erase(idle.begin(), idle.begin() + static_cast<std::ptrdiff_t>(grant));
    std::sort(slots.begin(), slots.end());

    const auto& job = *ctx.views.at(id).job;
    auto target_batch = std::min<std::int64_t>(
        job.rt.batch_limit,
        static_cast<std::int64_t>(slots.size()) * job.spec.max_local_batch);
    auto& entry = alloc.get(id);  // creates empty for absent jobs
    entry.batch = set_job_allocation(g, id, slots, target_batch,
                                     job.spec.max_local_batch);
    entry.gpus = gpu_count_of(g, id);

    // Only the granted job's candidacy changed.
    auto next = candidate_for(id);
    if (next.id != kNoJob && next.want > 0)
      candidates[chosen] = next;
    else
      candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
}

// Clip one job's global batch to its limit by dropping highest-ordered slots;
// a final single slot is clamped in place.
void repair_limits(Genome& g, const EvolveContext& ctx) {
  auto alloc = alloc_of(g);
  for (auto& [id, a] : alloc) {
    auto it = ctx.jobs->find(id);
    if (it == ctx.jobs->end() || it->second.rt.status == JobStatus::Completed) {
      clear_job(g, id);
      continue;
    }
    auto limit = it->second.rt.batch_limit;
    if (limit <= 0 || a.batch <= limit) continue;
    auto slots = slots_of(g, id);
    while (a.batch > limit && slots.size() > 1) {
      auto slot = slots.back();
      slots.pop_back();
      a.batch -= g.slots[slot].local_batch;
      g.slots[slot] = GenomeSlot{};
    }
    if (a.batch > limit) g.slots[slots.front()].local_batch = limit;
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over the combined value
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

EvolveContext make_evolve_context(const ClusterSpec& cluster, const JobTable& jobs,
                                  const ProgressModel& model,
                                  ThroughputFn throughput_fn, double now,
                                  std::vector<JobId> new_jobs) {
  EvolveContext ctx;
  ctx.cluster = cluster;
  ctx.jobs = &jobs;
  ctx.model = &model;
  ctx.throughput_fn = std::move(throughput_fn);
  ctx.now = now;
  ctx.new_jobs = std::move(new_jobs);
  for (const auto& [id, job] : jobs) {
    if (job.rt.status == JobStatus::Completed || !arrived(job, now)) continue;
    EvolveContext::JobView view;
    view.job = &job;
    double rho = model.predict(features_of(job)).mean();
    rho = std::clamp(rho, 1e-6, 1.0 - 1e-6);
    view.urgency = 1.0 / rho - 1.0;
    view.remaining_mean = job.rt.processed * view.urgency;
    view.resume_gpus = resume_allocation(job).gpus;
    ctx.views.emplace(id, view);
  }
  return ctx;
}

void reorder_in_place(Genome& g) {
  std::vector<GenomeSlot> out;
  out.reserve(g.size());
  std::vector<JobId> seen;
  seen.reserve(8);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto id = g.slots[i].job;
    if (id == kNoJob) continue;
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
    seen.push_back(id);
    for (std::size_t k = i; k < g.size(); ++k)
      if (g.slots[k].job == id) out.push_back(g.slots[k]);
  }
  out.resize(g.size());
  g.slots = std::move(out);
}

Genome reorder(Genome g) {
  reorder_in_place(g);
  return g;
}

Population init_population(const EvolveContext& ctx, const EvolutionConfig& cfg,
                           Rng& rng) {
  auto total = static_cast<std::size_t>(ctx.cluster.total_gpus());
  std::size_t k = cfg.population_size > 0
                      ? static_cast<std::size_t>(cfg.population_size)
                      : total;
  std::vector<JobId> pool;
  for (const auto& [id, view] : ctx.views) pool.push_back(id);

  Population pop;
  pop.members.reserve(k);
  for (std::size_t m = 0; m < k; ++m) {
    Genome g(total);
    if (!pool.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (auto& slot : g.slots) slot = GenomeSlot{pool[pick(rng)], 1};
      // normalize each job to its single-GPU start batch per worker, capped
      // by the batch limit
      for (const auto& [id, a] : alloc_of(g)) {
        const auto& job = *ctx.views.at(id).job;
        auto per_gpu = start_batch(job);
        auto target = std::min<std::int64_t>(
            job.rt.batch_limit, per_gpu * static_cast<std::int64_t>(a.gpus));
        set_job_allocation(g, id, slots_of(g, id), target,
                           job.spec.max_local_batch);
      }
    }
    reorder_in_place(g);
    pop.members.push_back(std::move(g));
  }
  return pop;
}

Genome refresh(const Genome& input, const EvolveContext& ctx,
               Rng& rng) {
  Genome g = input;

  // (1) clean up completed or unknown jobs
  for (auto& s : g.slots) {
    if (s.idle()) continue;
    auto it = ctx.jobs->find(s.job);
    if (it == ctx.jobs->end() || it->second.rt.status == JobStatus::Completed)
      s = GenomeSlot{};
  }

  // (2) scale down jobs whose limit dropped below their batch
  for (const auto& [id, a] : alloc_of(g)) {
    auto limit = ctx.jobs->at(id).rt.batch_limit;
    if (limit >= a.batch) continue;
    auto keep = limit * a.gpus / a.batch;  // c - floor(R*c/B) removed
    if (keep <= 0) {
      clear_job(g, id);
      continue;
    }
    auto slots = slots_of(g, id);
    for (std::size_t k = static_cast<std::size_t>(keep); k < slots.size(); ++k)
      g.slots[slots[k]] = GenomeSlot{};
    slots.resize(static_cast<std::size_t>(keep));
    set_job_allocation(g, id, slots, std::min(a.batch, limit),
                       ctx.jobs->at(id).spec.max_local_batch);
  }

  // (3) one GPU for every new arrival, newest first; evict from the
  // longest-running jobs when idle GPUs run out
  std::vector<JobId> fresh;
  for (auto id : ctx.new_jobs) {
    auto it = ctx.views.find(id);
    if (it != ctx.views.end() && global_batch_of(g, id) == 0) fresh.push_back(id);
  }
  std::sort(fresh.begin(), fresh.end(), [&](JobId a, JobId b) {
    double aa = ctx.views.at(a).job->spec.arrival_time;
    double ab = ctx.views.at(b).job->spec.arrival_time;
    return aa != ab ? aa > ab : a > b;  // newest-arrival first
  });
  if (!fresh.empty()) {
    auto idle = idle_slots(g);
    std::size_t next_idle = 0;
    for (auto id : fresh) {
      if (next_idle >= idle.size()) {
        // take the highest-ordered slot of the running job with the largest
        // executed time (never from the new jobs themselves)
        JobId victim = kNoJob;
        double victim_time = -1.0;
        for (const auto& [vid, a] : alloc_of(g)) {
          if (std::find(fresh.begin(), fresh.end(), vid) != fresh.end()) continue;
          double t = ctx.jobs->at(vid).rt.executed_time;
          if (t > victim_time) {
            victim_time = t;
            victim = vid;
          }
        }
        if (victim == kNoJob) break;  // nothing left to take
        auto vslots = slots_of(g, victim);
        auto freed = vslots.back();
        vslots.pop_back();
        g.slots[freed] = GenomeSlot{};
        if (!vslots.empty()) {
          auto batch = std::min(global_batch_of(g, victim),
                                ctx.jobs->at(victim).rt.batch_limit);
          set_job_allocation(g, victim, vslots, batch,
                             ctx.jobs->at(victim).spec.max_local_batch);
        }
        idle.push_back(freed);
      }
      const auto& job = *ctx.views.at(id).job;
      g.slots[idle[next_idle++]] = GenomeSlot{id, start_batch(job)};
    }
  }

  // (4) fill whatever is still idle
  fill_idle(g, ctx, rng);
  reorder_in_place(g);
  return g;
}

std::pair<Genome, Genome> crossover_mix(const Genome& parent1,
                                        const Genome& parent2,
                                        Rng& rng) {
  Genome c1 = parent1;
  Genome c2 = parent2;
  std::uniform_int_distribution<int> coin(0, 1);
  for (std::size_t i = 0; i < c1.size(); ++i)
    if (coin(rng)) std::swap(c1.slots[i], c2.slots[i]);
  return {std::move(c1), std::move(c2)};
}

std::pair<Genome, Genome> uniform_crossover(const Genome& parent1,
                                            const Genome& parent2,
                                            const EvolveContext& ctx,
                                            Rng& rng) {
  auto [c1, c2] = crossover_mix(parent1, parent2, rng);
  repair_limits(c1, ctx);
  repair_limits(c2, ctx);
  // repair may have vacated GPUs; children compete on full clusters
  fill_idle(c1, ctx, rng);
  fill_idle(c2, ctx, rng);
  reorder_in_place(c1);
  reorder_in_place(c2);
  return {std::move(c1), std::move(c2)};
}

Genome uniform_mutation(const Genome& input, const EvolveContext& ctx,
                        double theta, Rng& rng,
                        std::vector<JobId>* preempted_out) {
  Genome g = input;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& [id, a] : alloc_of(g)) {
    if (unit(rng) < theta) {
      clear_job(g, id);
      if (preempted_out) preempted_out->push_back(id);
    }
  }
  fill_idle(g, ctx, rng);
  reorder_in_place(g);
  return g;
}

Population evolve_round(const Population& pop, const EvolveContext& ctx,
                        const EvolutionConfig& cfg, std::uint64_t round_seed) {
  auto k = pop.members.size();
  std::vector<Genome> next_gen;
  next_gen.reserve(4 * k);

  // refresh every member so the whole population tracks real-time status
  for (std::size_t i = 0; i < k; ++i) {
    Rng rng(derive_seed(round_seed, i));
    next_gen.push_back(refresh(pop.members[i], ctx, rng));
  }

  // K pairs of parents -> 2K children
  Rng pair_rng(derive_seed(round_seed, 1'000'000));
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  for (std::size_t p = 0; p < k; ++p) {
    const auto& p1 = next_gen[pick(pair_rng)];
    const auto& p2 = next_gen[pick(pair_rng)];
    Rng rng(derive_seed(round_seed, 2'000'000 + p));
    auto [c1, c2] = uniform_crossover(p1, p2, ctx, rng);
    next_gen.push_back(std::move(c1));
    next_gen.push_back(std::move(c2));
  }

  // K mutants of randomly selected members
  Rng mut_pick_rng(derive_seed(round_seed, 3'000'000));
  for (std::size_t m = 0; m < k; ++m) {
    const auto& base = next_gen[pick(mut_pick_rng)];
    Rng rng(derive_seed(round_seed, 4'000'000 + m));
    next_gen.push_back(uniform_mutation(base, ctx, cfg.mutation_rate, rng));
  }

  Rng sel_rng(derive_seed(round_seed, 5'000'000));
  auto rho = cfg.score_at_beta_mean
                 ? mean_rho(*ctx.jobs, *ctx.model)
                 : draw_rho(*ctx.jobs, *ctx.model, sel_rng, cfg.rho_draws);

  Population next;
  next.members = select_top_k_with(next_gen, k, *ctx.jobs, ctx.throughput_fn, rho);
  next.generation = pop.generation + 1;
  return next;
}

bool should_update(const JobTable& jobs,
                   const std::map<JobId, std::int64_t>& last_deploy_epochs) {
  bool any_running = false;
  bool any_waiting = false;
  for (const auto& [id, job] : jobs) {
    if (job.rt.status == JobStatus::Running) {
      any_running = true;
      auto it = last_deploy_epochs.find(id);
      auto baseline = it != last_deploy_epochs.end() ? it->second : 0;
      if (job.rt.epochs_completed < baseline + 1) return false;
    } else if (job.rt.status == JobStatus::Waiting) {
      any_waiting = true;
    }
  }
  if (!any_running) return any_waiting;
  return true;
}

}  // namespace ones
