#include "ones/objective.hpp"

#include <algorithm>
#include <stdexcept>

namespace ones {

RhoDraw draw_rho(const JobTable& jobs, const ProgressModel& model,
                 Rng& rng, int rho_draws) {
  RhoDraw rho;
  for (const auto& [id, job] : jobs) {
    if (job.rt.status == JobStatus::Completed) continue;
    auto params = model.predict(features_of(job));
    double sum = 0.0;
    int n = std::max(rho_draws, 1);
    for (int i = 0; i < n; ++i) sum += sample_progress(params, rng);
    rho[id] = sum / n;
  }
  return rho;
}

RhoDraw mean_rho(const JobTable& jobs, const ProgressModel& model) {
  RhoDraw rho;
  for (const auto& [id, job] : jobs) {
    if (job.rt.status == JobStatus::Completed) continue;
    rho[id] = model.predict(features_of(job)).mean();
  }
  return rho;
}

namespace {

// flat (job, batch, gpus) accumulation of one genome; genomes hold few
// distinct jobs, linear probing beats a map here
struct FlatAlloc {
  struct Entry {
    JobId id;
    std::int64_t batch = 0;
    std::int32_t gpus = 0;
  };
  std::vector<Entry> entries;

  Entry& get(JobId id) {
    for (auto& e : entries)
      if (e.id == id) return e;
    entries.push_back({id, 0, 0});
    return entries.back();
  }
};

FlatAlloc flat_alloc(const Genome& g) {
  FlatAlloc alloc;
  alloc.entries.reserve(8);
  for (const auto& s : g.slots) {
    if (s.idle()) continue;
    auto& e = alloc.get(s.job);
    e.batch += s.local_batch;
    ++e.gpus;
  }
  return alloc;
}

}  // namespace

double utilization_score(const Genome& g, const JobTable& jobs,
                         const ThroughputFn& throughput_fn, const RhoDraw& rho) {
  auto alloc = flat_alloc(g);
  double total = 0.0;
  for (const auto& e : alloc.entries) {
    const auto& job = jobs.at(e.id);
    auto it = rho.find(e.id);
    if (it == rho.end())
      throw std::logic_error("utilization_score: no rho for running job " +
                             std::to_string(e.id));
    if (job.rt.processed <= 0.0) continue;  // nothing attained, nothing remains to weight
    double x = throughput_fn(job, e.batch, e.gpus);
    if (!(x > 0.0))
      throw std::logic_error("utilization_score: nonpositive throughput for job " +
                             std::to_string(e.id));
    total += job.rt.processed * e.gpus / x * (1.0 / it->second - 1.0);
  }
  return total;
}

ResumeAllocation resume_allocation(const Job& job) {
  auto prev = job.rt.gpu_count > 0 ? job.rt.gpu_count : job.rt.prev_gpu_count;
  auto limit = std::max<std::int64_t>(job.rt.batch_limit, 1);
  auto max_local = std::max<std::int64_t>(job.spec.max_local_batch, 1);
  auto for_limit = (limit + max_local - 1) / max_local;
  auto gpus = static_cast<std::int32_t>(
      std::max<std::int64_t>(std::min<std::int64_t>(std::max(prev, 1), for_limit), 1));
  auto batch = std::min<std::int64_t>(limit, gpus * max_local);
  return {batch, gpus};
}

double parked_work_cost(const Genome& g, const JobTable& jobs,
                        const ThroughputFn& throughput_fn, const RhoDraw& rho) {
  double total = 0.0;
  for (const auto& [id, job] : jobs) {
    if (job.rt.status == JobStatus::Completed || job.rt.processed <= 0.0)
      continue;
    if (gpu_count_of(g, id) > 0) continue;
    auto it = rho.find(id);
    if (it == rho.end()) continue;
    auto alloc = resume_allocation(job);
    double x = throughput_fn(job, alloc.batch, alloc.gpus);
    if (!(x > 0.0)) continue;
    total += job.rt.processed * alloc.gpus / x * (1.0 / it->second - 1.0);
  }
  return total;
}

double selection_score(const Genome& g, const JobTable& jobs,
                       const ThroughputFn& throughput_fn, const RhoDraw& rho) {
  return utilization_score(g, jobs, throughput_fn, rho) +
         parked_work_cost(g, jobs, throughput_fn, rho);
}

namespace {

// The owed remainder of every startable job, computed once per rho draw so
// per-candidate scoring needs only the jobs actually present in the genome.
struct OwedTable {
  std::vector<std::pair<JobId, double>> owed;
  double total = 0.0;

  double of(JobId id) const {
    for (const auto& [jid, value] : owed)
      if (jid == id) return value;
    return 0.0;
  }
};

OwedTable build_owed(const JobTable& jobs, const ThroughputFn& throughput_fn,
                     const RhoDraw& rho) {
  OwedTable table;
  for (const auto& [id, job] : jobs) {
    if (job.rt.status == JobStatus::Completed || job.rt.processed <= 0.0)
      continue;
    auto it = rho.find(id);
    if (it == rho.end()) continue;
    auto alloc = resume_allocation(job);
    double x = throughput_fn(job, alloc.batch, alloc.gpus);
    if (!(x > 0.0)) continue;
    double cost = job.rt.processed * alloc.gpus / x * (1.0 / it->second - 1.0);
    table.owed.emplace_back(id, cost);
    table.total += cost;
  }
  return table;
}

double selection_score_with(const Genome& g, const JobTable& jobs,
                            const ThroughputFn& throughput_fn,
                            const RhoDraw& rho, const OwedTable& owed) {
  auto alloc = flat_alloc(g);
  double running = 0.0;
  double present_owed = 0.0;
  for (const auto& e : alloc.entries) {
    const auto& job = jobs.at(e.id);
    auto it = rho.find(e.id);
    if (it == rho.end())
      throw std::logic_error("utilization_score: no rho for running job " +
                             std::to_string(e.id));
    present_owed += owed.of(e.id);
    if (job.rt.processed <= 0.0) continue;
    double x = throughput_fn(job, e.batch, e.gpus);
    if (!(x > 0.0))
      throw std::logic_error("utilization_score: nonpositive throughput for job " +
                             std::to_string(e.id));
    running += job.rt.processed * e.gpus / x * (1.0 / it->second - 1.0);
  }
  return running + (owed.total - present_owed);
}

}  // namespace

std::vector<CandidateScore> score_candidates(std::span<const Genome> candidates,
                                             const JobTable& jobs,
                                             const ThroughputFn& throughput_fn,
                                             const RhoDraw& rho) {
  auto owed = build_owed(jobs, throughput_fn, rho);
  std::vector<CandidateScore> scores;
  scores.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    scores.push_back(
        {i, selection_score_with(candidates[i], jobs, throughput_fn, rho, owed)});
  return scores;
}

const Genome& probability_sample_best_with(std::span<const Genome> candidates,
                                           const JobTable& jobs,
                                           const ThroughputFn& throughput_fn,
                                           const RhoDraw& rho) {
  if (candidates.empty())
    throw std::invalid_argument("probability_sample_best: empty candidate list");
  auto owed = build_owed(jobs, throughput_fn, rho);
  std::size_t best = 0;
  double best_score =
      selection_score_with(candidates[0], jobs, throughput_fn, rho, owed);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    double s = selection_score_with(candidates[i], jobs, throughput_fn, rho, owed);
    if (s < best_score) {
      best_score = s;
      best = i;
    }
  }
  return candidates[best];
}

const Genome& probability_sample_best(std::span<const Genome> candidates,
                                      const JobTable& jobs,
                                      const ThroughputFn& throughput_fn,
                                      const ProgressModel& model,
                                      Rng& rng, int rho_draws) {
  auto rho = draw_rho(jobs, model, rng, rho_draws);
  return probability_sample_best_with(candidates, jobs, throughput_fn, rho);
}

std::vector<Genome> select_top_k_with(std::span<const Genome> candidates,
                                      std::size_t k, const JobTable& jobs,
                                      const ThroughputFn& throughput_fn,
                                      const RhoDraw& rho) {
  auto scores = score_candidates(candidates, jobs, throughput_fn, rho);
  std::stable_sort(scores.begin(), scores.end(),
                   [](const CandidateScore& a, const CandidateScore& b) {
                     return a.score < b.score;
                   });
  std::vector<Genome> out;
  out.reserve(std::min(k, scores.size()));
  for (std::size_t i = 0; i < scores.size() && i < k; ++i)
    out.push_back(candidates[scores[i].candidate_index]);
  return out;
}

std::vector<Genome> select_top_k(std::span<const Genome> candidates,
                                 std::size_t k, const JobTable& jobs,
                                 const ThroughputFn& throughput_fn,
                                 const ProgressModel& model,
                                 Rng& rng, int rho_draws) {
  auto rho = draw_rho(jobs, model, rng, rho_draws);
  return select_top_k_with(candidates, k, jobs, throughput_fn, rho);
}

}  // namespace ones
