#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "ones/domain.hpp"
#include "ones/rng.hpp"
#include "ones/predictor.hpp"
#include "ones/throughput.hpp"

namespace ones {

struct CandidateScore {
  std::size_t candidate_index = 0;
  double score = 0.0;  // expected remaining utilization, GPU-seconds
};

using RhoDraw = std::map<JobId, double>;

// One progress draw per job, shared by every candidate scored against it.
// With rho_draws > 1 the per-job value is the mean of that many draws.
RhoDraw draw_rho(const JobTable& jobs, const ProgressModel& model,
                 Rng& rng, int rho_draws = 1);

// Per-job Beta means instead of draws; used for deterministic scoring.
RhoDraw mean_rho(const JobTable& jobs, const ProgressModel& model);

// Sum over jobs running in the genome of Y_processed * c / X * (1/rho - 1).
// Jobs absent from the genome contribute nothing. Throws if a running job
// has no rho entry.
double utilization_score(const Genome& g, const JobTable& jobs,
                         const ThroughputFn& throughput_fn, const RhoDraw& rho);

// The (batch, gpu) configuration a job would be granted when re-entering a
// schedule: min(previous gpus, slots its limit can feed) at the limit.
struct ResumeAllocation {
  std::int64_t batch = 0;
  std::int32_t gpus = 0;
};
ResumeAllocation resume_allocation(const Job& job);

// Remaining utilization still owed by started jobs the candidate leaves
// waiting, priced at their resume configuration. Deferring work must not
// look free to the search, or it starves every job with a large remainder.
double parked_work_cost(const Genome& g, const JobTable& jobs,
                        const ThroughputFn& throughput_fn, const RhoDraw& rho);

// What candidate ranking minimizes: running terms plus the owed remainder.
double selection_score(const Genome& g, const JobTable& jobs,
                       const ThroughputFn& throughput_fn, const RhoDraw& rho);

std::vector<CandidateScore> score_candidates(std::span<const Genome> candidates,
                                             const JobTable& jobs,
                                             const ThroughputFn& throughput_fn,
                                             const RhoDraw& rho);

// Scores every candidate under the given rho and returns the one with the
// minimal score; ties break toward the lowest index.
const Genome& probability_sample_best_with(std::span<const Genome> candidates,
                                           const JobTable& jobs,
                                           const ThroughputFn& throughput_fn,
                                           const RhoDraw& rho);

// Full probability-sampling selection: draws rho per job, then picks the
// minimal-score candidate.
const Genome& probability_sample_best(std::span<const Genome> candidates,
                                      const JobTable& jobs,
                                      const ThroughputFn& throughput_fn,
                                      const ProgressModel& model,
                                      Rng& rng, int rho_draws = 1);

// The k lowest-scoring candidates under one shared rho draw, ordered by
// (score, index). Returns everything when k >= |candidates|.
std::vector<Genome> select_top_k_with(std::span<const Genome> candidates,
                                      std::size_t k, const JobTable& jobs,
                                      const ThroughputFn& throughput_fn,
                                      const RhoDraw& rho);

std::vector<Genome> select_top_k(std::span<const Genome> candidates,
                                 std::size_t k, const JobTable& jobs,
                                 const ThroughputFn& throughput_fn,
                                 const ProgressModel& model,
                                 Rng& rng, int rho_draws = 1);

}  // namespace ones
