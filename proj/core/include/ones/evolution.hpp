#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "ones/domain.hpp"
#include "ones/rng.hpp"
#include "ones/objective.hpp"
#include "ones/predictor.hpp"
#include "ones/throughput.hpp"

namespace ones {

struct EvolutionConfig {
  std::int32_t population_size = 0;  // 0 -> one member per GPU
  double mutation_rate = 0.2;        // theta
  std::int32_t generations_per_round = 50;
  int rho_draws = 1;
  bool score_at_beta_mean = false;   // deterministic scoring (oracle checks)
};

struct Population {
  std::vector<Genome> members;
  std::int64_t generation = 0;
};

// Immutable per-round snapshot the operators work against.
struct EvolveContext {
  ClusterSpec cluster;
  const JobTable* jobs = nullptr;
  const ProgressModel* model = nullptr;
  ThroughputFn throughput_fn;
  double now = 0.0;
  std::vector<JobId> new_jobs;  // arrivals not yet granted their first slot

  struct JobView {
    const Job* job = nullptr;
    double remaining_mean = 0.0;  // Y at the Beta-mean progress
    double urgency = 0.0;         // 1/rho_mean - 1
    std::int32_t resume_gpus = 1; // slots requested when absent from a genome
  };
  std::map<JobId, JobView> views;
};

EvolveContext make_evolve_context(const ClusterSpec& cluster, const JobTable& jobs,
                                  const ProgressModel& model,
                                  ThroughputFn throughput_fn, double now,
                                  std::vector<JobId> new_jobs = {});

// Packs each job's workers onto consecutive slots in order of first
// occurrence, idle slots last. Preserves each job's local batch multiset.
Genome reorder(Genome g);
void reorder_in_place(Genome& g);

// K genomes, each built by assigning an independently random arrived job to
// every GPU (normalized to the batch limits), then reordered.
Population init_population(const EvolveContext& ctx, const EvolutionConfig& cfg,
                           Rng& rng);

// Brings one candidate in line with real-time status: clears completed jobs,
// scales down past-limit jobs, grants every new arrival one GPU (evicting
// from the longest-running jobs on shortage), then fills remaining idle GPUs
// by utilization-gain sampling.
Genome refresh(const Genome& g, const EvolveContext& ctx, Rng& rng);

// The raw per-slot coin mixing, before repair. Exposed for property tests.
std::pair<Genome, Genome> crossover_mix(const Genome& parent1,
                                        const Genome& parent2,
                                        Rng& rng);

std::pair<Genome, Genome> uniform_crossover(const Genome& parent1,
                                            const Genome& parent2,
                                            const EvolveContext& ctx,
                                            Rng& rng);

// Preempts each job present in the genome independently with probability
// theta, then refills vacated GPUs through the idle-fill loop.
Genome uniform_mutation(const Genome& g, const EvolveContext& ctx, double theta,
                        Rng& rng,
                        std::vector<JobId>* preempted_out = nullptr);

// One generation: G' = refreshed members + children of K random pairs +
// K mutants; the K best under a shared rho draw survive.
Population evolve_round(const Population& pop, const EvolveContext& ctx,
                        const EvolutionConfig& cfg, std::uint64_t round_seed);

// True when every running job has finished at least one epoch since the
// last deployment; with nothing running, true iff some job is waiting.
bool should_update(const JobTable& jobs,
                   const std::map<JobId, std::int64_t>& last_deploy_epochs);

// Deterministic per-purpose stream derivation (splitmix64 over seed ^ index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ones
