#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ones/domain.hpp"
#include "ones/rng.hpp"
#include "ones/predictor.hpp"

namespace ones {

// Bounds under which exhaustive enumeration stays trivial.
inline constexpr std::int32_t kOracleMaxGpus = 4;
inline constexpr std::int32_t kOracleMaxJobs = 3;
inline constexpr std::int32_t kOracleMaxBatchOptions = 3;

struct MicroInstance {
  ClusterSpec cluster;
  JobTable jobs;
};

// A seeded random micro-instance: every job has some progress, a per-GPU
// batch granularity equal to its memory cap, and a limit of 1..max_options
// times that cap.
MicroInstance make_micro_instance(std::int32_t gpus, std::int32_t n_jobs,
                                  std::int32_t max_options, std::uint64_t seed);

struct OracleResult {
  double best_score = 0.0;
  std::vector<std::int32_t> best_gpus;  // per job in table order
  std::int64_t enumerated = 0;
};

// Exhaustive minimum of the remaining-utilization objective over every
// reachable GPU split, scored at the Beta-mean progress of each job. Throws
// std::invalid_argument when the instance exceeds the bounds above.
OracleResult brute_force_optimum(const MicroInstance& inst,
                                 const ProgressModel& model);

}  // namespace ones
