#pragma once

#include <functional>
#include <span>

#include "ones/domain.hpp"

namespace ones {

// Fraction of worker pairs sharing a node, folded into the communication
// penalty: gamma_eff = gamma * (f_intra * discount + (1 - f_intra)).
double gamma_eff(const ThroughputModelParams& params, const ClusterSpec& cluster,
                 std::span<const std::int32_t> slots);

// X(B, c) with a given effective penalty. Local batch is B/c; per-GPU speed
// saturates as b/(b + half_batch) and the all-reduce term divides by
// 1 + gamma_eff * (c - 1).
double throughput(const ThroughputModelParams& params, std::int64_t global_batch,
                  std::int32_t gpu_count, double gamma_effective);

// X for the placement actually held in a genome.
double throughput_in_genome(const JobSpec& spec, const Genome& g,
                            const ClusterSpec& cluster);

// X assuming the job's workers are packed contiguously from slot 0. This is
// the placement-free estimate schedulers score with; reorder keeps deployed
// placements close to it.
double throughput_packed(const ThroughputModelParams& params,
                         const ClusterSpec& cluster, std::int64_t global_batch,
                         std::int32_t gpu_count);

// Scheduler-facing estimate of X for a job at a hypothetical (B, c).
using ThroughputFn =
    std::function<double(const Job& job, std::int64_t global_batch,
                         std::int32_t gpu_count)>;

ThroughputFn packed_throughput_fn(const ClusterSpec& cluster);

}  // namespace ones
