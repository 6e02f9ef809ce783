#include "ones/throughput.hpp"

#include <algorithm>
#include <map>

namespace ones {
namespace {

double pair_intra_fraction(std::span<const std::int64_t> per_node_counts,
                           std::int64_t total) {
  if (total < 2) return 1.0;
  double intra = 0.0;
  for (auto n : per_node_counts) intra += 0.5 * static_cast<double>(n) * (n - 1);
  double pairs = 0.5 * static_cast<double>(total) * (total - 1);
  return intra / pairs;
}

}  // namespace

double gamma_eff(const ThroughputModelParams& params, const ClusterSpec& cluster,
                 std::span<const std::int32_t> slots) {
  std::map<std::int32_t, std::int64_t> counts;
  for (auto s : slots) ++counts[s / cluster.gpus_per_node];
  std::vector<std::int64_t> per_node;
  per_node.reserve(counts.size());
  for (const auto& [node, n] : counts) per_node.push_back(n);
  double f = pair_intra_fraction(per_node, static_cast<std::int64_t>(slots.size()));
  return params.comm_penalty * (f * params.intra_node_discount + (1.0 - f));
}

double throughput(const ThroughputModelParams& params, std::int64_t global_batch,
                  std::int32_t gpu_count, double gamma_effective) {
  if (gpu_count < 1 || global_batch < 1) return 0.0;
  double local = static_cast<double>(global_batch) / gpu_count;
  double per_gpu = params.per_gpu_peak * local / (local + params.half_batch);
  return gpu_count * per_gpu / (1.0 + gamma_effective * (gpu_count - 1));
}

double throughput_in_genome(const JobSpec& spec, const Genome& g,
                            const ClusterSpec& cluster) {
  auto slots = slots_of(g, spec.id);
  if (slots.empty()) return 0.0;
  auto batch = global_batch_of(g, spec.id);
  return throughput(spec.tput, batch, static_cast<std::int32_t>(slots.size()),
                    gamma_eff(spec.tput, cluster, slots));
}

double throughput_packed(const ThroughputModelParams& params,
                         const ClusterSpec& cluster, std::int64_t global_batch,
                         std::int32_t gpu_count) {
  if (gpu_count < 1 || global_batch < 1) return 0.0;
  // contiguous from slot 0: full nodes plus one partial node
  std::int64_t g = cluster.gpus_per_node;
  std::int64_t full = gpu_count / g;
  std::int64_t rem = gpu_count % g;
  double f = 1.0;
  if (gpu_count > 1) {
    double intra = full * 0.5 * static_cast<double>(g) * (g - 1) +
                   0.5 * static_cast<double>(rem) * (rem - 1);
    double pairs = 0.5 * static_cast<double>(gpu_count) * (gpu_count - 1);
    f = intra / pairs;
  }
  double ge = params.comm_penalty * (f * params.intra_node_discount + (1.0 - f));
  return throughput(params, global_batch, gpu_count, ge);
}

ThroughputFn packed_throughput_fn(const ClusterSpec& cluster) {
  return [cluster](const Job& job, std::int64_t batch, std::int32_t gpus) {
    return throughput_packed(job.spec.tput, cluster, batch, gpus);
  };
}

}  // namespace ones
