#include "ones/domain.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ones {

const char* to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Waiting: return "waiting";
    case JobStatus::Running: return "running";
    case JobStatus::Completed: return "completed";
  }
  return "?";
}

std::int64_t global_batch_of(const Genome& g, JobId job) {
  std::int64_t sum = 0;
  for (const auto& s : g.slots)
    if (s.job == job) sum += s.local_batch;
  return sum;
}

std::int32_t gpu_count_of(const Genome& g, JobId job) {
  std::int32_t n = 0;
  for (const auto& s : g.slots)
    if (s.job == job) ++n;
  return n;
}

std::vector<std::int32_t> slots_of(const Genome& g, JobId job) {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.slots[i].job == job) out.push_back(static_cast<std::int32_t>(i));
  return out;
}

std::vector<std::int32_t> idle_slots(const Genome& g) {
  std::vector<std::int32_t> out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.slots[i].idle()) out.push_back(static_cast<std::int32_t>(i));
  return out;
}

void clear_job(Genome& g, JobId job) {
  for (auto& s : g.slots)
    if (s.job == job) s = GenomeSlot{};
}

std::int64_t set_job_allocation(Genome& g, JobId job,
                                std::span<const std::int32_t> slots,
                                std::int64_t target_batch,
                                std::int64_t max_local_batch) {
  auto n = static_cast<std::int64_t>(slots.size());
  if (n == 0 || target_batch <= 0) {
    for (auto s : slots) g.slots[s] = GenomeSlot{};
    return 0;
  }
  // Every kept slot must carry >= 1 sample; surplus slots are released
  // highest-ordered first (slots is in ascending order by construction).
  std::int64_t kept = std::min<std::int64_t>(n, target_batch);
  std::int64_t batch = std::min(target_batch, kept * max_local_batch);
  std::int64_t base = batch / kept;
  std::int64_t rem = batch % kept;
  for (std::int64_t i = 0; i < n; ++i) {
    auto slot = slots[static_cast<std::size_t>(i)];
    if (i < kept)
      g.slots[slot] = GenomeSlot{job, base + (i < rem ? 1 : 0)};
    else
      g.slots[slot] = GenomeSlot{};
  }
  return batch;
}

std::optional<Violation> validate(const Genome& g, const JobTable& jobs) {
  std::map<JobId, std::int64_t> batch_sum;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& s = g.slots[i];
    auto slot = static_cast<std::int32_t>(i);
    if (s.idle()) {
      if (s.local_batch != 0)
        return Violation{slot, "idle slot with nonzero local batch"};
      continue;
    }
    auto it = jobs.find(s.job);
    if (it == jobs.end())
      return Violation{slot, "unknown job " + std::to_string(s.job)};
    if (s.local_batch < 1)
      return Violation{slot, "local batch < 1"};
    if (s.local_batch > it->second.spec.max_local_batch)
      return Violation{slot, "local batch " + std::to_string(s.local_batch) +
                                 " over memory cap " +
                                 std::to_string(it->second.spec.max_local_batch)};
    batch_sum[s.job] += s.local_batch;
  }
  for (const auto& [job, sum] : batch_sum) {
    const auto& rt = jobs.at(job).rt;
    if (rt.batch_limit > 0 && sum > rt.batch_limit)
      return Violation{-1, "job " + std::to_string(job) + " global batch " +
                               std::to_string(sum) + " over limit " +
                               std::to_string(rt.batch_limit)};
  }
  return std::nullopt;
}

std::string genome_to_text(const Genome& g, const ClusterSpec& cluster) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto gpu = cluster.gpu_at(static_cast<std::int32_t>(i));
    const auto& s = g.slots[i];
    if (s.idle())
      std::snprintf(buf, sizeof buf, "%d,%d,-,0\n", gpu.node, gpu.device);
    else
      std::snprintf(buf, sizeof buf, "%d,%d,%d,%lld\n", gpu.node, gpu.device,
                    s.job, static_cast<long long>(s.local_batch));
    out += buf;
  }
  return out;
}

Genome genome_from_text(const std::string& text, const ClusterSpec& cluster) {
  Genome g(static_cast<std::size_t>(cluster.total_gpus()));
  std::vector<bool> seen(g.size(), false);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error("genome text line " + std::to_string(line_no) +
                             ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    int node = 0, device = 0;
    char job_buf[32];
    long long batch = 0;
    if (std::sscanf(line.c_str(), "%d,%d,%31[^,],%lld", &node, &device, job_buf,
                    &batch) != 4)
      fail("malformed row '" + line + "'");
    if (node < 0 || node >= cluster.nodes || device < 0 ||
        device >= cluster.gpus_per_node)
      fail("gpu (" + std::to_string(node) + "," + std::to_string(device) +
           ") outside cluster");
    auto slot = static_cast<std::size_t>(cluster.slot_of({node, device}));
    if (seen[slot]) fail("duplicate assignment for this gpu");
    seen[slot] = true;
    if (job_buf[0] == '-' && job_buf[1] == '\0') {
      if (batch != 0) fail("idle slot with nonzero local batch");
      g.slots[slot] = GenomeSlot{};
    } else {
      char* end = nullptr;
      long id = std::strtol(job_buf, &end, 10);
      if (end == job_buf || *end != '\0' || id < 0) fail("bad job id");
      if (batch < 1) fail("local batch < 1");
      g.slots[slot] = GenomeSlot{static_cast<JobId>(id), batch};
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) {
      line_no = 0;
      auto gpu = cluster.gpu_at(static_cast<std::int32_t>(i));
      throw std::runtime_error("genome text: missing gpu (" +
                               std::to_string(gpu.node) + "," +
                               std::to_string(gpu.device) + ")");
    }
  return g;
}

}  // namespace ones
