#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ones {

using JobId = std::int32_t;
inline constexpr JobId kNoJob = -1;

// (node, device) coordinate of one GPU. Total order is (node, device); the
// flattened slot index under that order is how Genome addresses the cluster.
struct GpuId {
  std::int32_t node = 0;
  std::int32_t device = 0;
  auto operator<=>(const GpuId&) const = default;
};

struct ClusterSpec {
  std::int32_t nodes = 1;
  std::int32_t gpus_per_node = 1;

  std::int32_t total_gpus() const { return nodes * gpus_per_node; }
  GpuId gpu_at(std::int32_t slot) const {
    return {slot / gpus_per_node, slot % gpus_per_node};
  }
  std::int32_t slot_of(GpuId id) const {
    return id.node * gpus_per_node + id.device;
  }
};

enum class JobStatus { Waiting, Running, Completed };

const char* to_string(JobStatus s);

// Speed model parameters. peak/half_batch/comm_penalty come from the trace
// per job; intra_node_discount scales the penalty for co-located workers.
struct ThroughputModelParams {
  double per_gpu_peak = 1000.0;    // samples/s at saturating local batch
  double half_batch = 128.0;       // local batch where per-GPU speed is peak/2
  double comm_penalty = 0.1;       // gamma, per extra worker; must stay < 1
  double intra_node_discount = 0.5;
};

// Shape of the synthetic loss curve: loss = loss_init * exp(-k * progress),
// with multiplicative noise of amplitude `noise` applied per epoch.
struct CurveParams {
  double k = 4.0;
  double noise = 0.0;
};

struct JobSpec {
  JobId id = kNoJob;
  double arrival_time = 0.0;
  std::int64_t epoch_size = 1;       // samples per epoch
  std::int64_t total_workload = 1;   // samples to convergence; simulator-only ground truth
  std::int64_t initial_batch = 1;
  double initial_lr = 0.1;
  std::int64_t max_local_batch = 1;  // memory cap per GPU
  double loss_init = 1.0;
  std::string template_name;
  ThroughputModelParams tput;
  CurveParams curve;
};

// One per-epoch observation reported by a job's workers. Feeds the progress
// predictor once the job completes.
struct ProgressCheckpoint {
  double time = 0.0;
  double processed = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct JobRuntime {
  JobStatus status = JobStatus::Waiting;
  std::int64_t global_batch = 0;  // B, 0 while waiting
  std::int32_t gpu_count = 0;     // c, 0 while waiting
  std::int64_t batch_limit = 0;   // R
  double processed = 0.0;         // samples done
  double executed_time = 0.0;     // seconds in Running
  std::int64_t epochs_completed = 0;
  double current_loss = 0.0;
  double current_accuracy = 0.0;
  double current_lr = 0.0;
  double submit_time = 0.0;
  double start_time = -1.0;   // <0 until first start
  double finish_time = -1.0;  // <0 until completion

  // simulator bookkeeping
  std::int32_t prev_gpu_count = 1;  // c held before the last preemption
  bool rejected_since_preempt = false;
  double waiting_time = 0.0;
  double attained_gpu_seconds = 0.0;
  double overhead_seconds = 0.0;  // scaling overhead folded into execution
  std::int32_t reconfig_count = 0;
  std::int32_t preemptions = 0;
  std::vector<ProgressCheckpoint> checkpoints;

  bool started() const { return start_time >= 0.0; }
};

struct Job {
  JobSpec spec;
  JobRuntime rt;
};

// Ordered by JobId, which is issued monotonically in arrival order, so
// iteration order doubles as the deterministic tie-break everywhere.
using JobTable = std::map<JobId, Job>;

struct GenomeSlot {
  JobId job = kNoJob;
  std::int64_t local_batch = 0;

  bool idle() const { return job == kNoJob; }
  bool operator==(const GenomeSlot&) const = default;
};

// A candidate schedule: one (job, local batch) assignment per GPU slot.
struct Genome {
  std::vector<GenomeSlot> slots;

  Genome() = default;
  explicit Genome(std::size_t n_slots) : slots(n_slots) {}

  std::size_t size() const { return slots.size(); }
  GenomeSlot& operator[](std::size_t i) { return slots[i]; }
  const GenomeSlot& operator[](std::size_t i) const { return slots[i]; }
  bool operator==(const Genome&) const = default;
};

// B_j: sum of local batches over the job's slots; 0 if absent.
std::int64_t global_batch_of(const Genome& g, JobId job);

// c_j: number of slots assigned to the job.
std::int32_t gpu_count_of(const Genome& g, JobId job);

std::vector<std::int32_t> slots_of(const Genome& g, JobId job);
std::vector<std::int32_t> idle_slots(const Genome& g);
void clear_job(Genome& g, JobId job);

// Sets the job's allocation over `slots` to sum to `target_batch`, split
// near-equally with the remainder on the lowest-ordered slots. Slots beyond
// what target_batch can feed (>=1 sample each) are released. Returns the
// global batch actually assigned.
std::int64_t set_job_allocation(Genome& g, JobId job,
                                std::span<const std::int32_t> slots,
                                std::int64_t target_batch,
                                std::int64_t max_local_batch);

struct Violation {
  std::int32_t slot = -1;  // -1 when not slot-specific
  std::string reason;
};

// First violation of the genome invariants (unknown job, malformed slot,
// local batch over the memory cap, global batch over R_j), or nullopt.
std::optional<Violation> validate(const Genome& g, const JobTable& jobs);

// Debug/fixture text form: one `node,device,job|-,local_batch` line per slot.
std::string genome_to_text(const Genome& g, const ClusterSpec& cluster);

// Parses the text form; throws std::runtime_error with a line number on
// malformed rows, duplicate or missing slots.
Genome genome_from_text(const std::string& text, const ClusterSpec& cluster);

}  // namespace ones
