#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ones/domain.hpp"

namespace ones {

struct TraceFile {
  ClusterSpec cluster{16, 4};
  std::uint64_t seed = 0;
  double lambda = 0.0;  // arrivals per second
  std::vector<JobSpec> jobs;

  bool operator==(const TraceFile&) const;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

// One workload family; jobs draw their parameters uniformly from the ranges.
struct JobTemplate {
  std::string name;
  IntRange epoch_size;
  Range workload_epochs;  // total workload = epochs * epoch size
  IntRange initial_batch;
  std::int64_t max_local_batch = 512;
  Range initial_lr{0.01, 0.1};
  Range peak;        // per-GPU samples/s
  Range half_batch;  // saturation knee
  Range gamma{0.05, 0.15};
  Range curve_k{2.0, 6.0};
  Range noise{0.0, 0.03};
};

// The built-in job mix: CV and NLP families with desk-scale sizes.
const std::vector<JobTemplate>& default_templates();

// Poisson arrivals (exponential gaps at rate lambda), each job drawn from a
// uniformly chosen template. Pure function of (templates, n_jobs, lambda,
// seed).
TraceFile generate(const std::vector<JobTemplate>& templates, std::int64_t n_jobs,
                   double lambda, std::uint64_t seed);

void save(const TraceFile& trace, std::ostream& out);
void save_file(const TraceFile& trace, const std::string& path);

// Strict parser: unknown columns, bad values and unsorted arrivals are
// rejected with the offending line number.
TraceFile load(std::istream& in);
TraceFile load_file(const std::string& path);

// GPU-time histogram of the trace at the single-GPU starting configuration;
// used to eyeball the job-mix distribution.
std::string gpu_time_histogram(const TraceFile& trace, int buckets = 10);

}  // namespace ones
