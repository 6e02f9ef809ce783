#include "ones/traces.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ones/rng.hpp"
#include "ones/throughput.hpp"

namespace ones {
namespace {

constexpr const char* kColumns =
    "arrival,template,epoch_size,total_workload,init_batch,init_lr,"
    "max_local_batch,peak,half_batch,gamma,curve_k,noise";

double uniform_in(Range r, Rng& rng) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

std::int64_t uniform_in(IntRange r, Rng& rng) {
  return std::uniform_int_distribution<std::int64_t>(r.lo, r.hi)(rng);
}

}  // namespace

bool TraceFile::operator==(const TraceFile& other) const {
  if (cluster.nodes != other.cluster.nodes ||
      cluster.gpus_per_node != other.cluster.gpus_per_node ||
      seed != other.seed || lambda != other.lambda ||
      jobs.size() != other.jobs.size())
    return false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& a = jobs[i];
    const auto& b = other.jobs[i];
    if (a.id != b.id || a.arrival_time != b.arrival_time ||
        a.epoch_size != b.epoch_size || a.total_workload != b.total_workload ||
        a.initial_batch != b.initial_batch || a.initial_lr != b.initial_lr ||
        a.max_local_batch != b.max_local_batch ||
        a.template_name != b.template_name ||
        a.tput.per_gpu_peak != b.tput.per_gpu_peak ||
        a.tput.half_batch != b.tput.half_batch ||
        a.tput.comm_penalty != b.tput.comm_penalty ||
        a.curve.k != b.curve.k || a.curve.noise != b.curve.noise)
      return false;
  }
  return true;
}

const std::vector<JobTemplate>& default_templates() {
  static const std::vector<JobTemplate> templates = [] {
    std::vector<JobTemplate> t;
    auto add = [&](std::string name, IntRange epoch, Range epochs, IntRange batch,
                   std::int64_t max_local, Range peak, Range half) {
      JobTemplate jt;
      jt.name = std::move(name);
      jt.epoch_size = epoch;
      jt.workload_epochs = epochs;
      jt.initial_batch = batch;
      jt.max_local_batch = max_local;
      jt.peak = peak;
      jt.half_batch = half;
      t.push_back(std::move(jt));
    };
    // CV on the large image set: heavier per-sample cost
    add("alexnet_imagenet", {10000, 20000}, {10, 40}, {128, 256}, 512,
        {1500, 3000}, {16, 48});
    add("resnet50_imagenet", {10000, 20000}, {10, 40}, {64, 256}, 256,
        {400, 800}, {8, 32});
    add("vgg16_imagenet", {10000, 20000}, {10, 30}, {64, 128}, 256, {300, 600},
        {8, 32});
    add("inceptionv3_imagenet", {10000, 20000}, {10, 30}, {64, 128}, 256,
        {350, 700}, {8, 32});
    // CV on the small image set: fast epochs
    add("resnet18_cifar10", {20000, 40000}, {20, 60}, {128, 256}, 512,
        {2000, 4000}, {16, 48});
    add("vgg16_cifar10", {20000, 40000}, {20, 60}, {128, 256}, 512,
        {1500, 3000}, {16, 48});
    add("googlenet_cifar10", {20000, 40000}, {20, 50}, {128, 256}, 512,
        {1200, 2500}, {16, 48});
    // NLP fine-tuning: small epochs, small batches
    add("bert_cola", {5000, 8000}, {6, 20}, {16, 32}, 64, {150, 300}, {2, 8});
    add("bert_mrpc", {3600, 3600}, {6, 20}, {16, 32}, 64, {150, 300}, {2, 8});
    add("bert_sst2", {10000, 20000}, {6, 20}, {16, 32}, 64, {150, 300},
        {2, 8});
    return t;
  }();
  return templates;
}

TraceFile generate(const std::vector<JobTemplate>& templates, std::int64_t n_jobs,
                   double lambda, std::uint64_t seed) {
  if (n_jobs < 1) throw std::invalid_argument("generate: n_jobs must be >= 1");
  if (!(lambda > 0.0)) throw std::invalid_argument("generate: lambda must be > 0");
  if (templates.empty())
    throw std::invalid_argument("generate: no templates");

  TraceFile trace;
  trace.seed = seed;
  trace.lambda = lambda;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_template(0, templates.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double t = 0.0;
  for (std::int64_t i = 0; i < n_jobs; ++i) {
    // exponential inter-arrival gap, inverse-CDF on a plain uniform draw
    double u = unit(rng);
    t += -std::log1p(-u) / lambda;

    const auto& jt = templates[pick_template(rng)];
    JobSpec spec;
    spec.id = static_cast<JobId>(i);
    spec.arrival_time = t;
    spec.template_name = jt.name;
    spec.epoch_size = uniform_in(jt.epoch_size, rng);
    double epochs = uniform_in(jt.workload_epochs, rng);
    spec.total_workload = std::max<std::int64_t>(
        static_cast<std::int64_t>(std::llround(
            epochs * static_cast<double>(spec.epoch_size))),
        spec.epoch_size);
    spec.max_local_batch = jt.max_local_batch;
    spec.initial_batch =
        std::min(uniform_in(jt.initial_batch, rng), spec.max_local_batch);
    spec.initial_lr = uniform_in(jt.initial_lr, rng);
    spec.loss_init = 1.0;
    spec.tput.per_gpu_peak = uniform_in(jt.peak, rng);
    spec.tput.half_batch = uniform_in(jt.half_batch, rng);
    spec.tput.comm_penalty = uniform_in(jt.gamma, rng);
    spec.curve.k = uniform_in(jt.curve_k, rng);
    spec.curve.noise = uniform_in(jt.noise, rng);
    trace.jobs.push_back(std::move(spec));
  }
  return trace;
}

void save(const TraceFile& trace, std::ostream& out) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "# nodes %d\n# gpus_per_node %d\n# seed %llu\n# lambda %.17g\n",
                trace.cluster.nodes, trace.cluster.gpus_per_node,
                static_cast<unsigned long long>(trace.seed), trace.lambda);
  out << buf << kColumns << "\n";
  for (const auto& j : trace.jobs) {
    std::snprintf(buf, sizeof buf,
                  "%.17g,%s,%lld,%lld,%lld,%.17g,%lld,%.17g,%.17g,%.17g,%.17g,"
                  "%.17g\n",
                  j.arrival_time, j.template_name.c_str(),
                  static_cast<long long>(j.epoch_size),
                  static_cast<long long>(j.total_workload),
                  static_cast<long long>(j.initial_batch), j.initial_lr,
                  static_cast<long long>(j.max_local_batch), j.tput.per_gpu_peak,
                  j.tput.half_batch, j.tput.comm_penalty, j.curve.k,
                  j.curve.noise);
    out << buf;
  }
}

void save_file(const TraceFile& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save(trace, out);
}

TraceFile load(std::istream& in) {
  TraceFile trace;
  trace.cluster = {0, 0};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  JobId next_id = 0;

  auto fail = [&](const std::string& what) {
    throw std::runtime_error("trace line " + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "nodes")
        hs >> trace.cluster.nodes;
      else if (key == "gpus_per_node")
        hs >> trace.cluster.gpus_per_node;
      else if (key == "seed")
        hs >> trace.seed;
      else if (key == "lambda")
        hs >> trace.lambda;
      else
        fail("unknown header key '" + key + "'");
      if (hs.fail()) fail("bad header value");
      continue;
    }
    if (!header_seen) {
      if (line != kColumns)
        fail("column header mismatch; expected '" + std::string(kColumns) + "'");
      header_seen = true;
      continue;
    }

    JobSpec spec;
    char name[128];
    long long epoch = 0, workload = 0, batch = 0, max_local = 0;
    int consumed =
        std::sscanf(line.c_str(), "%lg,%127[^,],%lld,%lld,%lld,%lg,%lld,%lg,%lg,%lg,%lg,%lg",
                    &spec.arrival_time, name, &epoch, &workload, &batch,
                    &spec.initial_lr, &max_local, &spec.tput.per_gpu_peak,
                    &spec.tput.half_batch, &spec.tput.comm_penalty,
                    &spec.curve.k, &spec.curve.noise);
    if (consumed != 12) fail("malformed row (parsed " + std::to_string(consumed) +
                             " of 12 fields)");
    if (std::count(line.begin(), line.end(), ',') != 11)
      fail("unexpected column count");
    spec.id = next_id++;
    spec.template_name = name;
    spec.epoch_size = epoch;
    spec.total_workload = workload;
    spec.initial_batch = batch;
    spec.max_local_batch = max_local;
    spec.loss_init = 1.0;

    if (spec.epoch_size < 1) fail("epoch_size must be >= 1");
    if (spec.total_workload < spec.epoch_size)
      fail("total_workload below epoch_size");
    if (spec.initial_batch < 1 || spec.initial_batch > spec.max_local_batch)
      fail("init_batch must be in [1, max_local_batch]");
    if (spec.arrival_time < 0.0) fail("negative arrival time");
    if (!trace.jobs.empty() && spec.arrival_time < trace.jobs.back().arrival_time)
      fail("arrival times must be nondecreasing");
    if (!(spec.tput.per_gpu_peak > 0.0) || !(spec.tput.half_batch > 0.0))
      fail("throughput parameters must be positive");
    if (!(spec.tput.comm_penalty > 0.0 && spec.tput.comm_penalty < 1.0))
      fail("gamma must lie in (0,1)");
    trace.jobs.push_back(std::move(spec));
  }
  if (!header_seen) {
    line_no = 0;
    fail("missing column header");
  }
  if (trace.cluster.nodes < 1 || trace.cluster.gpus_per_node < 1) {
    line_no = 0;
    fail("missing or invalid cluster header");
  }
  return trace;
}

TraceFile load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load(in);
}

std::string gpu_time_histogram(const TraceFile& trace, int buckets) {
  std::vector<double> gpu_time;
  for (const auto& j : trace.jobs) {
    double x = throughput_packed(j.tput, trace.cluster, j.initial_batch, 1);
    if (x > 0.0) gpu_time.push_back(static_cast<double>(j.total_workload) / x);
  }
  if (gpu_time.empty()) return "(empty trace)\n";
  std::sort(gpu_time.begin(), gpu_time.end());
  double lo = std::log10(gpu_time.front());
  double hi = std::log10(gpu_time.back() + 1.0);
  if (hi <= lo) hi = lo + 1.0;
  std::vector<int> counts(static_cast<std::size_t>(buckets), 0);
  for (double g : gpu_time) {
    auto b = static_cast<std::size_t>((std::log10(g) - lo) / (hi - lo) *
                                      buckets);
    counts[std::min(b, counts.size() - 1)]++;
  }
  std::string out = "single-GPU time distribution (log10 buckets, seconds)\n";
  char buf[128];
  for (int b = 0; b < buckets; ++b) {
    double left = std::pow(10.0, lo + (hi - lo) * b / buckets);
    double right = std::pow(10.0, lo + (hi - lo) * (b + 1) / buckets);
    std::snprintf(buf, sizeof buf, "%10.1f -%10.1f | %s (%d)\n", left, right,
                  std::string(static_cast<std::size_t>(counts[b]), '#').c_str(),
                  counts[b]);
    out += buf;
  }
  return out;
}

}  // namespace ones
