#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ones/domain.hpp"
#include "ones/evolution.hpp"
#include "ones/predictor.hpp"
#include "ones/throughput.hpp"

namespace ones {

enum class SchedulerKind { Ones, FifoFixed, LasTiresias, SrptGreedy };

const char* to_string(SchedulerKind k);
std::optional<SchedulerKind> parse_scheduler_kind(const std::string& name);

// Snapshot handed to a policy on a scheduler wake.
struct SchedulerContext {
  const ClusterSpec& cluster;
  const JobTable& jobs;
  double now;
  const Genome& deployed;
  const std::vector<JobId>& new_jobs;  // arrivals not yet granted a slot
};

class SchedulerPolicy {
 public:
  virtual ~SchedulerPolicy() = default;
  virtual const char* name() const = 0;

  // Whether this wake should produce a fresh deployment.
  virtual bool ready(const SchedulerContext& ctx) = 0;
  virtual Genome schedule(const SchedulerContext& ctx) = 0;
  virtual void job_completed(const Job& job) { (void)job; }

  // Self-scheduled wake for interval policies, nullopt otherwise.
  virtual std::optional<double> next_wake(double now) const {
    (void)now;
    return std::nullopt;
  }

  // Elastic policies drive the batch-limit machinery and pay the cheaper
  // scaling overhead.
  virtual bool elastic() const { return false; }
};

// The online evolutionary policy: persists its population and progress
// model across wakes, evolving a fixed number of generations per deployment.
class OnesScheduler : public SchedulerPolicy {
 public:
  OnesScheduler(const ClusterSpec& cluster, EvolutionConfig evolution,
                PredictorConfig predictor, std::uint64_t seed);

  const char* name() const override { return "ones"; }
  bool ready(const SchedulerContext& ctx) override;
  Genome schedule(const SchedulerContext& ctx) override;
  void job_completed(const Job& job) override;
  bool elastic() const override { return true; }

  const ProgressModel& model() const { return model_; }
  const Population& population() const { return population_; }
  void set_evolution_log(std::ostream* out) { evolution_log_ = out; }

 private:
  ClusterSpec cluster_;
  EvolutionConfig cfg_;
  ProgressModel model_;
  Population population_;
  bool initialized_ = false;
  std::map<JobId, std::int64_t> last_deploy_epochs_;
  std::uint64_t seed_;
  std::uint64_t round_ = 0;
  std::ostream* evolution_log_ = nullptr;
};

}  // namespace ones
