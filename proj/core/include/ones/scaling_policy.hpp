#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ones/domain.hpp"

namespace ones {

struct PolicyConfig {
  double sigma = 0.0;       // fixed penalty rate; ignored when sigma_auto
  bool sigma_auto = true;   // bind sigma to the running arrival-rate estimate
  std::int64_t warmup_epochs = 1;  // epochs before the limit may grow
};

enum class ScalingReason { Start, ResumeRejected, ScaleUp, ScaleDown, Deploy };

const char* to_string(ScalingReason r);

// Audit record for one deployed batch change.
struct ScalingStep {
  double time = 0.0;
  JobId job = kNoJob;
  ScalingReason reason = ScalingReason::Deploy;
  std::int64_t old_batch = 0;
  std::int64_t new_batch = 0;
  double old_lr = 0.0;
  double new_lr = 0.0;
};

// R on arrival: the batch must fit a single GPU until warm-up is done.
std::int64_t limit_on_start(const JobSpec& spec);

// Halve the limit each time a waiting job stays out of the deployed schedule.
std::int64_t limit_on_resume_rejected(std::int64_t limit);

// Double the limit after a completed epoch, capped by cluster feasibility.
std::int64_t limit_on_epoch(std::int64_t limit, std::int64_t cluster_cap);

// Convoy-effect penalty: R' = ceil(2R / ceil(sigma * t_processed + 1)).
std::int64_t limit_on_scale_down(std::int64_t limit, double t_processed,
                                 double sigma);

// Epoch-boundary update: scale-up first, then the penalty applied to the
// doubled limit. Young jobs (sigma * t <= 1) come out exactly doubled.
std::int64_t limit_on_epoch_boundary(std::int64_t limit, double t_processed,
                                     double sigma, std::int64_t cluster_cap);

double scaled_learning_rate(double lr0, std::int64_t batch0,
                            std::int64_t batch_new);

// EMA of the arrival rate with a half-life of 20 arrivals; sigma = lambda.
class ArrivalRateEstimator {
 public:
  void observe_arrival(double time);
  double rate() const { return rate_; }
  bool has_estimate() const { return count_ >= 2; }

 private:
  double last_arrival_ = 0.0;
  double mean_gap_ = 0.0;
  double rate_ = 0.0;
  std::int64_t count_ = 0;
};

// One ScalingStep per job whose deployed batch differs from its current one;
// learning rates follow linear scaling anchored at the submitted pair.
std::vector<ScalingStep> collect_scaling_steps(const JobTable& jobs,
                                               const Genome& deployed,
                                               double now);

// Deployment-time pass: halves R for rejected previously-preempted waiters
// and emits one ScalingStep per job whose deployed batch changed. Mutates
// only batch_limit / rejected_since_preempt; the simulator owns the rest of
// the runtime transition.
std::vector<ScalingStep> apply_policies(JobTable& jobs, const Genome& deployed,
                                        double now, const PolicyConfig& config);

void write_audit_header(std::ostream& out);
void write_audit_line(std::ostream& out, const ScalingStep& step);

}  // namespace ones
