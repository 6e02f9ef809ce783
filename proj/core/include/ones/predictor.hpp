#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <iosfwd>
#include <random>
#include <span>

#include "ones/domain.hpp"
#include "ones/rng.hpp"

namespace ones {

inline constexpr std::size_t kNumPredictorFeatures = 5;

// Per-job inputs of the progress regression: epoch size, initial loss,
// processed samples, loss improvement ratio and validation accuracy.
struct PredictorFeatures {
  double epoch_size = 1.0;
  double loss_init = 1.0;
  double processed = 0.0;
  double loss_improvement = 0.0;  // 1 - current loss / initial loss
  double accuracy = 0.0;

  std::array<double, kNumPredictorFeatures> as_array() const {
    return {epoch_size, loss_init, processed, loss_improvement, accuracy};
  }
};

PredictorFeatures features_of(const Job& job);
PredictorFeatures features_at(const JobSpec& spec, const ProgressCheckpoint& c);

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;

  double mean() const { return alpha / (alpha + beta); }
};

struct ProgressSample {
  PredictorFeatures features;
  double progress = 0.5;  // true completed fraction, strictly in (0,1)
};

struct PredictorConfig {
  std::size_t buffer_cap = 2048;
  std::size_t per_job_quota = 32;
  double default_beta = 4.0;  // used until the first fit
  int fit_max_steps = 200;
  double fit_step = 1e-2;
  double fit_tol = 1e-6;
};

struct FitResult {
  bool ran = false;       // false when the buffer was empty
  bool accepted = true;   // false when reverted on a non-finite likelihood
  int steps = 0;
  double ll_before = 0.0;
  double ll_after = 0.0;
};

// The number of epochs already processed; floored at 1.
double alpha_of(const PredictorFeatures& x);

// processed * (1/rho - 1); rho must lie strictly in (0,1).
double remaining_workload(double processed, double rho);

// workload / throughput; throughput must be positive.
double remaining_time(double workload, double throughput);

// One draw from Be(alpha, beta), clamped to [1e-6, 1 - 1e-6].
double sample_progress(const BetaParams& params, Rng& rng);

// Online regression for the second Beta shape parameter: at inference
// beta = max(w . standardized(x) + b, 1), refit by maximum Beta likelihood
// over a bounded buffer each time a job completes. The hard max is smoothed
// to 1 + softplus(z - 1) during the gradient ascent only.
class ProgressModel {
 public:
  ProgressModel() = default;
  explicit ProgressModel(PredictorConfig cfg) : cfg_(cfg) {}

  bool has_params() const { return has_params_; }
  void set_params(const std::array<double, kNumPredictorFeatures>& weights,
                  double bias);

  double beta_of(const PredictorFeatures& x) const;
  BetaParams predict(const PredictorFeatures& x) const;

  // Subsamples a completed job's checkpoint log (evenly, up to the per-job
  // quota) into the training buffer; logs with fewer than 2 usable points
  // are skipped. y_total is the workload observed at completion.
  void record_completion(const JobSpec& spec,
                         std::span<const ProgressCheckpoint> log,
                         double y_total);

  // Direct buffer append (synthetic data, fixtures); same FIFO cap.
  void add_sample(const ProgressSample& sample);

  FitResult fit();

  const std::deque<ProgressSample>& buffer() const { return buffer_; }
  const PredictorConfig& config() const { return cfg_; }
  void dump(std::ostream& out) const;

 private:
  double raw_response(const PredictorFeatures& x) const;

  PredictorConfig cfg_;
  std::array<double, kNumPredictorFeatures> weights_{};
  double bias_ = 0.0;
  std::array<double, kNumPredictorFeatures> feat_mean_{};
  std::array<double, kNumPredictorFeatures> feat_spread_{1, 1, 1, 1, 1};
  bool has_params_ = false;
  std::deque<ProgressSample> buffer_;
};

}  // namespace ones
