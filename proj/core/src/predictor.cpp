#include "ones/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ones {
namespace {

constexpr double kRhoEps = 1e-6;

// Digamma via upward recurrence into the asymptotic range.
double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x;
  double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
  return result;
}

double log_beta_pdf(double p, double alpha, double beta) {
  return (alpha - 1.0) * std::log(p) + (beta - 1.0) * std::log1p(-p) -
         (std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta));
}

// Smooth stand-in for max(z, 1) used while fitting.
double softplus1(double z) {
  double u = z - 1.0;
  if (u > 30.0) return z;
  if (u < -30.0) return 1.0 + std::exp(u);
  return 1.0 + std::log1p(std::exp(u));
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  double e = std::exp(u);
  return e / (1.0 + e);
}

}  // namespace

PredictorFeatures features_of(const Job& job) {
  const auto& s = job.spec;
  const auto& rt = job.rt;
  double r_loss =
      s.loss_init > 0.0 ? 1.0 - rt.current_loss / s.loss_init : 0.0;
  return {static_cast<double>(s.epoch_size), s.loss_init, rt.processed, r_loss,
          rt.current_accuracy};
}

PredictorFeatures features_at(const JobSpec& spec, const ProgressCheckpoint& c) {
  double r_loss = spec.loss_init > 0.0 ? 1.0 - c.loss / spec.loss_init : 0.0;
  return {static_cast<double>(spec.epoch_size), spec.loss_init, c.processed,
          r_loss, c.accuracy};
}

double alpha_of(const PredictorFeatures& x) {
  return std::max(x.processed / std::max(x.epoch_size, 1.0), 1.0);
}

double remaining_workload(double processed, double rho) {
  if (!(rho > 0.0 && rho < 1.0))
    throw std::invalid_argument("remaining_workload: rho outside (0,1)");
  return processed * (1.0 / rho - 1.0);
}

double remaining_time(double workload, double throughput) {
  if (!(throughput > 0.0))
    throw std::invalid_argument("remaining_time: nonpositive throughput");
  return workload / throughput;
}

double sample_progress(const BetaParams& params, Rng& rng) {
  std::gamma_distribution<double> ga(params.alpha, 1.0);
  std::gamma_distribution<double> gb(params.beta, 1.0);
  double a = ga(rng);
  double b = gb(rng);
  double rho = (a + b > 0.0) ? a / (a + b) : 0.5;
  return std::clamp(rho, kRhoEps, 1.0 - kRhoEps);
}

void ProgressModel::set_params(
    const std::array<double, kNumPredictorFeatures>& weights, double bias) {
  weights_ = weights;
  bias_ = bias;
  feat_mean_ = {};
  feat_spread_ = {1, 1, 1, 1, 1};
  has_params_ = true;
}

double ProgressModel::raw_response(const PredictorFeatures& x) const {
  auto raw = x.as_array();
  double z = bias_;
  for (std::size_t i = 0; i < kNumPredictorFeatures; ++i)
    z += weights_[i] * (raw[i] - feat_mean_[i]) / feat_spread_[i];
  return z;
}

double ProgressModel::beta_of(const PredictorFeatures& x) const {
  if (!has_params_) return std::max(cfg_.default_beta, 1.0);
  return std::max(raw_response(x), 1.0);
}

BetaParams ProgressModel::predict(const PredictorFeatures& x) const {
  return {alpha_of(x), beta_of(x)};
}

void ProgressModel::record_completion(const JobSpec& spec,
                                      std::span<const ProgressCheckpoint> log,
                                      double y_total) {
  if (y_total <= 0.0) return;
  std::vector<ProgressSample> usable;
  usable.reserve(log.size());
  for (const auto& c : log) {
    double progress = c.processed / y_total;
    if (progress <= 0.0 || progress >= 1.0) continue;
    usable.push_back({features_at(spec, c), progress});
  }
  if (usable.size() < 2) return;

  std::size_t quota = std::min(cfg_.per_job_quota, usable.size());
  for (std::size_t i = 0; i < quota; ++i) {
    // evenly spaced over the log, endpoints included
    std::size_t idx =
        quota == 1 ? 0 : i * (usable.size() - 1) / (quota - 1);
    buffer_.push_back(usable[idx]);
  }
  while (buffer_.size() > cfg_.buffer_cap) buffer_.pop_front();
}

void ProgressModel::add_sample(const ProgressSample& sample) {
  buffer_.push_back(sample);
  while (buffer_.size() > cfg_.buffer_cap) buffer_.pop_front();
}

FitResult ProgressModel::fit() {
  FitResult res;
  if (buffer_.empty()) return res;
  res.ran = true;

  const std::size_t n = buffer_.size();

  // Refresh feature standardization from the buffer.
  std::array<double, kNumPredictorFeatures> mean{};
  std::array<double, kNumPredictorFeatures> spread{};
  for (const auto& s : buffer_) {
    auto raw = s.features.as_array();
    for (std::size_t i = 0; i < kNumPredictorFeatures; ++i) mean[i] += raw[i];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto& s : buffer_) {
    auto raw = s.features.as_array();
    for (std::size_t i = 0; i < kNumPredictorFeatures; ++i) {
      double d = raw[i] - mean[i];
      spread[i] += d * d;
    }
  }
  for (auto& v : spread) {
    v = std::sqrt(v / static_cast<double>(n));
    if (v < 1e-12) v = 1.0;
  }

  // Precompute standardized features and fixed alphas.
  std::vector<std::array<double, kNumPredictorFeatures>> xs(n);
  std::vector<double> alphas(n), progress(n);
  {
    std::size_t k = 0;
    for (const auto& s : buffer_) {
      auto raw = s.features.as_array();
      for (std::size_t i = 0; i < kNumPredictorFeatures; ++i)
        xs[k][i] = (raw[i] - mean[i]) / spread[i];
      alphas[k] = alpha_of(s.features);
      progress[k] = s.progress;
      ++k;
    }
  }

  auto mean_ll = [&](const std::array<double, kNumPredictorFeatures>& w,
                     double b) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double z = b;
      for (std::size_t i = 0; i < kNumPredictorFeatures; ++i)
        z += w[i] * xs[k][i];
      total += log_beta_pdf(progress[k], alphas[k], softplus1(z));
    }
    return total / static_cast<double>(n);
  };

  // Carry the previous parameters over as the starting point, re-expressed
  // in the new standardization so the response is unchanged.
  std::array<double, kNumPredictorFeatures> w{};
  double b = has_params_ ? bias_ : cfg_.default_beta;
  if (has_params_) {
    for (std::size_t i = 0; i < kNumPredictorFeatures; ++i) {
      w[i] = weights_[i] * spread[i] / feat_spread_[i];
      b += weights_[i] * (mean[i] - feat_mean_[i]) / feat_spread_[i];
    }
  }

  double ll = mean_ll(w, b);
  res.ll_before = ll;
  if (!std::isfinite(ll)) {
    // Bad starting point (should not happen with progress in (0,1)); reset.
    w = {};
    b = cfg_.default_beta;
    ll = mean_ll(w, b);
  }

  double step = cfg_.fit_step;
  int steps = 0;
  while (steps < cfg_.fit_max_steps) {
    ++steps;
    std::array<double, kNumPredictorFeatures> grad_w{};
    double grad_b = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double z = b;
      for (std::size_t i = 0; i < kNumPredictorFeatures; ++i)
        z += w[i] * xs[k][i];
      double beta = softplus1(z);
      double dll_dbeta = std::log1p(-progress[k]) - digamma(beta) +
                         digamma(alphas[k] + beta);
      double g = dll_dbeta * sigmoid(z - 1.0) / static_cast<double>(n);
      for (std::size_t i = 0; i < kNumPredictorFeatures; ++i)
        grad_w[i] += g * xs[k][i];
      grad_b += g;
    }

    // Accept a step only if it improves the likelihood; otherwise back off.
    bool accepted = false;
    for (int back = 0; back < 25; ++back) {
      std::array<double, kNumPredictorFeatures> w_try = w;
      for (std::size_t i = 0; i < kNumPredictorFeatures; ++i)
        w_try[i] += step * grad_w[i];
      double b_try = b + step * grad_b;
      double ll_try = mean_ll(w_try, b_try);
      if (std::isfinite(ll_try) && ll_try > ll) {
        double rel = (ll_try - ll) / (std::abs(ll) + 1e-12);
        w = w_try;
        b = b_try;
        ll = ll_try;
        accepted = true;
        step = std::min(step * 1.5, 1.0);
        if (rel < cfg_.fit_tol) steps = cfg_.fit_max_steps;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }

  res.steps = steps;
  res.ll_after = ll;
  if (!std::isfinite(ll) || ll < res.ll_before) {
    res.accepted = false;  // keep the previous parameters
    return res;
  }
  weights_ = w;
  bias_ = b;
  feat_mean_ = mean;
  feat_spread_ = spread;
  has_params_ = true;
  return res;
}

void ProgressModel::dump(std::ostream& out) const {
  out << "fitted " << (has_params_ ? 1 : 0) << "\n";
  out << "weights";
  for (double w : weights_) out << " " << w;
  out << "\nbias " << bias_ << "\nfeature_mean";
  for (double m : feat_mean_) out << " " << m;
  out << "\nfeature_spread";
  for (double s : feat_spread_) out << " " << s;
  out << "\nbuffer_size " << buffer_.size() << "\n";
}

}  // namespace ones
