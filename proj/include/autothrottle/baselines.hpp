#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "autothrottle/captain.hpp"
#include "autothrottle/errors.hpp"

namespace autothrottle::baselines {

// Kubernetes-style CPU autoscaler: every m seconds, candidate = usage / theta;
// the limit is the largest candidate from the last s seconds.
struct K8sParams {
  double measure_interval_s = 15.0;
  double lookback_s = 300.0;
  double utilization_threshold = 0.5;

  static K8sParams standard(double threshold) { return {15.0, 300.0, threshold}; }
  static K8sParams fast(double threshold) { return {1.0, 20.0, threshold}; }

  void validate() const {
    if (!(measure_interval_s > 0.0)) throw ConfigError("k8s.measure_interval_s: must be > 0");
    if (!(lookback_s >= measure_interval_s)) throw ConfigError("k8s.lookback_s: must be >= measure_interval_s");
    if (!(utilization_threshold > 0.0 && utilization_threshold <= 1.0))
      throw ConfigError("k8s.utilization_threshold: must be in (0, 1]");
  }

  std::size_t ring_length() const {
    return static_cast<std::size_t>(std::llround(std::floor(lookback_s / measure_interval_s + 1e-9)));
  }
};

class K8sAutoscaler {
 public:
  K8sAutoscaler(K8sParams params, captain::QuotaBounds bounds) : params_(params), bounds_(bounds) {
    params_.validate();
  }

  const K8sParams& params() const noexcept { return params_; }
  const std::deque<double>& candidates() const noexcept { return ring_; }

  // Called every m seconds with the mean usage (cores) over those m seconds.
  double step(double usage_cores_avg) {
    if (!std::isfinite(usage_cores_avg) || usage_cores_avg < 0.0)
      throw std::invalid_argument("k8s step: usage must be finite and >= 0");
    ring_.push_back(usage_cores_avg / params_.utilization_threshold);
    while (ring_.size() > params_.ring_length()) ring_.pop_front();
    return bounds_.clamp(*std::max_element(ring_.begin(), ring_.end()));
  }

 private:
  K8sParams params_;
  captain::QuotaBounds bounds_;
  std::deque<double> ring_;
};

// Fixed allocation for the whole run.
class StaticAllocation {
 public:
  StaticAllocation(double cores, captain::QuotaBounds bounds) : quota_(bounds.clamp(cores)) {
    if (!std::isfinite(cores) || cores < 0.0) throw std::invalid_argument("static allocation must be finite and >= 0");
  }
  double quota() const noexcept { return quota_; }

 private:
  double quota_;
};

}  // namespace autothrottle::baselines
