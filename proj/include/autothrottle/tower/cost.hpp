#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "autothrottle/errors.hpp"

namespace autothrottle::tower {

enum class ModelKind { kLinear, kNeural };

enum class ContextEncoding { kOneHot, kScalar, kBoth };

// Label used for each training draw: the group median, or a raw cost drawn
// from the group (fits group means; kept for the denoising comparison).
enum class LabelMode { kGroupMedian, kRawSample };

struct TowerParams {
  double step_seconds = 60.0;
  double epsilon = 0.10;
  int exploration_stage_steps = 360;
  int exploration_hold_steps = 2;
  int training_samples_per_update = 10000;
  double slo_ms = 200.0;
  double slo_percentile = 0.99;
  double alloc_norm_max_cores = 160.0;
  double latency_norm_max_ms = 1000.0;
  double bin_size = 20.0;
  ContextEncoding encoding = ContextEncoding::kOneHot;
  // Scalar context feature is bin * bin_size / context_scale_rps.
  double context_scale_rps = 1000.0;
  ModelKind model = ModelKind::kLinear;
  int hidden_units = 3;
  double learning_rate = 0.5;
  LabelMode label_mode = LabelMode::kGroupMedian;
  std::uint64_t seed = 7;

  void validate() const {
    if (!(step_seconds > 0.0)) throw ConfigError("tower.step_seconds: must be > 0");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("tower.epsilon: must be in [0, 1]");
    if (exploration_stage_steps < 0) throw ConfigError("tower.exploration_stage_steps: must be >= 0");
    if (exploration_hold_steps < 1) throw ConfigError("tower.exploration_hold_steps: must be >= 1");
    if (training_samples_per_update < 0) throw ConfigError("tower.training_samples_per_update: must be >= 0");
    if (!(slo_ms > 0.0)) throw ConfigError("tower.slo_ms: must be > 0");
    if (!(slo_percentile > 0.0 && slo_percentile < 1.0)) throw ConfigError("tower.slo_percentile: must be in (0, 1)");
    if (!(alloc_norm_max_cores > 0.0)) throw ConfigError("tower.alloc_norm_max_cores: must be > 0");
    if (!(latency_norm_max_ms > slo_ms)) throw ConfigError("tower.latency_norm_max_ms: must exceed slo_ms");
    if (!(bin_size > 0.0)) throw ConfigError("tower.bin_size: must be > 0");
    if (!(context_scale_rps > 0.0)) throw ConfigError("tower.context_scale_rps: must be > 0");
    if (hidden_units < 1) throw ConfigError("tower.hidden_units: must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("tower.learning_rate: must be > 0");
  }
};

// SLO-met steps cost their normalized allocation in [0, 1]; violations cost
// their normalized tail latency in [2, 3]. The ranges never overlap.
inline double compute_cost(bool slo_met, double total_alloc_cores, double tail_latency_ms, const TowerParams& p) {
  if (slo_met) return std::clamp(total_alloc_cores / p.alloc_norm_max_cores, 0.0, 1.0);
  return 2.0 + std::clamp((tail_latency_ms - p.slo_ms) / (p.latency_norm_max_ms - p.slo_ms), 0.0, 1.0);
}

}  // namespace autothrottle::tower
