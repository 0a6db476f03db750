#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "autothrottle/errors.hpp"
#include "autothrottle/harness/config.hpp"
#include "autothrottle/harness/experiment.hpp"
#include "autothrottle/sim/stats.hpp"
#include "autothrottle/tower/actions.hpp"
#include "autothrottle/workload.hpp"

namespace autothrottle::harness {

// Mean CPU demand per service (cores) at a given RPS, from the call graph.
inline std::vector<double> expected_usage_cores(const sim::CompiledApp& app, const workload::Composition& mix,
                                                double rps) {
  std::vector<double> out(app.num_services(), 0.0);
  for (const auto& [name, frac] : mix) {
    const auto t = app.type_index(name);
    if (!t) continue;
    for (const auto& stage : app.stages(*t))
      for (const auto& v : stage) out[v.service] += rps * frac * v.demand_ms / 1000.0;
  }
  return out;
}

// ---- correlation -----------------------------------------------------------

struct CorrelationPoint {
  double quota_cores = 0.0;
  double tail_ms = 0.0;
  double throttles = 0.0;
  double utilization = 0.0;
};

struct CorrelationRow {
  std::string service;
  std::vector<CorrelationPoint> points;
  std::optional<double> r_throttle;  // nullopt: undefined (zero variance)
  std::optional<double> r_utilization;
  bool low_signal = false;
};

inline constexpr double kLowSignalR = 0.3;

inline CorrelationPoint correlation_point(const ExperimentConfig& base, std::size_t swept, double quota) {
  ExperimentConfig cfg = base;
  cfg.controller.kind = ControllerKind::kStatic;
  cfg.controller.static_cores.clear();
  for (std::size_t s = 0; s < cfg.application.services.size(); ++s) {
    const auto& spec = cfg.application.services[s];
    cfg.controller.static_cores[spec.id] = s == swept ? quota : spec.quota_max_cores;
  }
  Driver d(cfg);
  run_warmup(d, cfg.correlate.rps, cfg.correlate.warmup_s);
  const long n = periods_for(cfg.correlate.duration_s, cfg.sim.period_ms);
  std::vector<double> lat;
  double throttles = 0.0;
  double used_ms = 0.0;
  for (long p = 0; p < n; ++p) {
    const auto& r = d.tick(cfg.correlate.rps);
    for (const auto& c : r.completed) lat.push_back(c.latency_ms());
    if (r.services[swept].throttled) throttles += 1.0;
    used_ms += r.services[swept].served_ms;
  }
  CorrelationPoint pt;
  pt.quota_cores = d.cluster().quota(swept);
  pt.tail_ms = sim::percentile(lat, cfg.slo_percentile).value_or(0.0);
  pt.throttles = throttles;
  pt.utilization = used_ms / (pt.quota_cores * cfg.sim.period_ms * static_cast<double>(std::max<long>(n, 1)));
  return pt;
}

// Static quota sweep per service at fixed RPS, then Pearson of tail latency
// against throttle count and against CPU utilization.
inline std::vector<CorrelationRow> correlation_bench(const ExperimentConfig& cfg) {
  const auto& spec = cfg.correlate;
  if (spec.points < 2) throw ConfigError("correlate.points: need >= 2");
  if (spec.services.empty()) throw ConfigError("correlate.services: at least one service required");
  if (!(spec.rps >= 0.0)) throw ConfigError("correlate.rps: must be >= 0");
  if (!(spec.duration_s > 0.0)) throw ConfigError("correlate.duration_s: must be > 0");
  const sim::CompiledApp app(cfg.application);
  const auto usage = expected_usage_cores(app, cfg.composition, spec.rps);

  std::vector<CorrelationRow> out;
  for (const auto& id : spec.services) {
    const auto s = app.service_index(id);
    if (!s) throw ConfigError("correlate.services: unknown service '" + id + "'");
    const auto& svc = app.service(*s);
    double lo = spec.quota_lo.value_or(1.1 * usage[*s]);
    double hi = spec.quota_hi.value_or(std::max(4.0 * usage[*s], 2.0 * lo));
    lo = std::clamp(lo, svc.quota_min_cores, svc.quota_max_cores);
    hi = std::clamp(hi, lo, svc.quota_max_cores);

    CorrelationRow row;
    row.service = id;
    std::vector<double> lat, thr, util;
    for (int k = 0; k < spec.points; ++k) {
      const double q = lo + (hi - lo) * k / (spec.points - 1);
      const auto pt = correlation_point(cfg, *s, q);
      row.points.push_back(pt);
      lat.push_back(pt.tail_ms);
      thr.push_back(pt.throttles);
      util.push_back(pt.utilization);
    }
    row.r_throttle = sim::pearson(lat, thr);
    row.r_utilization = sim::pearson(lat, util);
    auto weak = [](const std::optional<double>& r) { return !r || std::abs(*r) < kLowSignalR; };
    row.low_signal = weak(row.r_throttle) && weak(row.r_utilization);
    out.push_back(std::move(row));
  }
  return out;
}

// ---- threshold sweep -------------------------------------------------------

struct SweepRow {
  double threshold = 0.0;
  double avg_alloc_cores = 0.0;
  int hours_violated = 0;
  bool feasible = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<std::size_t> best;  // nullopt: none feasible
};

// Lowest allocation among thresholds that met the SLO every hour; equal
// allocations go to the larger threshold.
inline std::optional<std::size_t> pick_best_threshold(const std::vector<SweepRow>& rows) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!rows[k].feasible) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& b = rows[*best];
    const auto& r = rows[k];
    if (r.avg_alloc_cores < b.avg_alloc_cores ||
        (r.avg_alloc_cores == b.avg_alloc_cores && r.threshold > b.threshold))
      best = k;
  }
  return best;
}

inline SweepResult threshold_sweep(const ExperimentConfig& cfg) {
  if (cfg.controller.kind != ControllerKind::kK8sCpu && cfg.controller.kind != ControllerKind::kK8sCpuFast)
    throw ConfigError("controller.kind: threshold sweep needs k8s-cpu or k8s-cpu-fast");
  if (cfg.sweep.thresholds.empty()) throw ConfigError("sweep.thresholds: empty");
  SweepResult out;
  for (double theta : cfg.sweep.thresholds) {
    ExperimentConfig c = cfg;
    c.controller.k8s.utilization_threshold = theta;
    c.controller.k8s.validate();
    const auto r = Experiment(c).run();
    out.rows.push_back({theta, r.avg_alloc_cores, r.hours_violated, r.slo_met_every_hour()});
  }
  out.best = pick_best_threshold(out.rows);
  return out;
}

// ---- fluctuation -----------------------------------------------------------

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

inline BoxStats box_stats(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("box_stats: empty input");
  BoxStats b;
  b.min = *std::min_element(v.begin(), v.end());
  b.max = *std::max_element(v.begin(), v.end());
  b.q1 = *sim::percentile(v, 0.25);
  b.median = *sim::median(v);
  b.q3 = *sim::percentile(v, 0.75);
  return b;
}

struct FluctuationRow {
  double range = 0.0;
  double half_range = 0.0;
  BoxStats p99;
  int windows_over_slo = 0;
  std::vector<double> window_p99;
};

struct TunedTargets {
  tower::ActionPair action{1, 1};
  double tail_ms = 0.0;
  double avg_alloc_cores = 0.0;
  bool feasible = false;
};

struct FluctuationResult {
  double target_high = 0.0;
  double target_low = 0.0;
  std::optional<TunedTargets> tuned;
  std::vector<FluctuationRow> rows;
};

// Fixed-target driver at base RPS: warm-up, freeze groups, apply targets,
// settle. Leaves the driver ready for the measured segment.
inline void prepare_fixed_targets(Driver& d, const ExperimentConfig& cfg, double high, double low) {
  const auto usage = run_warmup(d, cfg.fluctuation.base_rps, cfg.warmup_s);
  d.set_groups(tower::cluster_services(usage, 2, cfg.seed));
  d.set_targets(high, low);
  const long settle = periods_for(cfg.fluctuation.settle_s, cfg.sim.period_ms);
  for (long p = 0; p < settle; ++p) d.tick(cfg.fluctuation.base_rps);
}

inline ExperimentConfig fixed_targets_config(const ExperimentConfig& base, double high, double low) {
  ExperimentConfig c = base;
  c.controller.kind = ControllerKind::kFixedTargets;
  c.controller.target_high = high;
  c.controller.target_low = low;
  return c;
}

// Cheapest ladder pair meeting the SLO at constant base RPS; ties go to the
// larger pair.
inline TunedTargets tune_targets(const ExperimentConfig& cfg) {
  std::optional<TunedTargets> best;
  TunedTargets fallback;
  for (int idx = 0; idx < tower::kNumActions; ++idx) {
    const auto a = tower::ActionPair::from_index(idx);
    if (!cfg.controller.captain.supports_target(a.target_high()) ||
        !cfg.controller.captain.supports_target(a.target_low()))
      continue;
    const auto c = fixed_targets_config(cfg, a.target_high(), a.target_low());
    Driver d(c);
    prepare_fixed_targets(d, c, a.target_high(), a.target_low());
    Accumulator acc;
    const long n = periods_for(cfg.fluctuation.tune_duration_s, cfg.sim.period_ms);
    for (long p = 0; p < n; ++p) {
      const auto& r = d.tick(cfg.fluctuation.base_rps);
      acc.add(r, d.last_total_quota());
    }
    TunedTargets t{a, acc.tail_ms(cfg.slo_percentile).value_or(0.0), acc.avg_alloc_cores(), false};
    t.feasible = t.tail_ms <= cfg.slo_ms;
    if (idx == 0) fallback = t;
    if (!t.feasible) continue;
    if (!best || t.avg_alloc_cores < best->avg_alloc_cores ||
        (t.avg_alloc_cores == best->avg_alloc_cores && t.action.i + t.action.j > best->action.i + best->action.j))
      best = t;
  }
  return best.value_or(fallback);
}

inline FluctuationResult fluctuation_bench(const ExperimentConfig& cfg) {
  const auto& spec = cfg.fluctuation;
  if (!(spec.base_rps > 0.0)) throw ConfigError("fluctuate.base_rps: must be > 0");
  if (spec.windows < 1) throw ConfigError("fluctuate.windows: must be >= 1");
  if (!(spec.window_s > 0.0)) throw ConfigError("fluctuate.window_s: must be > 0");
  if (!(spec.resample_s > 0.0)) throw ConfigError("fluctuate.resample_s: must be > 0");
  for (double r : spec.ranges)
    if (!(r >= 0.0)) throw ConfigError("fluctuate.ranges: entries must be >= 0");

  FluctuationResult out;
  if (spec.tune_targets) {
    out.tuned = tune_targets(cfg);
    out.target_high = out.tuned->action.target_high();
    out.target_low = out.tuned->action.target_low();
  } else {
    out.target_high = cfg.controller.target_high;
    out.target_low = cfg.controller.target_low;
  }

  const auto total_s = static_cast<int>(std::ceil(spec.windows * spec.window_s));
  workload::Trace flat;
  for (int t = 0; t < total_s; ++t) flat.push_back({static_cast<double>(t), spec.base_rps});
  const long window_periods = periods_for(spec.window_s, cfg.sim.period_ms);

  for (std::size_t k = 0; k < spec.ranges.size(); ++k) {
    FluctuationRow row;
    row.range = spec.ranges[k];
    row.half_range = row.range / 2.0;
    const auto trace = workload::fluctuate(flat, row.half_range, spec.resample_s, cfg.seed * 1000003 + k);
    const auto c = fixed_targets_config(cfg, out.target_high, out.target_low);
    Driver d(c);
    prepare_fixed_targets(d, c, out.target_high, out.target_low);
    long period = 0;
    for (int w = 0; w < spec.windows; ++w) {
      std::vector<double> lat;
      for (long p = 0; p < window_periods; ++p, ++period) {
        const double t_s = std::floor(static_cast<double>(period) * cfg.sim.period_ms / 1000.0 + 1e-9);
        const auto& r = d.tick(workload::rps_at(trace, t_s));
        for (const auto& cr : r.completed) lat.push_back(cr.latency_ms());
      }
      const double p99 = sim::percentile(lat, cfg.slo_percentile).value_or(0.0);
      row.window_p99.push_back(p99);
      if (p99 > cfg.slo_ms) ++row.windows_over_slo;
    }
    row.p99 = box_stats(row.window_p99);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace autothrottle::harness
