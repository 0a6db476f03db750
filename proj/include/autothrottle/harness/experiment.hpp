#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "autothrottle/baselines.hpp"
#include "autothrottle/captain.hpp"
#include "autothrottle/errors.hpp"
#include "autothrottle/harness/config.hpp"
#include "autothrottle/sim/application.hpp"
#include "autothrottle/sim/cluster.hpp"
#include "autothrottle/sim/stats.hpp"
#include "autothrottle/tower/tower.hpp"
#include "autothrottle/workload.hpp"

namespace autothrottle::harness {

struct MinuteRow {
  int minute = 0;
  double rps = 0.0;
  int bin = 0;
  std::optional<tower::ActionPair> action;  // empty for non-Tower controllers
  double cost = 0.0;
  bool slo_met = true;
  double total_alloc_cores = 0.0;
  std::optional<double> tail_ms;
};

struct HourRow {
  int hour = 0;
  double avg_alloc_cores = 0.0;
  double avg_used_cores = 0.0;
  std::optional<double> p99_ms;
  bool slo_violated = false;
};

struct RunResult {
  ControllerKind controller = ControllerKind::kAutothrottle;
  std::uint64_t seed = 0;
  std::vector<MinuteRow> minutes;
  std::vector<HourRow> hours;
  int measurement_start_minute = 0;
  tower::ClusterAssignment groups;
  double avg_alloc_cores = 0.0;
  double avg_used_cores = 0.0;
  int hours_violated = 0;
  std::vector<double> final_quotas;

  bool slo_met_every_hour() const { return hours_violated == 0 && !hours.empty(); }
};

// Rolling aggregate over a span of periods.
struct Accumulator {
  std::size_t periods = 0;
  std::size_t arrivals = 0;
  double alloc_sum = 0.0;  // sum over periods of total quota (cores)
  double used_ms = 0.0;
  std::vector<double> latencies;

  void add(const sim::PeriodReport& r, double total_quota) {
    ++periods;
    arrivals += r.arrivals;
    alloc_sum += total_quota;
    for (const auto& s : r.services) used_ms += s.served_ms;
    for (const auto& c : r.completed) latencies.push_back(c.latency_ms());
  }
  double avg_alloc_cores() const { return periods ? alloc_sum / static_cast<double>(periods) : 0.0; }
  double avg_used_cores(double period_ms) const {
    return periods ? used_ms / (static_cast<double>(periods) * period_ms) : 0.0;
  }
  double avg_rps(double period_ms) const {
    return periods ? static_cast<double>(arrivals) * 1000.0 / (static_cast<double>(periods) * period_ms) : 0.0;
  }
  std::optional<double> tail_ms(double p) const { return sim::percentile(latencies, p); }
  void clear() { *this = Accumulator{}; }
};

inline workload::Trace make_trace(const TraceSpec& spec, std::uint64_t seed) {
  if (spec.file) return workload::load_trace(*spec.file);
  return workload::gen_trace(spec.kind, spec.duration_s, spec.rps_min, spec.rps_avg, spec.rps_max, seed);
}

// Trace replay that wraps around at the end.
inline double looped_rps(const workload::Trace& trace, double t_s) {
  const double d = workload::trace_duration_s(trace);
  if (d <= 0.0) return 0.0;
  return workload::rps_at(trace, std::fmod(t_s, d));
}

// Owns the cluster, the arrival stream and the per-service controllers, and
// advances them together one CFS period at a time.
class Driver {
 public:
  explicit Driver(const ExperimentConfig& cfg)
      : cfg_(cfg),
        cluster_(sim::CompiledApp(cfg.application), cfg.sim),
        sampler_(cluster_.app(), cfg.composition),
        rng_(cfg.seed) {
    const auto& app = cluster_.app();
    const auto kind = cfg.controller.kind;
    if (kind == ControllerKind::kAutothrottle || kind == ControllerKind::kFixedTargets) {
      for (std::size_t s = 0; s < app.num_services(); ++s) {
        const auto& spec = app.service(s);
        captains_.emplace_back(cfg.controller.captain, captain::QuotaBounds{spec.quota_min_cores, spec.quota_max_cores},
                               cfg.sim.period_ms);
        captains_.back().set_target(cfg.controller.warmup_target);
      }
    } else if (kind == ControllerKind::kK8sCpu || kind == ControllerKind::kK8sCpuFast) {
      for (std::size_t s = 0; s < app.num_services(); ++s) {
        const auto& spec = app.service(s);
        k8s_.emplace_back(cfg.controller.k8s, captain::QuotaBounds{spec.quota_min_cores, spec.quota_max_cores});
      }
      const double per = cfg.controller.k8s.measure_interval_s * 1000.0 / cfg.sim.period_ms;
      k8s_periods_ = std::max<long>(1, std::lround(per));
      k8s_usage_ms_.assign(app.num_services(), 0.0);
    } else if (kind == ControllerKind::kStatic) {
      for (std::size_t s = 0; s < app.num_services(); ++s) {
        const auto& spec = app.service(s);
        auto it = cfg.controller.static_cores.find(spec.id);
        const double cores = it != cfg.controller.static_cores.end() ? it->second : cfg.controller.static_default_cores;
        baselines::StaticAllocation alloc(cores, {spec.quota_min_cores, spec.quota_max_cores});
        cluster_.set_quota(s, alloc.quota());
      }
    }
  }

  sim::Cluster& cluster() noexcept { return cluster_; }
  const sim::Cluster& cluster() const noexcept { return cluster_; }
  const std::vector<captain::Captain>& captains() const noexcept { return captains_; }
  double period_s() const { return cfg_.sim.period_ms / 1000.0; }

  double total_quota() const {
    double q = 0.0;
    for (std::size_t s = 0; s < cluster_.num_services(); ++s) q += cluster_.quota(s);
    return q;
  }

  void set_groups(tower::ClusterAssignment groups) { groups_ = std::move(groups); }
  const tower::ClusterAssignment& groups() const noexcept { return groups_; }

  void set_targets(double high, double low) {
    for (std::size_t s = 0; s < captains_.size(); ++s) {
      auto it = groups_.find(cluster_.app().service(s).id);
      const bool is_high = it == groups_.end() || it->second == tower::UsageGroup::kHigh;
      captains_[s].set_target(is_high ? high : low);
    }
  }

  // Total quota in force during the period that tick() just ran.
  double last_total_quota() const noexcept { return last_total_quota_; }

  const sim::PeriodReport& tick(double rps) {
    const auto arrivals = sampler_.sample(rps, period_s(), rng_);
    last_total_quota_ = total_quota();
    last_ = cluster_.step_period(arrivals);
    for (std::size_t s = 0; s < captains_.size(); ++s) {
      const auto& sp = last_.services[s];
      const auto d = captains_[s].on_period(sp.served_ms, sp.throttled);
      if (d.changed()) cluster_.set_quota(s, d.quota);
    }
    if (!k8s_.empty()) {
      for (std::size_t s = 0; s < k8s_.size(); ++s) k8s_usage_ms_[s] += last_.services[s].served_ms;
      if (++k8s_elapsed_ >= k8s_periods_) {
        const double span_ms = static_cast<double>(k8s_elapsed_) * cfg_.sim.period_ms;
        for (std::size_t s = 0; s < k8s_.size(); ++s) {
          cluster_.set_quota(s, k8s_[s].step(k8s_usage_ms_[s] / span_ms));
          k8s_usage_ms_[s] = 0.0;
        }
        k8s_elapsed_ = 0;
      }
    }
    return last_;
  }

 private:
  const ExperimentConfig& cfg_;
  sim::Cluster cluster_;
  workload::ArrivalSampler sampler_;
  std::mt19937_64 rng_;
  std::vector<captain::Captain> captains_;
  std::vector<baselines::K8sAutoscaler> k8s_;
  std::vector<double> k8s_usage_ms_;
  long k8s_periods_ = 1;
  long k8s_elapsed_ = 0;
  tower::ClusterAssignment groups_;
  sim::PeriodReport last_;
  double last_total_quota_ = 0.0;
};

inline long periods_for(double seconds, double period_ms) {
  return std::lround(std::floor(seconds * 1000.0 / period_ms + 1e-9));
}

// Ramps RPS in 10% steps every 5 s up to `target_rps`, then holds it until
// `warmup_s`. Returns the per-service average usage (cores) over the ramp.
inline std::map<std::string, double> run_warmup(Driver& d, double target_rps, double warmup_s) {
  const auto& app = d.cluster().app();
  std::vector<double> used(app.num_services(), 0.0);
  const long n = periods_for(warmup_s, d.cluster().config().period_ms);
  for (long p = 0; p < n; ++p) {
    const double t = static_cast<double>(p) * d.period_s();
    const double frac = std::min(1.0, 0.1 * (1.0 + std::floor(t / 5.0 + 1e-9)));
    const auto& r = d.tick(target_rps * frac);
    for (std::size_t s = 0; s < used.size(); ++s) used[s] += r.services[s].served_ms;
  }
  std::map<std::string, double> out;
  const double span_ms = static_cast<double>(std::max<long>(n, 1)) * d.cluster().config().period_ms;
  for (std::size_t s = 0; s < used.size(); ++s) out[app.service(s).id] = used[s] / span_ms;
  return out;
}

// Full run: warm-up, then (Autothrottle only) the exploration and learning
// stages on a separate training trace, then the measured hours.
class Experiment {
 public:
  // Sees every period after warm-up; `measured` marks the reported hours.
  using PeriodObserver = std::function<void(const sim::PeriodReport&, double total_quota, bool measured)>;

  explicit Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

  const ExperimentConfig& config() const noexcept { return cfg_; }
  void set_period_observer(PeriodObserver obs) { observer_ = std::move(obs); }

  RunResult run() {
    const auto& ctl = cfg_.controller;
    const bool with_tower = ctl.kind == ControllerKind::kAutothrottle;
    const bool with_captains = with_tower || ctl.kind == ControllerKind::kFixedTargets;
    const double period_ms = cfg_.sim.period_ms;

    const workload::Trace measure = make_trace(cfg_.trace, cfg_.seed);
    const workload::Trace training = cfg_.trace.file ? measure : make_trace(cfg_.trace, cfg_.seed + 1);
    if (measure.empty()) throw ConfigError("trace: empty");

    Driver d(cfg_);
    RunResult out;
    out.controller = ctl.kind;
    out.seed = cfg_.seed;

    const workload::Trace& first = with_tower ? training : measure;
    const auto usage = run_warmup(d, looped_rps(first, 0.0), cfg_.warmup_s);
    if (with_captains) {
      out.groups = tower::cluster_services(usage, 2, cfg_.seed);
      d.set_groups(out.groups);
      if (ctl.kind == ControllerKind::kFixedTargets) d.set_targets(ctl.target_high, ctl.target_low);
    }

    std::optional<tower::Tower> tw;
    if (with_tower) {
      tw.emplace(ctl.tower);
      const auto t = tw->current_targets();
      d.set_targets(t.high, t.low);
    }

    const long step_periods = periods_for(ctl.tower.step_seconds, period_ms);
    if (step_periods < 1) throw ConfigError("controller.tower.step_seconds: shorter than one period");
    const long hour_periods = periods_for(3600.0, period_ms);
    int minute = 0;

    auto run_minutes = [&](const workload::Trace& trace, long steps, bool measured) {
      Accumulator win;
      Accumulator hour;
      long trace_period = 0;
      for (long k = 0; k < steps; ++k) {
        win.clear();
        for (long p = 0; p < step_periods; ++p, ++trace_period) {
          const double t_s = std::floor(static_cast<double>(trace_period) * period_ms / 1000.0 + 1e-9);
          const auto& r = d.tick(looped_rps(trace, t_s));
          win.add(r, d.last_total_quota());
          if (observer_) observer_(r, d.last_total_quota(), measured);
          if (measured) {
            hour.add(r, d.last_total_quota());
            if (static_cast<long>(hour.periods) == hour_periods) {
              push_hour(out, hour);
              hour.clear();
            }
          }
        }
        MinuteRow row;
        row.minute = minute++;
        row.rps = win.avg_rps(period_ms);
        row.bin = tower::rps_bin(row.rps, ctl.tower.bin_size);
        row.total_alloc_cores = win.avg_alloc_cores();
        row.tail_ms = win.tail_ms(cfg_.slo_percentile);
        if (tw) {
          const tower::StepObservation obs{row.rps, row.tail_ms, row.total_alloc_cores};
          const auto rec = tw->step(obs);
          row.action = rec->action;
          row.cost = rec->cost;
          row.slo_met = rec->slo_met;
          const auto t = tw->current_targets();
          d.set_targets(t.high, t.low);
        } else {
          row.slo_met = !row.tail_ms || *row.tail_ms <= cfg_.slo_ms;
          row.cost = tower::compute_cost(row.slo_met, row.total_alloc_cores, row.tail_ms.value_or(0.0), ctl.tower);
        }
        out.minutes.push_back(row);
      }
      if (measured && hour.periods > 0) push_hour(out, hour);
    };

    if (with_tower) {
      const long explore = ctl.tower.exploration_stage_steps;
      tw->set_epsilon(ctl.learning_epsilon);
      run_minutes(training, explore + ctl.learning_steps, false);
      tw->set_epsilon(ctl.measurement_epsilon);
    }
    out.measurement_start_minute = minute;
    const long measure_steps = std::lround(std::ceil(cfg_.measurement_hours * 3600.0 / ctl.tower.step_seconds - 1e-9));
    run_minutes(measure, measure_steps, true);

    double alloc = 0.0;
    double used = 0.0;
    for (const auto& h : out.hours) {
      alloc += h.avg_alloc_cores;
      used += h.avg_used_cores;
      if (h.slo_violated) ++out.hours_violated;
    }
    for (std::size_t s = 0; s < d.cluster().num_services(); ++s) out.final_quotas.push_back(d.cluster().quota(s));
    if (!out.hours.empty()) {
      out.avg_alloc_cores = alloc / static_cast<double>(out.hours.size());
      out.avg_used_cores = used / static_cast<double>(out.hours.size());
    }
    return out;
  }

 private:
  void push_hour(RunResult& out, const Accumulator& acc) const {
    HourRow h;
    h.hour = static_cast<int>(out.hours.size());
    h.avg_alloc_cores = acc.avg_alloc_cores();
    h.avg_used_cores = acc.avg_used_cores(cfg_.sim.period_ms);
    h.p99_ms = acc.tail_ms(cfg_.slo_percentile);
    h.slo_violated = h.p99_ms && *h.p99_ms > cfg_.slo_ms;
    out.hours.push_back(h);
  }

  ExperimentConfig cfg_;
  PeriodObserver observer_;
};

}  // namespace autothrottle::harness
