#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <queue>
#include <span>
#include <stdexcept>
#include <vector>

#include "autothrottle/errors.hpp"
#include "autothrottle/sim/application.hpp"

namespace autothrottle::sim {

struct SimConfig {
  double period_ms = 100.0;  // CFS period
  int periods_per_window = 10;
  std::uint64_t seed = 1;
  double hop_delay_ms = 1.0;

  void validate() const {
    if (!(std::isfinite(period_ms) && period_ms > 0.0)) throw ConfigError("sim.period_ms: must be > 0");
    if (periods_per_window < 1) throw ConfigError("sim.periods_per_window: must be >= 1");
    if (!(std::isfinite(hop_delay_ms) && hop_delay_ms >= 0.0)) throw ConfigError("sim.hop_delay_ms: must be >= 0");
  }
};

struct Arrival {
  std::size_t type;
};

// Cumulative counters, the nr_throttled / cpuacct.usage analogs.
struct ServiceStats {
  std::uint64_t nr_throttled = 0;
  double usage_total_ms = 0.0;

  friend bool operator==(const ServiceStats&, const ServiceStats&) = default;
};

struct ServicePeriod {
  double quota_cores = 0.0;
  double budget_ms = 0.0;
  double served_ms = 0.0;
  double backlog_ms = 0.0;  // pending work left at period end
  bool throttled = false;
};

struct CompletedRequest {
  std::uint64_t id = 0;
  std::size_t type = 0;
  double arrival_ms = 0.0;
  double completion_ms = 0.0;

  double latency_ms() const noexcept { return completion_ms - arrival_ms; }
};

struct PeriodReport {
  std::uint64_t period = 0;
  double start_ms = 0.0;
  std::size_t arrivals = 0;
  std::vector<ServicePeriod> services;
  std::vector<CompletedRequest> completed;
};

// Fluid CFS model of a microservice cluster, advanced one period at a time.
//
// Each service owns a FIFO of visits. At the start of a period it is granted
// quota * period_ms CPU-ms and drains the FIFO at burst_cores until either the
// budget or the period runs out. A period counts as throttled when the budget
// was fully consumed and work is still queued. Visits inside a stage run in
// parallel; the next stage becomes ready hop_delay_ms after the slowest one.
class Cluster {
 public:
  Cluster(CompiledApp app, SimConfig cfg) : app_(std::move(app)), cfg_(cfg) {
    cfg_.validate();
    services_.resize(app_.num_services());
    burst_.resize(app_.num_services());
    for (std::size_t s = 0; s < services_.size(); ++s) {
      services_[s].quota = app_.service(s).quota_max_cores;
      burst_[s] = app_.burst_cores(s);
    }
  }

  const CompiledApp& app() const noexcept { return app_; }
  const SimConfig& config() const noexcept { return cfg_; }
  std::size_t num_services() const noexcept { return services_.size(); }
  double now_ms() const noexcept { return now_ms_; }
  std::uint64_t period_index() const noexcept { return period_; }
  std::size_t in_flight() const noexcept { return slots_.size() - free_slots_.size(); }

  ServiceStats read_stats(std::size_t s) const {
    const auto& rt = services_.at(s);
    return {rt.nr_throttled, rt.usage_total_ms};
  }

  // Clamped into [quota_min, quota_max]; applies from the next period.
  void set_quota(std::size_t s, double cores) {
    if (!std::isfinite(cores) || cores < 0.0) throw std::invalid_argument("set_quota: cores must be finite and >= 0");
    const auto& spec = app_.service(s);
    services_.at(s).quota = std::clamp(cores, spec.quota_min_cores, spec.quota_max_cores);
  }

  double quota(std::size_t s) const { return services_.at(s).quota; }

  double backlog_ms(std::size_t s) const {
    double sum = 0.0;
    for (const auto& q : services_.at(s).backlog) sum += q.remaining;
    return sum;
  }

  PeriodReport step_period(std::span<const Arrival> arrivals) {
    for (const auto& a : arrivals)
      if (a.type >= app_.num_types())
        throw ConfigError("arrival references unknown request type index " + std::to_string(a.type));

    PeriodReport report;
    report.period = period_;
    report.start_ms = now_ms_;
    report.arrivals = arrivals.size();
    completed_ = &report.completed;
    period_end_ = now_ms_ + cfg_.period_ms;

    for (auto& rt : services_) {
      rt.budget_left = rt.quota * cfg_.period_ms;
      rt.served = 0.0;
      rt.free_at = now_ms_;
      rt.stalled = false;
    }

    std::vector<Ready> carried;
    carried.swap(carry_);
    for (const auto& r : carried) push_ready(r);

    // Work left over from earlier periods goes first, in FIFO order.
    for (std::size_t s = 0; s < services_.size(); ++s) {
      std::deque<Queued> old;
      old.swap(services_[s].backlog);
      for (const auto& q : old) offer(s, q.slot, q.remaining, now_ms_);
    }

    for (const auto& a : arrivals) {
      const auto slot = allocate_slot();
      auto& req = slots_[slot];
      req.id = next_id_++;
      req.type = a.type;
      req.arrival_ms = now_ms_;
      req.stage = 0;
      schedule_stage(slot, now_ms_);
    }

    while (!heap_.empty()) {
      const Ready r = heap_.top();
      heap_.pop();
      offer(r.service, r.slot, r.demand, r.t);
    }

    report.services.resize(services_.size());
    for (std::size_t s = 0; s < services_.size(); ++s) {
      auto& rt = services_[s];
      auto& out = report.services[s];
      out.quota_cores = rt.quota;
      out.budget_ms = rt.quota * cfg_.period_ms;
      out.served_ms = rt.served;
      double pending = 0.0;
      for (const auto& q : rt.backlog) pending += q.remaining;
      out.backlog_ms = pending;
      out.throttled = rt.budget_left <= 0.0 && !rt.backlog.empty();
      if (out.throttled) ++rt.nr_throttled;
      rt.usage_total_ms += rt.served;
    }

    completed_ = nullptr;
    ++period_;
    now_ms_ = period_end_;
    return report;
  }

 private:
  struct InFlight {
    std::uint64_t id = 0;
    std::size_t type = 0;
    double arrival_ms = 0.0;
    std::size_t stage = 0;
    std::size_t outstanding = 0;
    double stage_done_ms = 0.0;
  };

  struct Ready {
    double t;
    std::uint64_t seq;
    std::uint32_t slot;
    std::uint32_t service;
    double demand;
  };

  struct ReadyLater {
    bool operator()(const Ready& a, const Ready& b) const noexcept {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };

  struct Queued {
    std::uint32_t slot;
    double remaining;
  };

  struct ServiceRuntime {
    double quota = 0.0;
    std::deque<Queued> backlog;
    std::uint64_t nr_throttled = 0;
    double usage_total_ms = 0.0;
    // Period-local.
    double budget_left = 0.0;
    double served = 0.0;
    double free_at = 0.0;
    bool stalled = false;
  };

  std::uint32_t allocate_slot() {
    if (!free_slots_.empty()) {
      const auto slot = free_slots_.back();
      free_slots_.pop_back();
      return slot;
    }
    slots_.emplace_back();
    return static_cast<std::uint32_t>(slots_.size() - 1);
  }

  void push_ready(const Ready& r) {
    if (r.t >= period_end_)
      carry_.push_back(r);
    else
      heap_.push(r);
  }

  void schedule_stage(std::uint32_t slot, double ready_at) {
    auto& req = slots_[slot];
    const auto& visits = app_.stages(req.type)[req.stage];
    req.outstanding = visits.size();
    req.stage_done_ms = ready_at;
    for (const auto& v : visits)
      push_ready({ready_at, seq_++, slot, static_cast<std::uint32_t>(v.service), v.demand_ms});
  }

  void offer(std::size_t s, std::uint32_t slot, double remaining, double t) {
    auto& rt = services_[s];
    if (rt.stalled) {
      rt.backlog.push_back({slot, remaining});
      return;
    }
    const double rate = burst_[s];
    const double start = std::max(t, rt.free_at);
    const double cap = std::max(0.0, (period_end_ - start) * rate);
    if (remaining <= rt.budget_left && remaining <= cap) {
      const double done = start + remaining / rate;
      rt.served += remaining;
      rt.budget_left -= remaining;
      rt.free_at = done;
      finish_visit(slot, done);
    } else if (rt.budget_left <= cap) {
      // Quota exhausted; the rest waits for the next replenishment.
      rt.served += rt.budget_left;
      rt.free_at = start + rt.budget_left / rate;
      rt.backlog.push_back({slot, remaining - rt.budget_left});
      rt.budget_left = 0.0;
      rt.stalled = true;
    } else {
      rt.served += cap;
      rt.budget_left -= cap;
      rt.free_at = period_end_;
      rt.backlog.push_back({slot, remaining - cap});
      rt.stalled = true;
    }
  }

  void finish_visit(std::uint32_t slot, double done) {
    auto& req = slots_[slot];
    req.stage_done_ms = std::max(req.stage_done_ms, done);
    if (--req.outstanding > 0) return;
    ++req.stage;
    if (req.stage < app_.stages(req.type).size()) {
      schedule_stage(slot, req.stage_done_ms + cfg_.hop_delay_ms);
      return;
    }
    completed_->push_back({req.id, req.type, req.arrival_ms, req.stage_done_ms});
    free_slots_.push_back(slot);
  }

  CompiledApp app_;
  SimConfig cfg_;
  std::vector<ServiceRuntime> services_;
  std::vector<double> burst_;
  std::vector<InFlight> slots_;
  std::vector<std::uint32_t> free_slots_;
  std::priority_queue<Ready, std::vector<Ready>, ReadyLater> heap_;
  std::vector<Ready> carry_;
  std::vector<CompletedRequest>* completed_ = nullptr;
  std::uint64_t period_ = 0;
  std::uint64_t next_id_ = 0;
  std::uint64_t seq_ = 0;
  double now_ms_ = 0.0;
  double period_end_ = 0.0;
};

}  // namespace autothrottle::sim
