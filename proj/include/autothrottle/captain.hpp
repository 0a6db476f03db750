#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

#include "autothrottle/errors.hpp"
#include "autothrottle/sim/stats.hpp"

namespace autothrottle::captain {

struct CaptainParams {
  int window_periods = 10;   // N
  int history_periods = 50;  // M
  double alpha = 3.0;
  double beta_max = 0.9;
  double beta_min = 0.5;
  double initial_margin = 1.0;

  void validate() const {
    if (window_periods < 1) throw ConfigError("captain.window_periods: must be >= 1");
    if (history_periods < 2) throw ConfigError("captain.history_periods: must be >= 2");
    if (!(alpha >= 1.0)) throw ConfigError("captain.alpha: must be >= 1");
    if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0))
      throw ConfigError("captain.beta_min/beta_max: need 0 < beta_min < beta_max < 1");
    if (!(initial_margin >= 0.0)) throw ConfigError("captain.initial_margin: must be >= 0");
  }

  // Throttle targets are supported on [0, 1/alpha).
  bool supports_target(double target) const { return target >= 0.0 && target < 1.0 / alpha; }
};

struct QuotaBounds {
  double min_cores;
  double max_cores;

  double clamp(double cores) const { return std::clamp(cores, min_cores, max_cores); }
};

struct CaptainState {
  double quota = 0.0;   // cores
  double margin = 0.0;  // stdev multiplier for scale-down headroom
  std::deque<double> usage_history;  // per-period usage, CPU-ms, newest last
  double throttle_target = 0.0;
  int window_throttle_count = 0;
  int periods_in_window = 0;
  double last_quota = 0.0;  // quota before the most recent scale-down
  int rollback_periods_left = 0;
  int throttle_count_since_scaledown = 0;
};

enum class QuotaAction { kNone, kScaleUp, kScaleDown, kRollback };

struct QuotaDecision {
  QuotaAction action = QuotaAction::kNone;
  double quota = 0.0;

  bool changed() const noexcept { return action != QuotaAction::kNone; }
};

// Per-service heuristic controller that tracks a CPU throttle-ratio target.
//
// Every window of N periods it either scales the quota up multiplicatively
// (measured ratio above alpha * target) or proposes a scale-down to
// max(usage) + margin * stdev(usage) over the last M periods. For N periods
// after each scale-down it checks every period whether the scale-down caused
// excess throttling and, if so, rolls back past the previous quota.
class Captain {
 public:
  Captain(CaptainParams params, QuotaBounds bounds, double period_ms)
      : params_(params), bounds_(bounds), period_ms_(period_ms) {
    params_.validate();
    if (!(bounds_.min_cores > 0.0 && bounds_.max_cores >= bounds_.min_cores))
      throw ConfigError("captain: invalid quota bounds");
    if (!(period_ms_ > 0.0)) throw ConfigError("captain: period_ms must be > 0");
    state_.quota = bounds_.max_cores;
    state_.margin = params_.initial_margin;
    state_.last_quota = state_.quota;
  }

  Captain(CaptainParams params, QuotaBounds bounds, double period_ms, CaptainState state)
      : Captain(params, bounds, period_ms) {
    state_ = std::move(state);
  }

  const CaptainParams& params() const noexcept { return params_; }
  const QuotaBounds& bounds() const noexcept { return bounds_; }
  const CaptainState& state() const noexcept { return state_; }
  double quota() const noexcept { return state_.quota; }

  void set_target(double target) {
    if (!std::isfinite(target) || !params_.supports_target(target))
      throw std::invalid_argument("captain target " + std::to_string(target) + " outside [0, 1/alpha)");
    state_.throttle_target = target;
  }

  // Driver entry point, called once per CFS period with that period's usage
  // and throttle flag. Runs the rollback check (when armed) and, on window
  // boundaries, the scale-up/scale-down step, in that order.
  QuotaDecision on_period(double usage_ms, bool throttled) {
    state_.usage_history.push_back(usage_ms);
    while (state_.usage_history.size() > static_cast<std::size_t>(params_.history_periods))
      state_.usage_history.pop_front();

    const int count = throttled ? 1 : 0;
    state_.window_throttle_count += count;

    QuotaDecision decision{QuotaAction::kNone, state_.quota};
    if (state_.rollback_periods_left > 0) {
      auto d = on_period_rollback_check(count);
      if (d.changed()) decision = d;
    }
    if (++state_.periods_in_window >= params_.window_periods) {
      auto d = on_window(state_.window_throttle_count);
      state_.window_throttle_count = 0;
      state_.periods_in_window = 0;
      if (d.changed()) decision = d;
    }
    return decision;
  }

  QuotaDecision on_window(int throttle_count) {
    const double n = params_.window_periods;
    const double ratio = throttle_count / n;
    const double target = state_.throttle_target;
    state_.margin = std::max(0.0, state_.margin + ratio - target);

    if (ratio > params_.alpha * target) {
      state_.quota = bounds_.clamp(state_.quota * (1.0 + ratio - params_.alpha * target));
      state_.rollback_periods_left = 0;
      state_.throttle_count_since_scaledown = 0;
      return {QuotaAction::kScaleUp, state_.quota};
    }

    if (state_.usage_history.size() < static_cast<std::size_t>(params_.history_periods))
      return {QuotaAction::kNone, state_.quota};

    std::vector<double> cores(state_.usage_history.begin(), state_.usage_history.end());
    for (double& c : cores) c /= period_ms_;
    const double proposed = *std::max_element(cores.begin(), cores.end()) + state_.margin * sim::sample_stdev(cores);
    if (!(proposed <= params_.beta_max * state_.quota)) return {QuotaAction::kNone, state_.quota};

    const double next = bounds_.clamp(std::max(params_.beta_min * state_.quota, proposed));
    if (!(next < state_.quota)) return {QuotaAction::kNone, state_.quota};
    state_.last_quota = state_.quota;
    state_.quota = next;
    state_.rollback_periods_left = params_.window_periods;
    state_.throttle_count_since_scaledown = 0;
    return {QuotaAction::kScaleDown, state_.quota};
  }

  // The count is divided by N regardless of how many periods have elapsed
  // since the scale-down.
  QuotaDecision on_period_rollback_check(int throttle_count_this_period) {
    if (state_.rollback_periods_left <= 0) return {QuotaAction::kNone, state_.quota};
    state_.throttle_count_since_scaledown += throttle_count_this_period;
    const double ratio = state_.throttle_count_since_scaledown / static_cast<double>(params_.window_periods);
    const double target = state_.throttle_target;
    --state_.rollback_periods_left;
    if (ratio > params_.alpha * target) {
      state_.quota = bounds_.clamp(state_.last_quota + (state_.last_quota - state_.quota));
      state_.margin = state_.margin + ratio - target;
      state_.rollback_periods_left = 0;
      state_.throttle_count_since_scaledown = 0;
      return {QuotaAction::kRollback, state_.quota};
    }
    return {QuotaAction::kNone, state_.quota};
  }

 private:
  CaptainParams params_;
  QuotaBounds bounds_;
  double period_ms_;
  CaptainState state_;
};

}  // namespace autothrottle::captain
