#pragma once

#include <optional>
#include <random>

#include "autothrottle/tower/actions.hpp"
#include "autothrottle/tower/clustering.hpp"
#include "autothrottle/tower/cost.hpp"
#include "autothrottle/tower/cost_model.hpp"
#include "autothrottle/tower/policy.hpp"
#include "autothrottle/tower/sample_store.hpp"

namespace autothrottle::tower {

// What the Tower sees at the end of a step.
struct StepObservation {
  double avg_rps = 0.0;
  std::optional<double> tail_latency_ms;  // nullopt: nothing completed, SLO treated as met
  double total_alloc_cores = 0.0;
};

struct Targets {
  double high = 0.0;
  double low = 0.0;
};

// One row per completed step, describing the action that ran during it.
struct DecisionRecord {
  int step = 0;
  double rps = 0.0;
  ContextBin bin = 0;
  ActionPair action;
  double target_high = 0.0;
  double target_low = 0.0;
  double cost = 0.0;
  std::optional<double> group_median;  // set when the step produced a sample
  bool slo_met = true;
  double total_alloc_cores = 0.0;
  bool explored = false;
};

// Application-level contextual bandit. Each step it costs the action that just
// ran, folds the cost into its (bin, action) group, refits the cost model on
// draws from the group medians, and picks the next pair of throttle targets.
class Tower {
 public:
  explicit Tower(TowerParams params, ActionPair initial_action = {1, 1})
      : params_((params.validate(), params)),
        rng_(params_.seed),
        schedule_(params_.exploration_hold_steps),
        model_(params_.model, params_.encoding, params_.hidden_units, params_.learning_rate, params_.bin_size,
               params_.context_scale_rps, params_.seed ^ 0x9e3779b97f4a7c15ULL),
        epsilon_(params_.epsilon),
        current_(initial_action) {
    if (!ActionPair::in_range(initial_action.i, initial_action.j))
      throw ConfigError("tower: initial action out of range");
    if (params_.exploration_stage_steps > 0) {
      const auto e = schedule_.step(0, rng_);
      current_ = e.action;
      current_train_ = e.train;
      current_explored_ = true;
    }
    best_ = current_;
  }

  const TowerParams& params() const noexcept { return params_; }
  const SampleStore& store() const noexcept { return store_; }
  const CostModel& model() const noexcept { return model_; }
  int steps_taken() const noexcept { return step_; }
  bool in_exploration_stage() const noexcept { return step_ < params_.exploration_stage_steps; }

  ActionPair current_action() const noexcept { return current_; }
  // Most recent model argmin (before exploration noise).
  ActionPair last_best() const noexcept { return best_; }
  Targets current_targets() const { return {current_.target_high(), current_.target_low()}; }

  double epsilon() const noexcept { return epsilon_; }
  void set_epsilon(double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("tower epsilon must be in [0, 1]");
    epsilon_ = eps;
  }

  // nullopt observation: the action is repeated and nothing is recorded.
  std::optional<DecisionRecord> step(const std::optional<StepObservation>& obs) {
    const int k = step_++;
    if (!obs) return std::nullopt;

    DecisionRecord rec;
    rec.step = k;
    rec.rps = obs->avg_rps;
    rec.bin = rps_bin(obs->avg_rps, params_.bin_size);
    rec.action = current_;
    rec.target_high = current_.target_high();
    rec.target_low = current_.target_low();
    rec.slo_met = !obs->tail_latency_ms || *obs->tail_latency_ms <= params_.slo_ms;
    rec.cost = compute_cost(rec.slo_met, obs->total_alloc_cores, obs->tail_latency_ms.value_or(0.0), params_);
    rec.total_alloc_cores = obs->total_alloc_cores;
    rec.explored = current_explored_;
    if (current_train_) rec.group_median = store_.record(rec.bin, current_, rec.cost);

    const int next = k + 1;
    if (next < params_.exploration_stage_steps) {
      const auto e = schedule_.step(next, rng_);
      current_ = e.action;
      current_train_ = e.train;
      current_explored_ = true;
      return rec;
    }
    if (!store_.empty()) {
      const auto batch = store_.build_training_set(static_cast<std::size_t>(params_.training_samples_per_update),
                                                   rng_, params_.label_mode == LabelMode::kRawSample);
      best_ = model_.train_and_predict(batch, rec.bin);
    }
    current_ = select_action(best_, epsilon_, rng_);
    current_train_ = true;
    current_explored_ = current_ != best_;
    return rec;
  }

 private:
  TowerParams params_;
  std::mt19937_64 rng_;
  ExplorationSchedule schedule_;
  SampleStore store_;
  CostModel model_;
  double epsilon_;
  ActionPair current_;
  ActionPair best_;
  bool current_train_ = true;
  bool current_explored_ = false;
  int step_ = 0;
};

}  // namespace autothrottle::tower
