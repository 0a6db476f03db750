#pragma once

#include <array>
#include <random>
#include <stdexcept>

#include "autothrottle/tower/actions.hpp"

namespace autothrottle::tower {

// Epsilon-greedy over the four ladder neighbors of `best`, each with
// probability epsilon / 4. Neighbors that fall off the ladder hand their mass
// back to `best`.
template <typename Rng>
ActionPair select_action(ActionPair best, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("select_action: epsilon must be in [0, 1]");
  if (epsilon == 0.0) return best;
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u >= epsilon) return best;
  const std::array<ActionPair, 4> neighbors{{
      {best.i, best.j - 1},
      {best.i, best.j + 1},
      {best.i - 1, best.j},
      {best.i + 1, best.j},
  }};
  auto slot = static_cast<std::size_t>(u / (epsilon / 4.0));
  if (slot > 3) slot = 3;
  const ActionPair& n = neighbors[slot];
  return ActionPair::in_range(n.i, n.j) ? n : best;
}

struct ExplorationStep {
  ActionPair action;
  bool train = false;
};

// Random exploration stage: a fresh uniform action at the start of every hold,
// kept for `hold_steps` steps; only the last step of a hold yields a training
// sample so the previous action has settled out.
class ExplorationSchedule {
 public:
  explicit ExplorationSchedule(int hold_steps = 2) : hold_(hold_steps) {
    if (hold_ < 1) throw std::invalid_argument("exploration hold must be >= 1");
  }

  template <typename Rng>
  ExplorationStep step(int step_index, Rng& rng) {
    const int local = step_index % hold_;
    if (local == 0 || !have_current_) {
      current_ = ActionPair::from_index(std::uniform_int_distribution<int>(0, kNumActions - 1)(rng));
      have_current_ = true;
    }
    return {current_, local == hold_ - 1};
  }

 private:
  int hold_;
  ActionPair current_{};
  bool have_current_ = false;
};

}  // namespace autothrottle::tower
