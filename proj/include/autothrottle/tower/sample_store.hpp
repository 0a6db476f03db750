#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "autothrottle/sim/stats.hpp"
#include "autothrottle/tower/actions.hpp"

namespace autothrottle::tower {

struct TrainingSample {
  ContextBin bin;
  ActionPair action;
  double cost;
};

// Observed costs grouped by (RPS bin, action). A group's label is the median
// of everything recorded into it.
class SampleStore {
 public:
  struct Group {
    std::vector<double> costs;
    double median = 0.0;
  };
  using Key = std::pair<ContextBin, int>;  // (bin, action index)

  // Appends and returns the group median after insertion.
  double record(ContextBin bin, ActionPair action, double raw_cost) {
    auto [it, inserted] = groups_.try_emplace(Key{bin, action.index()});
    if (inserted) keys_.push_back(it->first);
    auto& g = it->second;
    g.costs.push_back(raw_cost);
    g.median = *sim::median(g.costs);
    ++total_;
    return g.median;
  }

  bool empty() const noexcept { return groups_.empty(); }
  std::size_t num_groups() const noexcept { return groups_.size(); }
  std::size_t num_samples() const noexcept { return total_; }

  const Group* find(ContextBin bin, ActionPair action) const {
    auto it = groups_.find(Key{bin, action.index()});
    return it == groups_.end() ? nullptr : &it->second;
  }

  const std::map<Key, Group>& groups() const noexcept { return groups_; }

  // n draws, uniform over groups with replacement. Groups are indexed in
  // creation order so the draw sequence depends only on the recording history.
  template <typename Rng>
  std::vector<TrainingSample> build_training_set(std::size_t n, Rng& rng, bool raw_labels = false) const {
    std::vector<TrainingSample> out;
    if (groups_.empty() || n == 0) return out;
    out.reserve(n);
    std::uniform_int_distribution<std::size_t> pick(0, keys_.size() - 1);
    for (std::size_t k = 0; k < n; ++k) {
      const Key& key = keys_[pick(rng)];
      const Group& g = groups_.at(key);
      double label = g.median;
      if (raw_labels) label = g.costs[std::uniform_int_distribution<std::size_t>(0, g.costs.size() - 1)(rng)];
      out.push_back({key.first, ActionPair::from_index(key.second), label});
    }
    return out;
  }

 private:
  std::map<Key, Group> groups_;
  std::vector<Key> keys_;
  std::size_t total_ = 0;
};

}  // namespace autothrottle::tower
