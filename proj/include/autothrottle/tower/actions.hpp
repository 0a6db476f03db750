#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace autothrottle::tower {

// Sorted throttle-target ladder. Every entry is below 1/alpha for alpha = 3.
inline constexpr std::array<double, 9> kThrottleLadder{0.00, 0.02, 0.04, 0.06, 0.10, 0.15, 0.20, 0.25, 0.30};
inline constexpr int kLadderSize = static_cast<int>(kThrottleLadder.size());
inline constexpr int kNumActions = kLadderSize * kLadderSize;

// Ladder indices (1-based) for the High-usage and Low-usage service clusters.
struct ActionPair {
  int i = 1;
  int j = 1;

  static constexpr bool in_range(int i, int j) noexcept {
    return i >= 1 && i <= kLadderSize && j >= 1 && j <= kLadderSize;
  }

  static ActionPair from_index(int index) {
    if (index < 0 || index >= kNumActions) throw std::out_of_range("action index " + std::to_string(index));
    return {index / kLadderSize + 1, index % kLadderSize + 1};
  }

  int index() const noexcept { return (i - 1) * kLadderSize + (j - 1); }
  double target_high() const { return kThrottleLadder.at(static_cast<std::size_t>(i - 1)); }
  double target_low() const { return kThrottleLadder.at(static_cast<std::size_t>(j - 1)); }

  friend bool operator==(const ActionPair&, const ActionPair&) = default;
  friend auto operator<=>(const ActionPair&, const ActionPair&) = default;
};

using ContextBin = int;

inline ContextBin rps_bin(double avg_rps, double bin_size) {
  if (!(bin_size > 0.0)) throw std::invalid_argument("rps_bin: bin_size must be > 0");
  if (!(avg_rps > 0.0)) return 0;
  return static_cast<ContextBin>(std::floor(avg_rps / bin_size));
}

}  // namespace autothrottle::tower
