#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace autothrottle::sim {

// Nearest-rank percentile: the value at rank ceil(p * n) of the sorted list.
// Returns nullopt for an empty list ("no data"; callers treat the window as
// meeting its SLO).
inline std::optional<double> percentile(std::span<const double> values, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("percentile: p must be in (0, 1]");
  if (values.empty()) return std::nullopt;
  const auto n = values.size();
  // The epsilon absorbs representation error in p (0.99 * 100 must be rank 99).
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::vector<double> work(values.begin(), values.end());
  auto nth = work.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(work.begin(), nth, work.end());
  return *nth;
}

// Median with the even-length convention fixed to the mean of the two middle
// values. Empty input yields nullopt.
inline std::optional<double> median(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> work(values.begin(), values.end());
  const auto n = work.size();
  auto upper = work.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(work.begin(), upper, work.end());
  if (n % 2 == 1) return *upper;
  const double hi = *upper;
  const double lo = *std::max_element(work.begin(), upper);
  return 0.5 * (lo + hi);
}

inline double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Sample standard deviation (n - 1 denominator). Zero for fewer than 2 values.
inline double sample_stdev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mu = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

// Sample Pearson correlation. nullopt when either series has zero variance
// (the coefficient is undefined).
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series lengths differ");
  if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace autothrottle::sim
