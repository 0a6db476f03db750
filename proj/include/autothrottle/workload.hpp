#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "autothrottle/errors.hpp"
#include "autothrottle/sim/application.hpp"
#include "autothrottle/sim/cluster.hpp"

namespace autothrottle::workload {

struct TracePoint {
  double t_s = 0.0;
  double rps = 0.0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

using Trace = std::vector<TracePoint>;

// Request-type mix, fractions summing to 1.
using Composition = std::map<std::string, double>;

enum class TraceKind { kDiurnal, kConstant, kNoisy, kBursty };

inline TraceKind parse_trace_kind(std::string_view s) {
  if (s == "diurnal") return TraceKind::kDiurnal;
  if (s == "constant") return TraceKind::kConstant;
  if (s == "noisy") return TraceKind::kNoisy;
  if (s == "bursty") return TraceKind::kBursty;
  throw ConfigError("unknown trace kind '" + std::string(s) + "'");
}

inline const char* to_string(TraceKind k) {
  switch (k) {
    case TraceKind::kDiurnal: return "diurnal";
    case TraceKind::kConstant: return "constant";
    case TraceKind::kNoisy: return "noisy";
    case TraceKind::kBursty: return "bursty";
  }
  return "?";
}

inline double trace_duration_s(const Trace& trace) { return trace.empty() ? 0.0 : trace.back().t_s + 1.0; }

// Zero-order hold. Times before the first point read the first point.
inline double rps_at(const Trace& trace, double t_s) {
  if (trace.empty()) return 0.0;
  auto it = std::upper_bound(trace.begin(), trace.end(), t_s,
                             [](double t, const TracePoint& p) { return t < p.t_s; });
  if (it == trace.begin()) return trace.front().rps;
  return std::prev(it)->rps;
}

namespace detail {

inline double mean_rps(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Pull the mean toward avg by shifting and re-clipping, then make sure both
// bounds are attained.
inline void finalize(std::vector<double>& v, double lo, double avg, double hi) {
  for (double& x : v) x = std::clamp(x, lo, hi);
  for (int iter = 0; iter < 60; ++iter) {
    const double m = mean_rps(v);
    if (std::abs(m - avg) <= 1e-3 * std::max(avg, 1.0)) break;
    for (double& x : v) x = std::clamp(x + (avg - m), lo, hi);
  }
  if (v.size() >= 2 && lo < hi) {
    auto mn = std::min_element(v.begin(), v.end());
    *mn = lo;
    auto mx = std::max_element(v.begin(), v.end());
    if (mx == mn) mx = (mn == v.begin()) ? v.begin() + 1 : v.begin();
    *mx = hi;
  }
}

}  // namespace detail

// Synthetic RPS trace at one point per second. Shapes:
//   diurnal  - a single raised-cosine peak, sharpened so the mean hits avg
//   constant - avg plus small Gaussian jitter
//   noisy    - mean-reverting random walk around avg
//   bursty   - jittered base level with rectangular spikes to max
// All are clipped to [min, max], attain both bounds, and keep the mean close
// to avg.
inline Trace gen_trace(TraceKind kind, int duration_s, double rps_min, double rps_avg, double rps_max,
                       std::uint64_t seed) {
  if (duration_s < 0) throw ConfigError("trace.duration_s: must be >= 0");
  if (!(std::isfinite(rps_min) && std::isfinite(rps_avg) && std::isfinite(rps_max)) || rps_min < 0.0 ||
      !(rps_min <= rps_avg && rps_avg <= rps_max))
    throw ConfigError("trace: need 0 <= rps_min <= rps_avg <= rps_max");
  Trace out;
  if (duration_s == 0) return out;
  const auto n = static_cast<std::size_t>(duration_s);
  std::vector<double> v(n, rps_avg);
  const double span = rps_max - rps_min;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  if (span > 0.0) {
    switch (kind) {
      case TraceKind::kDiurnal: {
        const double pi = std::acos(-1.0);
        std::vector<double> shape(n);
        for (std::size_t t = 0; t < n; ++t)
          shape[t] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(t) / static_cast<double>(n)));
        const double want = (rps_avg - rps_min) / span;
        auto mean_pow = [&](double p) {
          double s = 0.0;
          for (double x : shape) s += std::pow(x, p);
          return s / static_cast<double>(n);
        };
        double lo = 1e-3, hi = 1e3;
        for (int it = 0; it < 100; ++it) {
          const double mid = std::sqrt(lo * hi);
          (mean_pow(mid) > want ? lo : hi) = mid;
        }
        const double p = std::sqrt(lo * hi);
        for (std::size_t t = 0; t < n; ++t) v[t] = rps_min + span * std::pow(shape[t], p);
        break;
      }
      case TraceKind::kConstant:
        for (double& x : v) x = rps_avg + gauss(rng) * span / 8.0;
        break;
      case TraceKind::kNoisy: {
        const double theta = 0.02;
        const double sd = span / 4.0;
        const double sigma = sd * std::sqrt(2.0 * theta - theta * theta);
        double x = rps_avg;
        for (double& out_v : v) {
          out_v = x;
          x += theta * (rps_avg - x) + sigma * gauss(rng);
          x = std::clamp(x, rps_min, rps_max);
        }
        break;
      }
      case TraceKind::kBursty: {
        double frac = 0.08;
        double base = (rps_avg - frac * rps_max) / (1.0 - frac);
        if (base < rps_min) {
          frac = 0.5 * (rps_avg - rps_min) / span;
          base = (rps_avg - frac * rps_max) / (1.0 - frac);
        }
        for (double& x : v) x = base + gauss(rng) * span / 20.0;
        std::vector<bool> burst(n, false);
        std::size_t covered = 0;
        const auto want = static_cast<std::size_t>(frac * static_cast<double>(n));
        std::uniform_int_distribution<std::size_t> start(0, n - 1);
        std::uniform_int_distribution<std::size_t> len(20, 90);
        for (int guard = 0; covered < want && guard < 10000; ++guard) {
          const std::size_t s0 = start(rng);
          const std::size_t l = len(rng);
          for (std::size_t t = s0; t < std::min(n, s0 + l) && covered < want; ++t)
            if (!burst[t]) {
              burst[t] = true;
              ++covered;
            }
        }
        for (std::size_t t = 0; t < n; ++t)
          if (burst[t]) v[t] = rps_max;
        break;
      }
    }
    detail::finalize(v, rps_min, rps_avg, rps_max);
  }
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.push_back({static_cast<double>(t), v[t]});
  return out;
}

// `t_seconds,rps` per line, LF endings, no header.
inline Trace parse_trace(std::string_view text) {
  Trace out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const auto comma = line.find(',');
    if (line.empty() || comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError("expected 't_seconds,rps'", line_no);
    auto parse_num = [&](std::string_view field, const char* what) {
      double value = 0.0;
      const auto* first = field.data();
      const auto* last = field.data() + field.size();
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value))
        throw ParseError(std::string("malformed ") + what + " '" + std::string(field) + "'", line_no);
      return value;
    };
    const double t = parse_num(line.substr(0, comma), "timestamp");
    const double rps = parse_num(line.substr(comma + 1), "rps");
    if (t < 0.0) throw ParseError("negative timestamp", line_no);
    if (rps < 0.0) throw ParseError("negative rps", line_no);
    if (!out.empty() && !(t > out.back().t_s)) throw ParseError("timestamps must be strictly increasing", line_no);
    out.push_back({t, rps});
  }
  if (out.empty()) throw ParseError("empty trace", 0);
  return out;
}

inline Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trace file '" + path + "'", 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline void write_trace(std::ostream& out, const Trace& trace) {
  for (const auto& p : trace) out << format_number(p.t_s) << ',' << format_number(p.rps) << '\n';
}

// Draws Poisson arrival counts and i.i.d. request types.
class ArrivalSampler {
 public:
  ArrivalSampler(const sim::CompiledApp& app, const Composition& composition) {
    if (composition.empty()) throw ConfigError("composition: empty");
    double total = 0.0;
    std::vector<double> weights(app.num_types(), 0.0);
    for (const auto& [name, frac] : composition) {
      auto idx = app.type_index(name);
      if (!idx) throw ConfigError("composition." + name + ": unknown request type");
      if (!(std::isfinite(frac) && frac >= 0.0)) throw ConfigError("composition." + name + ": bad fraction");
      weights[*idx] = frac;
      total += frac;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("composition: fractions must sum to 1");
    types_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  }

  template <typename Rng>
  std::vector<sim::Arrival> sample(double rps, double period_s, Rng& rng) {
    std::vector<sim::Arrival> out;
    const double mean = rps * period_s;
    if (!(mean > 0.0)) return out;
    const auto count = std::poisson_distribution<long>(mean)(rng);
    out.reserve(static_cast<std::size_t>(count));
    for (long k = 0; k < count; ++k) out.push_back({types_(rng)});
    return out;
  }

 private:
  std::discrete_distribution<std::size_t> types_;
};

template <typename Rng>
std::vector<sim::Arrival> arrivals_for_period(const Trace& trace, ArrivalSampler& sampler, std::uint64_t period_index,
                                              double period_ms, Rng& rng) {
  const double t_s = std::floor(static_cast<double>(period_index) * period_ms / 1000.0);
  return sampler.sample(rps_at(trace, t_s), period_ms / 1000.0, rng);
}

// Each window_s block gets one uniform draw u and every point in it becomes
// lo + u * (hi - lo) with lo = max(1, base - half), hi = base + half.
inline Trace fluctuate(const Trace& trace, double half_range, double window_s, std::uint64_t seed) {
  if (!(half_range >= 0.0)) throw std::invalid_argument("fluctuate: half_range must be >= 0");
  if (!(window_s > 0.0)) throw std::invalid_argument("fluctuate: window_s must be > 0");
  if (half_range == 0.0) return trace;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Trace out = trace;
  long current_window = -1;
  double u = 0.0;
  for (auto& p : out) {
    const auto w = static_cast<long>(std::floor(p.t_s / window_s));
    if (w != current_window) {
      current_window = w;
      u = uni(rng);
    }
    const double hi = p.rps + half_range;
    const double lo = std::min(hi, std::max(1.0, p.rps - half_range));
    p.rps = lo + u * (hi - lo);
  }
  return out;
}

}  // namespace autothrottle::workload
