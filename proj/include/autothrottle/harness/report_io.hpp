#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "autothrottle/errors.hpp"
#include "autothrottle/harness/benches.hpp"
#include "autothrottle/harness/experiment.hpp"
#include "autothrottle/workload.hpp"

namespace autothrottle::harness {

using workload::format_number;

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

inline void write_decisions_csv(std::ostream& out, const RunResult& r) {
  out << "minute,rps,bin,action_i,action_j,target_high,target_low,cost,slo_met,total_alloc_cores\n";
  for (const auto& m : r.minutes) {
    out << m.minute << ',' << format_number(m.rps) << ',' << m.bin << ',';
    if (m.action)
      out << m.action->i << ',' << m.action->j << ',' << format_number(m.action->target_high()) << ','
          << format_number(m.action->target_low());
    else
      out << ",,,";
    out << ',' << format_number(m.cost) << ',' << (m.slo_met ? 1 : 0) << ',' << format_number(m.total_alloc_cores)
        << '\n';
  }
}

inline void write_hourly_csv(std::ostream& out, const RunResult& r) {
  out << "hour,avg_alloc_cores,avg_used_cores,p99_ms,slo_violated\n";
  for (const auto& h : r.hours)
    out << h.hour << ',' << format_number(h.avg_alloc_cores) << ',' << format_number(h.avg_used_cores) << ','
        << format_optional(h.p99_ms) << ',' << (h.slo_violated ? 1 : 0) << '\n';
}

inline nlohmann::ordered_json run_summary(const RunResult& r) {
  nlohmann::ordered_json j;
  j["controller"] = to_string(r.controller);
  j["seed"] = r.seed;
  j["hours"] = r.hours.size();
  j["avg_alloc_cores"] = r.avg_alloc_cores;
  j["avg_used_cores"] = r.avg_used_cores;
  j["hours_violated"] = r.hours_violated;
  j["slo_met_every_hour"] = r.slo_met_every_hour();
  j["measurement_start_minute"] = r.measurement_start_minute;
  if (!r.groups.empty()) {
    nlohmann::ordered_json g = nlohmann::ordered_json::object();
    for (const auto& [id, grp] : r.groups) g[id] = grp == tower::UsageGroup::kHigh ? "high" : "low";
    j["groups"] = g;
  }
  return j;
}

inline void write_correlation_csv(std::ostream& out, const std::vector<CorrelationRow>& rows) {
  out << "service,points,r_latency_throttles,r_latency_utilization,flag\n";
  for (const auto& r : rows) {
    std::string flag;
    if (!r.r_throttle || !r.r_utilization)
      flag = "undefined";
    else if (r.low_signal)
      flag = "low-signal";
    out << r.service << ',' << r.points.size() << ',' << format_optional(r.r_throttle) << ','
        << format_optional(r.r_utilization) << ',' << flag << '\n';
  }
}

inline void write_correlation_points_csv(std::ostream& out, const std::vector<CorrelationRow>& rows) {
  out << "service,quota_cores,tail_ms,throttles,utilization\n";
  for (const auto& r : rows)
    for (const auto& p : r.points)
      out << r.service << ',' << format_number(p.quota_cores) << ',' << format_number(p.tail_ms) << ','
          << format_number(p.throttles) << ',' << format_number(p.utilization) << '\n';
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  out << "threshold,avg_alloc_cores,hours_violated,feasible,best\n";
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    const auto& r = s.rows[k];
    out << format_number(r.threshold) << ',' << format_number(r.avg_alloc_cores) << ',' << r.hours_violated << ','
        << (r.feasible ? 1 : 0) << ',' << (s.best && *s.best == k ? 1 : 0) << '\n';
  }
}

inline void write_fluctuation_csv(std::ostream& out, const FluctuationResult& f) {
  out << "range,half_range,p99_min,p99_q1,p99_median,p99_q3,p99_max,windows_over_slo\n";
  for (const auto& r : f.rows)
    out << format_number(r.range) << ',' << format_number(r.half_range) << ',' << format_number(r.p99.min) << ','
        << format_number(r.p99.q1) << ',' << format_number(r.p99.median) << ',' << format_number(r.p99.q3) << ','
        << format_number(r.p99.max) << ',' << r.windows_over_slo << '\n';
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  writer(out);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace autothrottle::harness
