#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autothrottle/errors.hpp"
#include "autothrottle/harness/benches.hpp"
#include "autothrottle/harness/config.hpp"
#include "autothrottle/harness/experiment.hpp"
#include "autothrottle/harness/report_io.hpp"
#include "autothrottle/workload.hpp"

namespace fs = std::filesystem;
namespace h = autothrottle::harness;
using autothrottle::ConfigError;
using nlohmann::json;

namespace {

json small_app(double rps) {
  json j = json::parse(R"({
    "seed": 4,
    "application": {
      "services": [
        {"id": "a", "quota_max_cores": 4, "demand_ms": {"t": 2.0}},
        {"id": "b", "quota_max_cores": 2, "demand_ms": {"t": 1.0, "u": 3.0}},
        {"id": "c", "quota_max_cores": 2, "demand_ms": {"u": 0.5}}
      ],
      "request_types": [
        {"name": "t", "stages": [["a"], ["b"]]},
        {"name": "u", "stages": [["b", "c"]]}
      ],
      "composition": {"t": 0.75, "u": 0.25}
    },
    "durations": {"warmup_s": 10, "measurement_hours": 0.5}
  })");
  j["trace"] = {{"kind", "constant"}, {"duration_s", 600}, {"rps_min", rps}, {"rps_avg", rps}, {"rps_max", rps}};
  return j;
}

// Nearest-rank 99th percentile with integer rank arithmetic.
double p99_oracle(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t rank = std::max<std::size_t>(1, (99 * n + 99) / 100);
  return v[rank - 1];
}

std::string csv_of(const h::RunResult& r) {
  std::ostringstream s;
  h::write_decisions_csv(s, r);
  h::write_hourly_csv(s, r);
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + AUTOTHROTTLE_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("autothrottle_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Harness, StaticUsageMatchesCallGraphDemand) {
  auto j = small_app(200.0);
  j["controller"] = {{"kind", "static"}, {"static", {{"default_cores", 2}}}};
  const auto cfg = h::parse_config(j);
  const auto r = h::Experiment(cfg).run();
  // a: 200*.75*2ms, b: 200*(.75*1ms + .25*3ms), c: 200*.25*.5ms
  const double expected = (300.0 + 300.0 + 25.0) / 1000.0;
  ASSERT_EQ(r.hours.size(), 1u);
  EXPECT_NEAR(r.avg_used_cores, expected, 0.01 * expected);
  EXPECT_DOUBLE_EQ(r.avg_alloc_cores, 6.0);
  EXPECT_TRUE(r.slo_met_every_hour());
}

TEST(Harness, ExpectedUsageHelperMatchesHandSum) {
  const auto cfg = h::parse_config(small_app(100.0));
  const autothrottle::sim::CompiledApp app(cfg.application);
  const auto u = h::expected_usage_cores(app, cfg.composition, 100.0);
  ASSERT_EQ(u.size(), 3u);
  EXPECT_NEAR(u[0], 0.15, 1e-12);
  EXPECT_NEAR(u[1], 0.15, 1e-12);
  EXPECT_NEAR(u[2], 0.0125, 1e-12);
}

TEST(Harness, ZeroLoadDrivesQuotasToMinimum) {
  auto j = small_app(0.0);
  j["controller"] = {{"kind", "autothrottle"},
                     {"tower", {{"exploration_stage_steps", 20}, {"learning_steps", 10}}}};
  const auto cfg = h::parse_config(j);
  const auto r = h::Experiment(cfg).run();
  ASSERT_EQ(r.final_quotas.size(), 3u);
  for (std::size_t s = 0; s < r.final_quotas.size(); ++s)
    EXPECT_DOUBLE_EQ(r.final_quotas[s], cfg.application.services[s].quota_min_cores) << s;
}

TEST(Harness, HourlyReportMatchesRawPeriodLog) {
  auto j = small_app(250.0);
  j["durations"]["measurement_hours"] = 1.5;
  j["controller"] = {{"kind", "k8s-cpu-fast"}, {"k8s", {{"utilization_threshold", 0.6}}}};
  const auto cfg = h::parse_config(j);
  h::Experiment e(cfg);
  const long hour_periods = h::periods_for(3600.0, cfg.sim.period_ms);
  std::vector<std::vector<double>> lat(1);
  std::vector<double> alloc(1, 0.0), used(1, 0.0);
  std::vector<long> periods(1, 0);
  e.set_period_observer([&](const autothrottle::sim::PeriodReport& rep, double q, bool measured) {
    if (!measured) return;
    if (periods.back() == hour_periods) {
      lat.emplace_back();
      alloc.push_back(0.0);
      used.push_back(0.0);
      periods.push_back(0);
    }
    for (const auto& c : rep.completed) lat.back().push_back(c.latency_ms());
    alloc.back() += q;
    for (const auto& s : rep.services) used.back() += s.served_ms;
    ++periods.back();
  });
  const auto r = e.run();
  ASSERT_EQ(r.hours.size(), 2u);
  ASSERT_EQ(lat.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    ASSERT_TRUE(r.hours[k].p99_ms);
    EXPECT_DOUBLE_EQ(*r.hours[k].p99_ms, p99_oracle(lat[k])) << k;
    EXPECT_NEAR(r.hours[k].avg_alloc_cores, alloc[k] / periods[k], 1e-9);
    EXPECT_NEAR(r.hours[k].avg_used_cores, used[k] / (periods[k] * cfg.sim.period_ms), 1e-9);
    EXPECT_GE(r.hours[k].avg_alloc_cores, r.hours[k].avg_used_cores);
    EXPECT_EQ(r.hours[k].slo_violated, *r.hours[k].p99_ms > cfg.slo_ms);
  }
  EXPECT_EQ(periods[1], hour_periods / 2);
}

TEST(Harness, AutothrottleDecisionLogCoversEveryMinute) {
  auto j = small_app(300.0);
  j["controller"] = {{"kind", "autothrottle"},
                     {"tower", {{"exploration_stage_steps", 30}, {"learning_steps", 20}}}};
  const auto cfg = h::parse_config(j);
  const auto r = h::Experiment(cfg).run();
  EXPECT_EQ(r.measurement_start_minute, 50);
  ASSERT_EQ(r.minutes.size(), 50u + 30u);
  for (std::size_t k = 0; k < r.minutes.size(); ++k) {
    const auto& m = r.minutes[k];
    EXPECT_EQ(m.minute, static_cast<int>(k));
    ASSERT_TRUE(m.action);
    EXPECT_EQ(m.bin, autothrottle::tower::rps_bin(m.rps, cfg.controller.tower.bin_size));
    EXPECT_GE(m.total_alloc_cores, 0.0);
    EXPECT_LE(m.total_alloc_cores, cfg.total_quota_max() + 1e-9);
  }
  EXPECT_EQ(r.groups.size(), 3u);
  for (const auto& hr : r.hours) EXPECT_GE(hr.avg_alloc_cores, hr.avg_used_cores);
}

TEST(Harness, BaselineDecisionRowsHaveNoAction) {
  auto j = small_app(100.0);
  j["controller"] = {{"kind", "k8s-cpu"}};
  const auto r = h::Experiment(h::parse_config(j)).run();
  ASSERT_EQ(r.minutes.size(), 30u);
  for (const auto& m : r.minutes) EXPECT_FALSE(m.action);
  std::ostringstream s;
  h::write_decisions_csv(s, r);
  std::istringstream in(s.str());
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  EXPECT_EQ(header, "minute,rps,bin,action_i,action_j,target_high,target_low,cost,slo_met,total_alloc_cores");
  EXPECT_NE(first.find(",,,,"), std::string::npos) << first;
}

TEST(Harness, RerunsAreByteIdentical) {
  auto j = small_app(300.0);
  j["trace"] = {{"kind", "noisy"}, {"duration_s", 1200}, {"rps_min", 100}, {"rps_avg", 250}, {"rps_max", 400}};
  j["controller"] = {{"kind", "autothrottle"},
                     {"tower", {{"exploration_stage_steps", 10}, {"learning_steps", 10}}}};
  const auto cfg = h::parse_config(j);
  EXPECT_EQ(csv_of(h::Experiment(cfg).run()), csv_of(h::Experiment(cfg).run()));

  auto other = cfg;
  other.seed += 1;
  EXPECT_NE(csv_of(h::Experiment(cfg).run()), csv_of(h::Experiment(other).run()));
}

TEST(Harness, PickBestThreshold) {
  using R = h::SweepRow;
  EXPECT_FALSE(h::pick_best_threshold({}));
  EXPECT_FALSE(h::pick_best_threshold({R{0.5, 3.0, 1, false}, R{0.6, 2.0, 2, false}}));
  EXPECT_EQ(h::pick_best_threshold({R{0.5, 3.0, 0, true}, R{0.6, 2.0, 0, true}, R{0.7, 1.0, 1, false}}), 1u);
  EXPECT_EQ(h::pick_best_threshold({R{0.5, 2.0, 0, true}, R{0.6, 2.0, 0, true}, R{0.4, 2.0, 0, true}}), 1u);
}

TEST(Harness, SweepRequiresK8sController) {
  const auto cfg = h::parse_config(small_app(100.0));
  EXPECT_THROW(h::threshold_sweep(cfg), ConfigError);
}

TEST(Harness, SweepRowsFollowThresholds) {
  auto j = small_app(200.0);
  j["controller"] = {{"kind", "k8s-cpu-fast"}};
  j["sweep"] = {{"thresholds", {0.3, 0.9}}};
  const auto s = h::threshold_sweep(h::parse_config(j));
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(s.rows[0].threshold, 0.3);
  EXPECT_GT(s.rows[0].avg_alloc_cores, s.rows[1].avg_alloc_cores);
  EXPECT_EQ(s.best, h::pick_best_threshold(s.rows));
}

TEST(Harness, CorrelationNeedsTwoPoints) {
  auto cfg = h::load_config(std::string(AUTOTHROTTLE_CONFIGS) + "/chain.json");
  cfg.correlate.points = 1;
  EXPECT_THROW(h::correlation_bench(cfg), ConfigError);
}

TEST(Harness, CorrelationRowsAndIdleService) {
  auto cfg = h::load_config(std::string(AUTOTHROTTLE_CONFIGS) + "/chain.json");
  cfg.correlate.points = 4;
  cfg.correlate.duration_s = 20;
  const auto rows = h::correlation_bench(cfg);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].service, "logic");
  ASSERT_EQ(rows[0].points.size(), 4u);
  for (std::size_t k = 1; k < rows[0].points.size(); ++k)
    EXPECT_GT(rows[0].points[k].quota_cores, rows[0].points[k - 1].quota_cores);
  EXPECT_EQ(rows[1].service, "audit");
  EXPECT_FALSE(rows[1].r_throttle);
  EXPECT_TRUE(rows[1].low_signal);
  std::ostringstream s;
  h::write_correlation_csv(s, rows);
  EXPECT_NE(s.str().find("audit,4,,,undefined"), std::string::npos) << s.str();
}

TEST(Harness, BoxStats) {
  const auto b = h::box_stats({5, 1, 4, 2, 3});
  EXPECT_DOUBLE_EQ(b.min, 1);
  EXPECT_DOUBLE_EQ(b.median, 3);
  EXPECT_DOUBLE_EQ(b.max, 5);
  EXPECT_LE(b.q1, b.median);
  EXPECT_GE(b.q3, b.median);
  EXPECT_THROW(h::box_stats({}), std::invalid_argument);
}

TEST(Harness, FluctuationOneRowPerRange) {
  auto j = small_app(200.0);
  j["controller"] = {{"kind", "fixed-targets"}, {"targets", {{"high", 0.1}, {"low", 0.1}}}};
  j["fluctuate"] = {{"base_rps", 200},  {"ranges", {0, 100, 300}}, {"windows", 3},
                    {"window_s", 10},   {"settle_s", 10},         {"tune_targets", false}};
  const auto f = h::fluctuation_bench(h::parse_config(j));
  EXPECT_FALSE(f.tuned);
  EXPECT_DOUBLE_EQ(f.target_high, 0.1);
  ASSERT_EQ(f.rows.size(), 3u);
  for (const auto& r : f.rows) {
    EXPECT_DOUBLE_EQ(r.half_range, r.range / 2);
    EXPECT_EQ(r.window_p99.size(), 3u);
    EXPECT_LE(r.p99.min, r.p99.median);
    EXPECT_LE(r.p99.median, r.p99.max);
  }
}

TEST(Cli, RunWritesIdenticalOutputsAcrossReruns) {
  const std::string cfg = std::string(AUTOTHROTTLE_CONFIGS) + "/chain.json";
  const auto a = scratch("run_a");
  const auto b = scratch("run_b");
  ASSERT_EQ(run_cli("run -c \"" + cfg + "\" -o \"" + a.string() + "\""), 0);
  ASSERT_EQ(run_cli("run -c \"" + cfg + "\" -o \"" + b.string() + "\""), 0);
  for (const char* f : {"decisions.csv", "hourly.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty());
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto c = scratch("run_c");
  ASSERT_EQ(run_cli("run -c \"" + cfg + "\" -s 6 -o \"" + c.string() + "\""), 0);
  EXPECT_NE(slurp(a / "decisions.csv"), slurp(c / "decisions.csv"));
}

TEST(Cli, ErrorsExitNonzero) {
  const auto dir = scratch("bad");
  EXPECT_NE(run_cli(""), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_NE(run_cli("run"), 0);
  EXPECT_NE(run_cli("run -c \"" + (dir / "missing.json").string() + "\""), 0);

  const auto bad = dir / "bad.json";
  {
    std::ofstream out(bad);
    out << R"({"application": {"services": [], "request_types": [], "composition": {}}})";
  }
  EXPECT_EQ(run_cli("run -c \"" + bad.string() + "\" -o \"" + dir.string() + "\""), 2);
  EXPECT_FALSE(fs::exists(dir / "decisions.csv"));

  const auto broken = dir / "broken.json";
  {
    std::ofstream out(broken);
    out << "{ not json";
  }
  EXPECT_EQ(run_cli("sweep -c \"" + broken.string() + "\""), 2);
  const std::string chain = std::string(AUTOTHROTTLE_CONFIGS) + "/chain.json";
  EXPECT_EQ(run_cli("sweep -c \"" + chain + "\" -o \"" + dir.string() + "\""), 2);
  EXPECT_EQ(run_cli("sweep -c \"" + chain + "\" --controller round-robin -o \"" + dir.string() + "\""), 2);
}

TEST(Cli, ControllerOverrideEnablesSweep) {
  const auto dir = scratch("sweep_override");
  const auto cfg = dir / "tiny.json";
  {
    std::ofstream out(cfg);
    out << R"({"seed": 2,
      "application": {
        "services": [{"id": "a", "quota_max_cores": 2, "demand_ms": {"t": 2.0}}],
        "request_types": [{"name": "t", "stages": [["a"]]}],
        "composition": {"t": 1.0}},
      "trace": {"kind": "constant", "rps_min": 100, "rps_avg": 100, "rps_max": 100},
      "durations": {"warmup_s": 10, "measurement_hours": 0.05},
      "controller": {"kind": "static"},
      "sweep": {"thresholds": [0.5, 0.9]}})";
  }
  ASSERT_EQ(run_cli("sweep -c \"" + cfg.string() + "\" --controller k8s-cpu -o \"" + dir.string() + "\""), 0);
  const auto csv = slurp(dir / "sweep.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Cli, GenTraceWritesParseableTrace) {
  const auto dir = scratch("trace");
  const auto out = dir / "t.csv";
  ASSERT_EQ(run_cli("gen-trace --kind bursty --duration 120 --min 10 --avg 50 --max 200 -s 3 -o \"" + out.string() +
                    "\""),
            0);
  const auto trace = autothrottle::workload::parse_trace(slurp(out));
  ASSERT_EQ(trace.size(), 120u);
  double lo = 1e9, hi = -1e9;
  for (const auto& p : trace) {
    lo = std::min(lo, p.rps);
    hi = std::max(hi, p.rps);
  }
  EXPECT_GE(lo, 10.0 - 1e-9);
  EXPECT_LE(hi, 200.0 + 1e-9);
  EXPECT_NE(run_cli("gen-trace --kind sawtooth -o \"" + out.string() + "\""), 0);
}
