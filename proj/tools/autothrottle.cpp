#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "autothrottle/harness/benches.hpp"
#include "autothrottle/harness/config.hpp"
#include "autothrottle/harness/experiment.hpp"
#include "autothrottle/harness/report_io.hpp"
#include "autothrottle/workload.hpp"

namespace fs = std::filesystem;
namespace at = autothrottle;
namespace h = autothrottle::harness;

namespace {

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> controller;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("-c,--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", o.seed, "override the config seed");
  cmd->add_option("-o,--out", o.out, "output directory (overrides output_dir)");
  cmd->add_option("--controller", o.controller, "override controller.kind");
}

h::ExperimentConfig load(const CommonOpts& o) {
  auto j = h::read_config_json(o.config);
  if (o.controller) {
    if (!j.is_object()) throw at::ConfigError("config: expected an object");
    j["controller"]["kind"] = *o.controller;
  }
  auto cfg = h::parse_config(j);
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.controller.tower.seed = cfg.seed * 7919 + 17;
  }
  if (o.out) cfg.output_dir = *o.out;
  return cfg;
}

void print_json(const nlohmann::ordered_json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_run(const CommonOpts& o) {
  const auto cfg = load(o);
  const auto r = h::Experiment(cfg).run();
  const fs::path dir = cfg.output_dir;
  h::write_file(dir / "decisions.csv", [&](std::ostream& s) { h::write_decisions_csv(s, r); });
  h::write_file(dir / "hourly.csv", [&](std::ostream& s) { h::write_hourly_csv(s, r); });
  print_json(h::run_summary(r));
  return 0;
}

int cmd_correlate(const CommonOpts& o) {
  const auto cfg = load(o);
  const auto rows = h::correlation_bench(cfg);
  const fs::path dir = cfg.output_dir;
  h::write_file(dir / "correlation.csv", [&](std::ostream& s) { h::write_correlation_csv(s, rows); });
  h::write_file(dir / "correlation_points.csv", [&](std::ostream& s) { h::write_correlation_points_csv(s, rows); });
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json e;
    e["service"] = r.service;
    e["r_latency_throttles"] = r.r_throttle ? nlohmann::ordered_json(*r.r_throttle) : nlohmann::ordered_json();
    e["r_latency_utilization"] = r.r_utilization ? nlohmann::ordered_json(*r.r_utilization) : nlohmann::ordered_json();
    e["low_signal"] = r.low_signal;
    j.push_back(e);
  }
  print_json(j);
  return 0;
}

int cmd_sweep(const CommonOpts& o) {
  const auto cfg = load(o);
  const auto s = h::threshold_sweep(cfg);
  h::write_file(fs::path(cfg.output_dir) / "sweep.csv", [&](std::ostream& os) { h::write_sweep_csv(os, s); });
  nlohmann::ordered_json j;
  j["controller"] = h::to_string(cfg.controller.kind);
  if (s.best) {
    j["best_threshold"] = s.rows[*s.best].threshold;
    j["avg_alloc_cores"] = s.rows[*s.best].avg_alloc_cores;
  } else {
    j["best_threshold"] = "none feasible";
  }
  print_json(j);
  return 0;
}

int cmd_fluctuate(const CommonOpts& o) {
  const auto cfg = load(o);
  const auto f = h::fluctuation_bench(cfg);
  h::write_file(fs::path(cfg.output_dir) / "fluctuation.csv",
                [&](std::ostream& s) { h::write_fluctuation_csv(s, f); });
  nlohmann::ordered_json j;
  j["target_high"] = f.target_high;
  j["target_low"] = f.target_low;
  if (f.tuned) j["tuned_feasible"] = f.tuned->feasible;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : f.rows) rows.push_back({{"range", r.range}, {"median_p99_ms", r.p99.median}});
  j["rows"] = rows;
  print_json(j);
  return 0;
}

struct GenOpts {
  std::optional<std::string> config;
  std::string kind = "diurnal";
  int duration_s = 3600;
  double rps_min = 100.0;
  double rps_avg = 200.0;
  double rps_max = 300.0;
  std::uint64_t seed = 1;
  std::string out = "-";
};

int cmd_gen_trace(const GenOpts& g) {
  at::workload::Trace trace;
  if (g.config) {
    const auto cfg = h::load_config(*g.config);
    trace = at::workload::gen_trace(cfg.trace.kind, cfg.trace.duration_s, cfg.trace.rps_min, cfg.trace.rps_avg,
                                    cfg.trace.rps_max, g.seed);
  } else {
    trace = at::workload::gen_trace(at::workload::parse_trace_kind(g.kind), g.duration_s, g.rps_min, g.rps_avg,
                                    g.rps_max, g.seed);
  }
  if (g.out == "-") {
    at::workload::write_trace(std::cout, trace);
  } else {
    h::write_file(g.out, [&](std::ostream& s) { at::workload::write_trace(s, trace); });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPU throttle-target autoscaling simulator"};
  app.require_subcommand(1);

  CommonOpts run_o, corr_o, sweep_o, fluct_o;
  auto* run = app.add_subcommand("run", "run one experiment and write decisions.csv and hourly.csv");
  add_common(run, run_o);
  auto* corr = app.add_subcommand("correlate", "static quota sweep and latency correlations");
  add_common(corr, corr_o);
  auto* sweep = app.add_subcommand("sweep", "utilization-threshold sweep for a K8s baseline");
  add_common(sweep, sweep_o);
  auto* fluct = app.add_subcommand("fluctuate", "tail latency under short-term RPS fluctuation");
  add_common(fluct, fluct_o);

  GenOpts gen_o;
  auto* gen = app.add_subcommand("gen-trace", "write a synthetic RPS trace as t,rps lines");
  gen->add_option("-c,--config", gen_o.config, "take the trace spec from a config")->check(CLI::ExistingFile);
  gen->add_option("--kind", gen_o.kind, "diurnal | constant | noisy | bursty");
  gen->add_option("--duration", gen_o.duration_s, "seconds");
  gen->add_option("--min", gen_o.rps_min);
  gen->add_option("--avg", gen_o.rps_avg);
  gen->add_option("--max", gen_o.rps_max);
  gen->add_option("-s,--seed", gen_o.seed);
  gen->add_option("-o,--out", gen_o.out, "output file, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(run_o);
    if (*corr) return cmd_correlate(corr_o);
    if (*sweep) return cmd_sweep(sweep_o);
    if (*fluct) return cmd_fluctuate(fluct_o);
    if (*gen) return cmd_gen_trace(gen_o);
  } catch (const at::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const at::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
