#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autothrottle/baselines.hpp"
#include "autothrottle/captain.hpp"
#include "autothrottle/errors.hpp"
#include "autothrottle/sim/application.hpp"
#include "autothrottle/sim/cluster.hpp"
#include "autothrottle/tower/actions.hpp"
#include "autothrottle/tower/cost.hpp"
#include "autothrottle/workload.hpp"

namespace autothrottle::harness {

struct TraceSpec {
  workload::TraceKind kind = workload::TraceKind::kConstant;
  int duration_s = 3600;
  double rps_min = 100.0;
  double rps_avg = 100.0;
  double rps_max = 100.0;
  std::optional<std::string> file;
};

enum class ControllerKind { kAutothrottle, kK8sCpu, kK8sCpuFast, kStatic, kFixedTargets };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::kAutothrottle: return "autothrottle";
    case ControllerKind::kK8sCpu: return "k8s-cpu";
    case ControllerKind::kK8sCpuFast: return "k8s-cpu-fast";
    case ControllerKind::kStatic: return "static";
    case ControllerKind::kFixedTargets: return "fixed-targets";
  }
  return "?";
}

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kAutothrottle;
  captain::CaptainParams captain;
  double warmup_target = 0.0;  // Captain target before the Tower takes over
  tower::TowerParams tower;
  int learning_steps = 360;
  double learning_epsilon = 0.5;
  double measurement_epsilon = 0.1;
  baselines::K8sParams k8s;
  double static_default_cores = 1.0;
  std::map<std::string, double> static_cores;
  double target_high = 0.0;
  double target_low = 0.0;
};

struct CorrelationSpec {
  std::vector<std::string> services;
  double rps = 300.0;
  int points = 40;
  std::optional<double> quota_lo;
  std::optional<double> quota_hi;
  double duration_s = 120.0;
  double warmup_s = 20.0;
};

struct SweepSpec {
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
};

struct FluctuationSpec {
  double base_rps = 300.0;
  std::vector<double> ranges{0, 100, 200, 300, 400, 500, 600};  // full width; half-range = range / 2
  int windows = 60;
  double window_s = 60.0;
  double resample_s = 1.0;
  double settle_s = 300.0;
  bool tune_targets = true;
  double tune_duration_s = 600.0;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  sim::SimConfig sim;
  sim::Application application;
  workload::Composition composition;
  TraceSpec trace;
  double slo_ms = 200.0;
  double slo_percentile = 0.99;
  double warmup_s = 180.0;
  double measurement_hours = 1.0;
  ControllerConfig controller;
  CorrelationSpec correlate;
  SweepSpec sweep;
  FluctuationSpec fluctuation;

  double total_quota_max() const {
    double s = 0.0;
    for (const auto& svc : application.services) s += svc.quota_max_cores;
    return s;
  }
};

namespace detail {

using nlohmann::json;

// Typed, path-tracking view over one JSON object. Unknown keys are rejected by
// finish() so typos surface as config errors.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_number()) throw ConfigError(path(key) + ": expected a number");
    return v.get<double>();
  }

  double required_number(const std::string& key) {
    if (!has(key)) throw ConfigError(path(key) + ": required");
    return number(key, 0.0);
  }

  long integer(const std::string& key, long fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(path(key) + ": expected an integer");
    return v.get<long>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ConfigError(path(key) + ": expected true/false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_string()) throw ConfigError(path(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_array()) throw ConfigError(path(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) throw ConfigError(path(key) + "[" + std::to_string(k) + "]: expected a number");
      out.push_back(v[k].get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    if (!has(key)) return fallback;
    const auto& v = raw(key);
    if (!v.is_array()) throw ConfigError(path(key) + ": expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_string()) throw ConfigError(path(key) + "[" + std::to_string(k) + "]: expected a string");
      out.push_back(v[k].get<std::string>());
    }
    return out;
  }

  std::map<std::string, double> number_map(const std::string& key) {
    std::map<std::string, double> out;
    if (!has(key)) return out;
    const auto& v = raw(key);
    if (!v.is_object()) throw ConfigError(path(key) + ": expected an object of numbers");
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (!it.value().is_number()) throw ConfigError(path(key) + "." + it.key() + ": expected a number");
      out.emplace(it.key(), it.value().get<double>());
    }
    return out;
  }

  std::optional<ObjectReader> child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return ObjectReader(raw(key), path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError(path(it.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline ControllerKind parse_controller_kind(const std::string& s, const std::string& path) {
  if (s == "autothrottle") return ControllerKind::kAutothrottle;
  if (s == "k8s-cpu") return ControllerKind::kK8sCpu;
  if (s == "k8s-cpu-fast") return ControllerKind::kK8sCpuFast;
  if (s == "static") return ControllerKind::kStatic;
  if (s == "fixed-targets") return ControllerKind::kFixedTargets;
  throw ConfigError(path + ": unknown controller kind '" + s + "'");
}

inline void parse_application(ObjectReader& r, ExperimentConfig& cfg) {
  const auto& services = r.raw("services");
  if (!services.is_array()) throw ConfigError(r.path("services") + ": expected an array");
  for (std::size_t k = 0; k < services.size(); ++k) {
    ObjectReader s(services[k], r.path("services") + "[" + std::to_string(k) + "]");
    sim::ServiceSpec spec;
    spec.id = s.string("id", "");
    spec.quota_min_cores = s.number("quota_min_cores", spec.quota_min_cores);
    spec.quota_max_cores = s.number("quota_max_cores", spec.quota_max_cores);
    if (s.has("burst_cores")) spec.burst_cores = s.number("burst_cores", 0.0);
    spec.demand_ms_per_request = s.number_map("demand_ms");
    s.finish();
    cfg.application.services.push_back(std::move(spec));
  }
  const auto& types = r.raw("request_types");
  if (!types.is_array()) throw ConfigError(r.path("request_types") + ": expected an array");
  for (std::size_t k = 0; k < types.size(); ++k) {
    const std::string tpath = r.path("request_types") + "[" + std::to_string(k) + "]";
    ObjectReader t(types[k], tpath);
    sim::RequestType rt;
    rt.name = t.string("name", "");
    const auto& stages = t.raw("stages");
    if (!stages.is_array()) throw ConfigError(tpath + ".stages: expected an array of arrays");
    for (std::size_t st = 0; st < stages.size(); ++st) {
      if (!stages[st].is_array()) throw ConfigError(tpath + ".stages[" + std::to_string(st) + "]: expected an array");
      std::vector<std::string> visits;
      for (const auto& v : stages[st]) {
        if (!v.is_string()) throw ConfigError(tpath + ".stages[" + std::to_string(st) + "]: expected service ids");
        visits.push_back(v.get<std::string>());
      }
      rt.stages.push_back(std::move(visits));
    }
    t.finish();
    cfg.application.request_types.push_back(std::move(rt));
  }
  cfg.composition = r.number_map("composition");
  r.finish();
}

}  // namespace detail

// Parses and validates. Every error names the offending field path.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::ObjectReader;
  ExperimentConfig cfg;
  ObjectReader root(j, "");
  cfg.seed = static_cast<std::uint64_t>(root.integer("seed", 1));
  cfg.output_dir = root.string("output_dir", cfg.output_dir);

  if (auto s = root.child("sim")) {
    cfg.sim.period_ms = s->number("period_ms", cfg.sim.period_ms);
    cfg.sim.periods_per_window = static_cast<int>(s->integer("periods_per_window", cfg.sim.periods_per_window));
    cfg.sim.hop_delay_ms = s->number("hop_delay_ms", cfg.sim.hop_delay_ms);
    s->finish();
  }
  if (auto s = root.child("slo")) {
    cfg.slo_percentile = s->number("percentile", cfg.slo_percentile);
    cfg.slo_ms = s->number("threshold_ms", cfg.slo_ms);
    s->finish();
  }
  if (!(cfg.slo_percentile > 0.0 && cfg.slo_percentile < 1.0)) throw ConfigError("slo.percentile: must be in (0, 1)");
  if (!(cfg.slo_ms > 0.0)) throw ConfigError("slo.threshold_ms: must be > 0");

  auto app = root.child("application");
  if (!app) throw ConfigError("application: required");
  detail::parse_application(*app, cfg);

  if (auto t = root.child("trace")) {
    cfg.trace.kind = workload::parse_trace_kind(t->string("kind", "constant"));
    cfg.trace.duration_s = static_cast<int>(t->integer("duration_s", cfg.trace.duration_s));
    cfg.trace.rps_min = t->number("rps_min", cfg.trace.rps_min);
    cfg.trace.rps_avg = t->number("rps_avg", cfg.trace.rps_avg);
    cfg.trace.rps_max = t->number("rps_max", cfg.trace.rps_max);
    if (t->has("file")) cfg.trace.file = t->string("file", "");
    t->finish();
  }
  if (!cfg.trace.file && !(cfg.trace.rps_min >= 0.0 && cfg.trace.rps_min <= cfg.trace.rps_avg &&
                           cfg.trace.rps_avg <= cfg.trace.rps_max))
    throw ConfigError("trace: need 0 <= rps_min <= rps_avg <= rps_max");
  if (cfg.trace.duration_s <= 0) throw ConfigError("trace.duration_s: must be > 0");

  if (auto d = root.child("durations")) {
    cfg.warmup_s = d->number("warmup_s", cfg.warmup_s);
    cfg.measurement_hours = d->number("measurement_hours", cfg.measurement_hours);
    d->finish();
  }
  if (!(cfg.warmup_s >= 0.0)) throw ConfigError("durations.warmup_s: must be >= 0");
  if (!(cfg.measurement_hours > 0.0)) throw ConfigError("durations.measurement_hours: must be > 0");

  auto& ctl = cfg.controller;
  ctl.tower.slo_ms = cfg.slo_ms;
  ctl.tower.slo_percentile = cfg.slo_percentile;
  ctl.tower.alloc_norm_max_cores = cfg.total_quota_max();
  ctl.tower.latency_norm_max_ms = 5.0 * cfg.slo_ms;
  ctl.tower.seed = cfg.seed * 7919 + 17;
  if (auto c = root.child("controller")) {
    ctl.kind = detail::parse_controller_kind(c->string("kind", "autothrottle"), c->path("kind"));
    ctl.warmup_target = c->number("warmup_target", ctl.warmup_target);
    if (auto cp = c->child("captain")) {
      auto& p = ctl.captain;
      p.window_periods = static_cast<int>(cp->integer("N", p.window_periods));
      p.history_periods = static_cast<int>(cp->integer("M", p.history_periods));
      p.alpha = cp->number("alpha", p.alpha);
      p.beta_max = cp->number("beta_max", p.beta_max);
      p.beta_min = cp->number("beta_min", p.beta_min);
      p.initial_margin = cp->number("initial_margin", p.initial_margin);
      cp->finish();
    }
    if (auto tw = c->child("tower")) {
      auto& p = ctl.tower;
      p.epsilon = tw->number("epsilon", p.epsilon);
      p.exploration_stage_steps = static_cast<int>(tw->integer("exploration_stage_steps", p.exploration_stage_steps));
      p.exploration_hold_steps = static_cast<int>(tw->integer("exploration_hold_steps", p.exploration_hold_steps));
      p.training_samples_per_update =
          static_cast<int>(tw->integer("training_samples_per_update", p.training_samples_per_update));
      p.alloc_norm_max_cores = tw->number("alloc_norm_max_cores", p.alloc_norm_max_cores);
      p.latency_norm_max_ms = tw->number("latency_norm_max_ms", p.latency_norm_max_ms);
      p.bin_size = tw->number("bin_size", p.bin_size);
      p.context_scale_rps = tw->number("context_scale_rps", p.context_scale_rps);
      const auto model = tw->string("model", p.model == tower::ModelKind::kLinear ? "linear" : "neural");
      if (model == "neural")
        p.model = tower::ModelKind::kNeural;
      else if (model == "linear")
        p.model = tower::ModelKind::kLinear;
      else
        throw ConfigError(tw->path("model") + ": expected 'neural' or 'linear'");
      static const std::map<std::string, tower::ContextEncoding> kEncodings{
          {"one-hot", tower::ContextEncoding::kOneHot},
          {"scalar", tower::ContextEncoding::kScalar},
          {"both", tower::ContextEncoding::kBoth}};
      std::string enc_default;
      for (const auto& [name, e] : kEncodings)
        if (e == p.encoding) enc_default = name;
      const auto encoding = tw->string("encoding", enc_default);
      const auto enc = kEncodings.find(encoding);
      if (enc == kEncodings.end()) throw ConfigError(tw->path("encoding") + ": expected 'one-hot', 'scalar' or 'both'");
      p.encoding = enc->second;
      p.hidden_units = static_cast<int>(tw->integer("hidden_units", p.hidden_units));
      p.learning_rate = tw->number("learning_rate", p.learning_rate);
      ctl.learning_steps = static_cast<int>(tw->integer("learning_steps", ctl.learning_steps));
      ctl.learning_epsilon = tw->number("learning_epsilon", ctl.learning_epsilon);
      ctl.measurement_epsilon = tw->number("measurement_epsilon", p.epsilon);
      tw->finish();
    }
    if (auto k = c->child("k8s")) {
      ctl.k8s = ctl.kind == ControllerKind::kK8sCpuFast ? baselines::K8sParams::fast(0.5)
                                                        : baselines::K8sParams::standard(0.5);
      ctl.k8s.utilization_threshold = k->number("utilization_threshold", ctl.k8s.utilization_threshold);
      ctl.k8s.measure_interval_s = k->number("measure_interval_s", ctl.k8s.measure_interval_s);
      ctl.k8s.lookback_s = k->number("lookback_s", ctl.k8s.lookback_s);
      k->finish();
    } else if (ctl.kind == ControllerKind::kK8sCpuFast) {
      ctl.k8s = baselines::K8sParams::fast(0.5);
    }
    if (auto s = c->child("static")) {
      ctl.static_default_cores = s->number("default_cores", ctl.static_default_cores);
      ctl.static_cores = s->number_map("cores");
      s->finish();
    }
    if (auto t = c->child("targets")) {
      ctl.target_high = t->number("high", ctl.target_high);
      ctl.target_low = t->number("low", ctl.target_low);
      t->finish();
    }
    c->finish();
  }

  if (auto c = root.child("correlate")) {
    auto& s = cfg.correlate;
    s.services = c->strings("services", s.services);
    s.rps = c->number("rps", s.rps);
    s.points = static_cast<int>(c->integer("points", s.points));
    if (c->has("quota_lo")) s.quota_lo = c->number("quota_lo", 0.0);
    if (c->has("quota_hi")) s.quota_hi = c->number("quota_hi", 0.0);
    s.duration_s = c->number("duration_s", s.duration_s);
    s.warmup_s = c->number("warmup_s", s.warmup_s);
    c->finish();
  }
  if (auto c = root.child("sweep")) {
    cfg.sweep.thresholds = c->numbers("thresholds", cfg.sweep.thresholds);
    c->finish();
  }
  if (auto c = root.child("fluctuate")) {
    auto& s = cfg.fluctuation;
    s.base_rps = c->number("base_rps", s.base_rps);
    s.ranges = c->numbers("ranges", s.ranges);
    s.windows = static_cast<int>(c->integer("windows", s.windows));
    s.window_s = c->number("window_s", s.window_s);
    s.resample_s = c->number("resample_s", s.resample_s);
    s.settle_s = c->number("settle_s", s.settle_s);
    s.tune_targets = c->boolean("tune_targets", s.tune_targets);
    s.tune_duration_s = c->number("tune_duration_s", s.tune_duration_s);
    c->finish();
  }
  root.finish();

  // Cross-field validation, still before any simulation state exists.
  cfg.sim.validate();
  const sim::CompiledApp compiled(cfg.application);
  workload::ArrivalSampler sampler_check(compiled, cfg.composition);
  (void)sampler_check;
  ctl.captain.validate();
  ctl.tower.validate();
  if (!(ctl.learning_steps >= 0)) throw ConfigError("controller.tower.learning_steps: must be >= 0");
  if (!(ctl.learning_epsilon >= 0.0 && ctl.learning_epsilon <= 1.0))
    throw ConfigError("controller.tower.learning_epsilon: must be in [0, 1]");
  if (!(ctl.measurement_epsilon >= 0.0 && ctl.measurement_epsilon <= 1.0))
    throw ConfigError("controller.tower.measurement_epsilon: must be in [0, 1]");
  if (ctl.kind == ControllerKind::kK8sCpu || ctl.kind == ControllerKind::kK8sCpuFast) ctl.k8s.validate();
  if (ctl.kind == ControllerKind::kFixedTargets) {
    if (!ctl.captain.supports_target(ctl.target_high)) throw ConfigError("controller.targets.high: outside [0, 1/alpha)");
    if (!ctl.captain.supports_target(ctl.target_low)) throw ConfigError("controller.targets.low: outside [0, 1/alpha)");
  }
  if (!ctl.captain.supports_target(ctl.warmup_target)) throw ConfigError("controller.warmup_target: outside [0, 1/alpha)");
  for (const auto& [id, cores] : ctl.static_cores)
    if (!compiled.service_index(id)) throw ConfigError("controller.static.cores." + id + ": unknown service");
  for (const auto& id : cfg.correlate.services)
    if (!compiled.service_index(id)) throw ConfigError("correlate.services: unknown service '" + id + "'");
  return cfg;
}

inline nlohmann::json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

inline ExperimentConfig load_config(const std::string& path) { return parse_config(read_config_json(path)); }

}  // namespace autothrottle::harness
