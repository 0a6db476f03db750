#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "autothrottle/errors.hpp"

namespace autothrottle::sim {

struct ServiceSpec {
  std::string id;
  // CPU-milliseconds consumed per visit, keyed by request type. Types missing
  // here cost nothing at this service.
  std::map<std::string, double> demand_ms_per_request;
  double quota_min_cores = 0.1;
  double quota_max_cores = 8.0;
  // Rate at which queued work is drained while budget remains (cores).
  // Defaults to quota_max_cores.
  std::optional<double> burst_cores;
};

// A request type is an ordered list of stages; the visits inside one stage run
// in parallel and the stage finishes with its slowest visit.
struct RequestType {
  std::string name;
  std::vector<std::vector<std::string>> stages;
};

struct Application {
  std::vector<ServiceSpec> services;
  std::vector<RequestType> request_types;
};

struct Visit {
  std::size_t service;
  double demand_ms;
};

// Index-resolved, validated form of an Application used by the engine.
class CompiledApp {
 public:
  explicit CompiledApp(Application app) : app_(std::move(app)) {
    if (app_.services.empty()) throw ConfigError("application.services: at least one service required");
    if (app_.request_types.empty()) throw ConfigError("application.request_types: at least one type required");
    for (std::size_t s = 0; s < app_.services.size(); ++s) {
      const auto& svc = app_.services[s];
      const std::string path = "application.services[" + std::to_string(s) + "]";
      if (svc.id.empty()) throw ConfigError(path + ".id: empty");
      if (!service_index_.emplace(svc.id, s).second) throw ConfigError(path + ".id: duplicate '" + svc.id + "'");
      if (!(std::isfinite(svc.quota_min_cores) && svc.quota_min_cores > 0.0))
        throw ConfigError(path + ".quota_min_cores: must be > 0");
      if (!(std::isfinite(svc.quota_max_cores) && svc.quota_max_cores >= svc.quota_min_cores))
        throw ConfigError(path + ".quota_max_cores: must be >= quota_min_cores");
      if (svc.burst_cores && !(std::isfinite(*svc.burst_cores) && *svc.burst_cores > 0.0))
        throw ConfigError(path + ".burst_cores: must be > 0");
      for (const auto& [type, d] : svc.demand_ms_per_request)
        if (!(std::isfinite(d) && d >= 0.0))
          throw ConfigError(path + ".demand_ms." + type + ": must be finite and >= 0");
    }
    for (std::size_t t = 0; t < app_.request_types.size(); ++t) {
      const auto& rt = app_.request_types[t];
      const std::string path = "application.request_types[" + std::to_string(t) + "]";
      if (rt.name.empty()) throw ConfigError(path + ".name: empty");
      if (!type_index_.emplace(rt.name, t).second) throw ConfigError(path + ".name: duplicate '" + rt.name + "'");
      if (rt.stages.empty()) throw ConfigError(path + ".stages: at least one stage required");
      std::vector<std::vector<Visit>> stages;
      for (std::size_t k = 0; k < rt.stages.size(); ++k) {
        if (rt.stages[k].empty())
          throw ConfigError(path + ".stages[" + std::to_string(k) + "]: empty stage");
        std::vector<Visit> visits;
        for (const auto& sid : rt.stages[k]) {
          auto it = service_index_.find(sid);
          if (it == service_index_.end())
            throw ConfigError(path + ".stages[" + std::to_string(k) + "]: unknown service '" + sid + "'");
          const auto& demands = app_.services[it->second].demand_ms_per_request;
          auto d = demands.find(rt.name);
          visits.push_back({it->second, d == demands.end() ? 0.0 : d->second});
        }
        stages.push_back(std::move(visits));
      }
      stages_.push_back(std::move(stages));
    }
    for (std::size_t s = 0; s < app_.services.size(); ++s)
      for (const auto& [type, d] : app_.services[s].demand_ms_per_request)
        if (!type_index_.contains(type))
          throw ConfigError("application.services[" + std::to_string(s) + "].demand_ms: unknown request type '" +
                            type + "'");
  }

  const Application& app() const noexcept { return app_; }
  std::size_t num_services() const noexcept { return app_.services.size(); }
  std::size_t num_types() const noexcept { return app_.request_types.size(); }
  const ServiceSpec& service(std::size_t s) const { return app_.services.at(s); }
  double burst_cores(std::size_t s) const {
    const auto& svc = app_.services.at(s);
    return svc.burst_cores.value_or(svc.quota_max_cores);
  }
  const std::vector<std::vector<Visit>>& stages(std::size_t type) const { return stages_.at(type); }

  std::optional<std::size_t> service_index(const std::string& id) const {
    auto it = service_index_.find(id);
    if (it == service_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> type_index(const std::string& name) const {
    auto it = type_index_.find(name);
    if (it == type_index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  Application app_;
  std::map<std::string, std::size_t> service_index_;
  std::map<std::string, std::size_t> type_index_;
  std::vector<std::vector<std::vector<Visit>>> stages_;
};

}  // namespace autothrottle::sim
