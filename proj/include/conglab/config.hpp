#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "conglab/design.hpp"
#include "conglab/errors.hpp"
#include "conglab/model.hpp"
#include "conglab/scenario.hpp"
#include "conglab/trace.hpp"

namespace conglab {

struct ZetaRule {
  double c = 0.5;
  double gamma = 0.3;
};

struct ExperimentConfig {
  std::string scenario_name;
  ParamMap scenario_params;
  std::optional<int> ed_trace_weeks;
  std::optional<Trace> trace;
  Design design;
  double horizon_T = 0.0;
  std::optional<double> zeta;
  std::optional<ZetaRule> zeta_rule;
  int replications = 1;
  std::uint64_t master_seed = 0;
  std::vector<double> kernel_lengths;
  std::optional<double> truncation_C;
  int initial_state = 0;
  double burn_in = 0.0;
  double alpha = 0.05;
  std::string output;
};

inline void set_design_zeta(Design& d, double zeta) {
  std::visit(
      [&](auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, FixedPrice>) {
          throw BadConfig("zeta has no meaning for a fixed-price design");
        } else {
          spec.zeta = zeta;
        }
      },
      d);
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) throw BadConfig("replications must be >= 1");
  if (!(cfg.horizon_T > 0.0)) throw BadConfig("horizon_T must be > 0");
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0)) throw BadConfig("alpha must lie in (0, 1)");
  bool has_scenario = !cfg.scenario_name.empty();
  bool has_trace = cfg.ed_trace_weeks.has_value() || cfg.trace.has_value();
  if (has_scenario == has_trace) {
    throw BadConfig("config needs exactly one of scenario or trace");
  }
  if (cfg.zeta && cfg.zeta_rule) throw BadConfig("give zeta or zeta_rule, not both");
  if (cfg.zeta_rule) {
    if (!(cfg.zeta_rule->gamma > 0.25) || !(cfg.zeta_rule->gamma < 0.5)) {
      throw BadConfig("zeta_rule gamma must lie in (0.25, 0.5)");
    }
    if (!(cfg.zeta_rule->c > 0.0)) throw BadConfig("zeta_rule c must be > 0");
  }
  for (double s : cfg.kernel_lengths) {
    if (!(s > 0.0)) throw BadConfig("kernel lengths must be > 0");
  }
  if (cfg.truncation_C && !(*cfg.truncation_C > 0.0)) {
    throw BadConfig("truncation_C must be > 0");
  }
  if (cfg.burn_in < 0.0) throw BadConfig("burn_in must be >= 0");
}

// Design with the config-level zeta (fixed value or rule) applied.
inline Design resolved_design(const ExperimentConfig& cfg) {
  Design d = cfg.design;
  if (cfg.zeta) {
    set_design_zeta(d, *cfg.zeta);
  } else if (cfg.zeta_rule) {
    set_design_zeta(d, cfg.zeta_rule->c * std::pow(cfg.horizon_T, -cfg.zeta_rule->gamma));
  }
  return d;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw BadConfig("config must be a JSON object");
  ExperimentConfig cfg;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "scenario") {
        cfg.scenario_name = val.at("name").get<std::string>();
        if (val.contains("params")) {
          for (const auto& [p, v] : val.at("params").items()) {
            cfg.scenario_params[p] = v.get<double>();
          }
        }
      } else if (key == "trace") {
        if (val.at("build").get<std::string>() != "ed") {
          throw BadConfig("unknown trace build (expected \"ed\")");
        }
        cfg.ed_trace_weeks = val.at("weeks").get<int>();
      } else if (key == "design") {
        cfg.design = design_from_json(val);
      } else if (key == "horizon_T") {
        cfg.horizon_T = val.get<double>();
      } else if (key == "zeta") {
        cfg.zeta = val.get<double>();
      } else if (key == "zeta_rule") {
        ZetaRule rule;
        if (val.contains("c")) rule.c = val.at("c").get<double>();
        if (val.contains("gamma")) rule.gamma = val.at("gamma").get<double>();
        cfg.zeta_rule = rule;
      } else if (key == "replications") {
        cfg.replications = val.get<int>();
      } else if (key == "master_seed") {
        cfg.master_seed = val.get<std::uint64_t>();
      } else if (key == "kernel_lengths") {
        cfg.kernel_lengths = val.get<std::vector<double>>();
      } else if (key == "truncation_C") {
        cfg.truncation_C = val.get<double>();
      } else if (key == "initial_state") {
        cfg.initial_state = val.get<int>();
      } else if (key == "burn_in") {
        cfg.burn_in = val.get<double>();
      } else if (key == "alpha") {
        cfg.alpha = val.get<double>();
      } else if (key == "output") {
        cfg.output = val.get<std::string>();
      } else {
        throw BadConfig("unknown config key: " + key);
      }
    } catch (const nlohmann::json::exception& ex) {
      throw BadConfig("config key \"" + key + "\": " + ex.what());
    }
  }
  if (!j.contains("design")) throw BadConfig("config needs a design");
  validate_config(cfg);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadConfig("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw BadConfig(std::string("config is not valid JSON: ") + ex.what());
  }
  return config_from_json(j);
}

}  // namespace conglab
