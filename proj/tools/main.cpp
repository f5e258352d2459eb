#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "conglab/conglab.hpp"

namespace {

conglab::ParamMap parse_params(const std::vector<std::string>& kvs) {
  conglab::ParamMap params;
  for (const std::string& kv : kvs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw conglab::BadConfig("expected --param name=value, got '" + kv + "'");
    }
    params[kv.substr(0, eq)] = conglab::parse_double(kv.substr(eq + 1), "--param value");
  }
  return params;
}

void cmd_analytic(const std::string& scenario, double p, const std::vector<std::string>& kvs) {
  using namespace conglab;
  RateModel model = scenario_preset(scenario, parse_params(kvs));
  SteadyState ss = steady_state(model, p);
  GradientReport grad = policy_gradient(model, p);
  AsymptoticVariances var = asymptotic_variance(model, p);
  std::cout << "scenario," << scenario << "\n";
  std::cout << "p," << fmt_double(p) << "\n";
  std::cout << "capacity," << model.capacity << "\n";
  std::cout << "mu," << fmt_double(model.mu) << "\n";
  std::cout << "throughput," << fmt_double(ss.throughput) << "\n";
  std::cout << "pi0," << fmt_double(ss.pi[0]) << "\n";
  std::cout << "gradient_model_free," << fmt_double(grad.value_model_free) << "\n";
  std::cout << "gradient_idle_time," << fmt_double(grad.value_idle_time) << "\n";
  std::cout << "gradient_weighted_direct," << fmt_double(grad.value_weighted_direct) << "\n";
  std::cout << "gradient_max_pairwise_gap," << fmt_double(grad.max_pairwise_gap) << "\n";
  std::cout << "sigma2_model_free," << fmt_double(var.sigma2_model_free) << "\n";
  std::cout << "sigma2_idle," << fmt_double(var.sigma2_idle) << "\n";
  std::cout << "sigma2_wde," << fmt_double(var.sigma2_wde) << "\n";
  std::cout << "sigma2_ur," << fmt_double(var.sigma2_ur) << "\n";
}

void cmd_simulate(const std::string& config_path) {
  using namespace conglab;
  ExperimentConfig cfg = load_config(config_path);
  if (cfg.output.empty()) throw BadConfig("simulate needs a non-empty \"output\" path");
  Design design = resolved_design(cfg);
  std::uint64_t seed = derive_seed(cfg.master_seed, 0);
  EventLog log;
  if (!cfg.scenario_name.empty()) {
    RateModel model = scenario_preset(cfg.scenario_name, cfg.scenario_params);
    log = simulate(model, design, cfg.horizon_T, seed, cfg.initial_state, cfg.burn_in);
  } else if (cfg.trace) {
    log = simulate(*cfg.trace, design, cfg.horizon_T, seed, cfg.initial_state, cfg.burn_in);
  } else {
    Trace trace{build_ed_trace(*cfg.ed_trace_weeks)};
    log = simulate(trace, design, cfg.horizon_T, seed, cfg.initial_state, cfg.burn_in);
  }
  write_event_log(log, cfg.output);
  std::cout << "wrote " << cfg.output << " (" << log.events.size() << " events) and sidecar "
            << cfg.output << ".json\n";
}

struct EstimateRow {
  std::string name;
  std::optional<conglab::Estimate> est;
  std::string error;
};

void cmd_estimate(const std::string& log_path, const std::vector<double>& kernels,
                  std::optional<double> truncation, double alpha, const std::string& out_path) {
  using namespace conglab;
  EventLog log = read_event_log(log_path);
  Summary s = summarize(log);

  std::optional<AsymptoticVariances> vhat;
  if (!is_fixed_price(log.design)) {
    try {
      vhat = variance_estimates(s);
    } catch (const EmptyCell&) {
    }
  }

  std::vector<EstimateRow> rows;
  auto attempt = [&](const std::string& name, auto compute, std::optional<double> sigma2) {
    EstimateRow row;
    row.name = name;
    try {
      Estimate est = compute();
      if (sigma2) est = confidence_interval(est, *sigma2, s.horizon_T, s.zeta, alpha);
      row.est = est;
    } catch (const DataError& ex) {
      row.error = ex.what();
    }
    rows.push_back(std::move(row));
  };

  if (is_user_level(log.design)) {
    attempt("ur", [&] { return tau_ur(s); },
            vhat ? std::optional<double>(vhat->sigma2_ur) : std::nullopt);
    for (double k : kernels) {
      attempt("ur_s=" + fmt_double(k),
              [&] { return windowed_estimate(log, k, WindowedKind::ur, truncation); },
              std::nullopt);
    }
  } else {
    bool fixed = is_fixed_price(log.design);
    auto s2 = [&](double v) {
      return (!fixed && vhat) ? std::optional<double>(v) : std::nullopt;
    };
    attempt("model_free", [&] { return tau_model_free(s); },
            s2(vhat ? vhat->sigma2_model_free : 0.0));
    attempt("idle_time", [&] { return tau_idle_time(s); }, s2(vhat ? vhat->sigma2_idle : 0.0));
    attempt("wde", [&] { return tau_wde(s); }, s2(vhat ? vhat->sigma2_wde : 0.0));
    for (double k : kernels) {
      attempt("wde_s=" + fmt_double(k),
              [&] { return windowed_estimate(log, k, WindowedKind::wde, truncation); },
              std::nullopt);
    }
  }

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file = open_for_write(out_path);
    out = &file;
  }
  *out << "estimator,value,sigma2_hat,ci_low,ci_high,skipped_states\n";
  for (const EstimateRow& row : rows) {
    *out << row.name << ',';
    if (row.est) {
      const Estimate& e = *row.est;
      *out << fmt_double(e.value) << ',' << (e.sigma2_hat ? fmt_double(*e.sigma2_hat) : "")
           << ',' << (e.ci_low ? fmt_double(*e.ci_low) : "") << ','
           << (e.ci_high ? fmt_double(*e.ci_high) : "") << ',';
      for (std::size_t i = 0; i < e.skipped_states.size(); ++i) {
        if (i) *out << ';';
        *out << e.skipped_states[i];
      }
    } else {
      *out << ",,,," << "error: " << row.error;
    }
    *out << '\n';
  }
  if (!out_path.empty()) std::cout << "wrote " << out_path << "\n";
}

void cmd_mc(const std::string& config_path) {
  using namespace conglab;
  ExperimentConfig cfg = load_config(config_path);
  McResult result = run_mc(cfg);
  std::cout << "truth," << fmt_double(result.truth) << "\n";
  std::cout << "estimator,n_ok,mean,bias,variance,scaled_mse,coverage\n";
  for (const McAggregate& a : result.aggregates) {
    std::cout << a.estimator << ',' << a.n_ok << ',' << fmt_double(a.mean) << ','
              << fmt_double(a.bias) << ',' << fmt_double(a.variance) << ','
              << fmt_double(a.scaled_mse) << ','
              << (a.coverage ? fmt_double(*a.coverage) : "") << "\n";
  }
  if (!result.rows_path.empty()) {
    std::cout << "wrote " << result.rows_path << " and " << result.agg_path << "\n";
  }
}

void cmd_trace(const std::string& build, int weeks, const std::string& out_path) {
  using namespace conglab;
  if (build != "ed") throw BadConfig("unknown trace build '" + build + "' (expected \"ed\")");
  GridTrace trace = build_ed_trace(weeks);
  write_trace_csv(trace, out_path);
  std::cout << "wrote " << out_path << " (" << trace.multipliers.size() << " slots of "
            << fmt_double(trace.slot_length) << "h, horizon "
            << fmt_double(grid_trace_span(trace)) << "h)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized pricing experiments on a single-server queue: "
               "analytic solver, simulator, estimators, Monte Carlo harness"};
  app.require_subcommand(1);

  std::string scenario = "mm1";
  double price = 1.0;
  std::vector<std::string> params;
  auto* analytic = app.add_subcommand("analytic", "Steady state, gradient, variances");
  analytic->add_option("--scenario", scenario, "Scenario preset name")->required();
  analytic->add_option("--p", price, "Base price");
  analytic->add_option("--param", params, "Scenario parameter override name=value");

  std::string sim_config;
  auto* sim = app.add_subcommand("simulate", "Simulate one event log from a config");
  sim->add_option("--config", sim_config, "JSON experiment config")->required();

  std::string log_path, est_out;
  std::vector<double> kernels;
  std::optional<double> truncation;
  double alpha = 0.05;
  auto* est = app.add_subcommand("estimate", "Estimate from an event log CSV + sidecar");
  est->add_option("--log", log_path, "Event log CSV path")->required();
  est->add_option("--kernel", kernels, "Kernel length(s) for windowed estimators");
  est->add_option("--truncation", truncation, "Clamp for windowed inner values");
  est->add_option("--alpha", alpha, "CI significance level");
  est->add_option("--out", est_out, "Output CSV path (default stdout)");

  std::string mc_config;
  auto* mc = app.add_subcommand("mc", "Monte Carlo replication study from a config");
  mc->add_option("--config", mc_config, "JSON experiment config")->required();

  std::string trace_build = "ed", trace_out;
  int trace_weeks = 4;
  auto* trace = app.add_subcommand("trace", "Build a demand multiplier trace CSV");
  trace->add_option("--build", trace_build, "Trace family (ed)")->required();
  trace->add_option("--weeks", trace_weeks, "Number of weeks");
  trace->add_option("--out", trace_out, "Output CSV path")->required();

  std::string gallery_out;
  auto* gallery = app.add_subcommand("gallery", "Analytic scenario gallery CSV bundle");
  gallery->add_option("--out", gallery_out, "Output directory")->required();

  std::string nonstat_out;
  std::uint64_t nonstat_seed = 20260818;
  int nonstat_reps = 200;
  auto* nonstat = app.add_subcommand("nonstat", "Nonstationary design sweep study");
  nonstat->add_option("--out", nonstat_out, "Output directory")->required();
  nonstat->add_option("--seed", nonstat_seed, "Master seed");
  nonstat->add_option("--replications", nonstat_reps, "Replicates per grid point");

  try {
    app.parse(argc, argv);
    if (*analytic) {
      cmd_analytic(scenario, price, params);
    } else if (*sim) {
      cmd_simulate(sim_config);
    } else if (*est) {
      cmd_estimate(log_path, kernels, truncation, alpha, est_out);
    } else if (*mc) {
      cmd_mc(mc_config);
    } else if (*trace) {
      cmd_trace(trace_build, trace_weeks, trace_out);
    } else if (*gallery) {
      conglab::GalleryResult g = conglab::run_scenario_gallery(gallery_out);
      std::cout << "wrote " << g.panels.size() << " panels and " << g.metadata_path << "\n";
    } else if (*nonstat) {
      conglab::NonstatResult n =
          conglab::run_nonstationary_study(nonstat_out, nonstat_seed, nonstat_reps);
      std::cout << "wrote " << n.csv_path << " (truth " << conglab::fmt_double(n.truth)
                << ")\n";
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const conglab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const conglab::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
