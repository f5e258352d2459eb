#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "conglab/csv.hpp"
#include "conglab/design.hpp"
#include "conglab/estimators.hpp"
#include "conglab/gradient.hpp"
#include "conglab/mc.hpp"
#include "conglab/scenario.hpp"
#include "conglab/sim.hpp"
#include "conglab/summary.hpp"
#include "conglab/trace.hpp"

namespace conglab {

struct GalleryPanel {
  std::string scenario;
  std::string grid_param;
  std::vector<double> grid;
  ParamMap fixed_params;
  std::string pi_file;
  std::string sigma_file;
};

struct GalleryResult {
  std::vector<GalleryPanel> panels;
  std::string metadata_path;
};

// Analytic panel data: steady-state bars at one parameter value and the
// asymptotic variance curves along a one-parameter sweep, all at p = 1.
inline GalleryResult run_scenario_gallery(const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const double p = 1.0;

  std::vector<GalleryPanel> panels;
  {
    GalleryPanel mm1{"mm1", "lambda", {}, {{"lambda", 0.5}}, "", ""};
    for (int i = 0; i <= 10; ++i) mm1.grid.push_back(0.10 + 0.05 * i);
    panels.push_back(std::move(mm1));
  }
  {
    GalleryPanel zm{"zero_modified", "lambda0", {}, {{"lambda0", 1.0}}, "", ""};
    for (int i = 1; i <= 20; ++i) zm.grid.push_back(0.1 * i);
    panels.push_back(std::move(zm));
  }
  {
    GalleryPanel pl{"power_law", "alpha", {}, {{"alpha", 0.4}}, "", ""};
    for (int i = 1; i <= 10; ++i) pl.grid.push_back(0.1 * i);
    panels.push_back(std::move(pl));
  }
  {
    GalleryPanel cf{"conformity", "lambda", {}, {{"lambda", 2.0}}, "", ""};
    for (int i = 0; i <= 10; ++i) cf.grid.push_back(0.5 + 0.25 * i);
    panels.push_back(std::move(cf));
  }

  nlohmann::json meta;
  meta["price"] = p;
  for (GalleryPanel& panel : panels) {
    fs::path pi_path = fs::path(out_dir) / ("gallery_" + panel.scenario + "_pi.csv");
    fs::path sigma_path = fs::path(out_dir) / ("gallery_" + panel.scenario + "_sigma.csv");

    RateModel fixed = scenario_preset(panel.scenario, panel.fixed_params);
    SteadyState ss = steady_state(fixed, p);
    {
      std::ofstream out = open_for_write(pi_path.string());
      out << "k,pi\n";
      for (std::size_t k = 0; k < ss.pi.size(); ++k) {
        out << k << ',' << fmt_double(ss.pi[k]) << '\n';
      }
    }
    {
      std::ofstream out = open_for_write(sigma_path.string());
      out << panel.grid_param << ",sigma2_model_free,sigma2_idle,sigma2_wde\n";
      for (double value : panel.grid) {
        RateModel m = scenario_preset(panel.scenario, {{panel.grid_param, value}});
        AsymptoticVariances v = asymptotic_variance(m, p);
        out << fmt_double(value) << ',' << fmt_double(v.sigma2_model_free) << ','
            << fmt_double(v.sigma2_idle) << ',' << fmt_double(v.sigma2_wde) << '\n';
      }
    }
    panel.pi_file = pi_path.string();
    panel.sigma_file = sigma_path.string();

    nlohmann::json jp;
    jp["grid_param"] = panel.grid_param;
    jp["grid"] = panel.grid;
    for (const auto& [k, v] : panel.fixed_params) jp["fixed"][k] = v;
    jp["pi_file"] = pi_path.filename().string();
    jp["sigma_file"] = sigma_path.filename().string();
    meta["panels"][panel.scenario] = jp;
  }

  fs::path meta_path = fs::path(out_dir) / "gallery_metadata.json";
  {
    std::ofstream out = open_for_write(meta_path.string());
    out << meta.dump(2) << '\n';
  }
  return GalleryResult{std::move(panels), meta_path.string()};
}

struct NonstatRow {
  std::string estimator;
  double length = 0.0;
  double rmse = 0.0;
  int n_ok = 0;
};

struct NonstatResult {
  double truth = 0.0;
  double horizon_T = 0.0;
  std::vector<NonstatRow> rows;
  std::string csv_path;
  std::string metadata_path;
};

// Interval-length sweep for the switchback estimators and kernel-length
// sweep for the windowed arrival-ratio estimator on one nonstationary
// demand trace; the target is the slot-averaged analytic gradient.
inline NonstatResult run_nonstationary_study(const std::string& out_dir,
                                             std::uint64_t master_seed = 20260818,
                                             int replications = 200) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  const int weeks = 4;
  const double p = 1.0;
  const double zeta = 0.05;
  const std::vector<double> interval_grid = {1.5, 6.0, 24.0, 84.0, 336.0};
  const std::vector<double> kernel_grid = {0.25, 1.5, 6.0, 24.0, 168.0};

  GridTrace grid = build_ed_trace(weeks);
  Trace trace{grid};
  double horizon = grid_trace_span(grid);
  double mu = grid.base.mu;
  double truncation_C = 10.0 * mu;
  double truth = trace_truth(trace, horizon, p);

  NonstatResult result;
  result.truth = truth;
  result.horizon_T = horizon;

  auto rmse_of = [&](const std::vector<std::optional<double>>& values) {
    KahanSum sq;
    int n = 0;
    for (const auto& v : values) {
      if (!v) continue;
      sq.add((*v - truth) * (*v - truth));
      ++n;
    }
    return std::pair<double, int>{n > 0 ? std::sqrt(sq.value() / n) : 0.0, n};
  };

  auto reps = static_cast<std::size_t>(replications);
  for (std::size_t li = 0; li < interval_grid.size(); ++li) {
    IntervalSwitchback sb;
    sb.p = p;
    sb.zeta = zeta;
    sb.interval_length = interval_grid[li];
    sb.assignment = Assignment::balanced_permutation;
    Design design{sb};

    std::vector<std::optional<double>> mf(reps), idle(reps);
    parallel_for(reps, [&](std::size_t r) {
      std::uint64_t seed = derive_seed(master_seed, li * reps + r);
      EventLog log = simulate(trace, design, horizon, seed);
      Summary s = summarize(log);
      try {
        mf[r] = tau_model_free(s).value;
      } catch (const EmptyArm&) {
      }
      try {
        idle[r] = tau_idle_time(s).value;
      } catch (const EmptyArm&) {
      }
    });
    auto [rm, nm] = rmse_of(mf);
    result.rows.push_back({"model_free", interval_grid[li], rm, nm});
    auto [ri, ni] = rmse_of(idle);
    result.rows.push_back({"idle_time", interval_grid[li], ri, ni});
  }

  {
    UserLevel ul;
    ul.p = p;
    ul.zeta = zeta;
    Design design{ul};
    std::vector<EventLog> logs(reps);
    parallel_for(reps, [&](std::size_t r) {
      std::uint64_t seed = derive_seed(master_seed, 1000000 + r);
      logs[r] = simulate(trace, design, horizon, seed);
    });
    for (double s : kernel_grid) {
      std::vector<std::optional<double>> vals(reps);
      parallel_for(reps, [&](std::size_t r) {
        try {
          vals[r] = windowed_estimate(logs[r], s, WindowedKind::ur, truncation_C).value;
        } catch (const KernelTooLong&) {
        } catch (const WrongDesign&) {
        }
      });
      auto [rv, nv] = rmse_of(vals);
      result.rows.push_back({"ur_windowed", s, rv, nv});
    }
  }

  fs::path csv_path = fs::path(out_dir) / "nonstat_rmse.csv";
  {
    std::ofstream out = open_for_write(csv_path.string());
    out << "estimator,length,rmse,n_ok\n";
    for (const NonstatRow& row : result.rows) {
      out << row.estimator << ',' << fmt_double(row.length) << ',' << fmt_double(row.rmse) << ','
          << row.n_ok << '\n';
    }
  }
  fs::path meta_path = fs::path(out_dir) / "nonstat_metadata.json";
  {
    nlohmann::json meta;
    meta["weeks"] = weeks;
    meta["horizon_T"] = horizon;
    meta["price"] = p;
    meta["zeta"] = zeta;
    meta["replications"] = replications;
    meta["master_seed"] = master_seed;
    meta["interval_grid"] = interval_grid;
    meta["kernel_grid"] = kernel_grid;
    meta["truncation_C"] = truncation_C;
    meta["assignment"] = "balanced_permutation";
    meta["truth"] = truth;
    meta["truth_definition"] = "slot-duration-weighted average of the analytic gradient";
    std::ofstream out = open_for_write(meta_path.string());
    out << meta.dump(2) << '\n';
  }
  result.csv_path = csv_path.string();
  result.metadata_path = meta_path.string();
  return result;
}

}  // namespace conglab
