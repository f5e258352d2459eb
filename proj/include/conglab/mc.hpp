#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "conglab/config.hpp"
#include "conglab/csv.hpp"
#include "conglab/design.hpp"
#include "conglab/errors.hpp"
#include "conglab/estimators.hpp"
#include "conglab/gradient.hpp"
#include "conglab/rng.hpp"
#include "conglab/sim.hpp"
#include "conglab/summary.hpp"
#include "conglab/trace.hpp"

namespace conglab {

struct McRow {
  int replicate = 0;
  std::string estimator;
  std::optional<double> estimate;
  std::optional<double> sigma2_hat;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<bool> covered;
  std::string error;
};

struct McAggregate {
  std::string estimator;
  int n_ok = 0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double scaled_mse = 0.0;
  std::optional<double> coverage;
};

struct McResult {
  double truth = 0.0;
  double horizon_T = 0.0;
  double zeta = 0.0;
  std::vector<McRow> rows;
  std::vector<McAggregate> aggregates;
  std::string rows_path;
  std::string agg_path;
};

inline unsigned worker_count(std::size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("CONGESTION_LAB_THREADS")) {
    long cap = parse_long(env, "CONGESTION_LAB_THREADS");
    if (cap < 1) throw BadConfig("CONGESTION_LAB_THREADS must be >= 1");
    hw = static_cast<unsigned>(std::min<long>(cap, hw));
  }
  return static_cast<unsigned>(std::min<std::size_t>(hw, std::max<std::size_t>(jobs, 1)));
}

// Work-stealing loop over [0, n); results must be written to pre-sized
// per-index slots so the outcome is independent of scheduling.
template <typename Fn>
inline void parallel_for(std::size_t n, Fn&& fn) {
  unsigned workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto loop = [&] {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline double gradient_truth(const RateModel& model, double p) {
  return policy_gradient(model, p).value_weighted_direct;
}

// Time-average of the analytic gradient over the nonstationary environment.
inline double trace_truth(const Trace& trace, double horizon, double p) {
  validate_trace(trace);
  if (const auto* pw = std::get_if<PiecewiseTrace>(&trace)) {
    KahanSum sum;
    for (std::size_t b = 0; b < pw->regimes.size(); ++b) {
      sum.add((pw->breakpoints[b + 1] - pw->breakpoints[b]) * gradient_truth(pw->regimes[b], p));
    }
    return sum.value();
  }
  const auto& g = std::get<GridTrace>(trace);
  std::map<double, double> cache;
  KahanSum sum;
  for (std::size_t s = 0; s < g.multipliers.size(); ++s) {
    double start = static_cast<double>(s) * g.slot_length;
    if (start >= horizon) break;
    double dur = std::min(horizon, start + g.slot_length) - start;
    double mult = g.multipliers[s];
    auto it = cache.find(mult);
    if (it == cache.end()) {
      it = cache.emplace(mult, gradient_truth(scale_arrivals(g.base, mult), p)).first;
    }
    sum.add(dur * it->second);
  }
  return sum.value() / horizon;
}

namespace detail {

inline std::string sanitize_csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

struct EstimatorPlan {
  std::vector<std::string> names;
  bool user_level = false;
  bool fixed = false;
};

inline EstimatorPlan make_plan(const ExperimentConfig& cfg, const Design& design) {
  EstimatorPlan plan;
  plan.user_level = is_user_level(design);
  plan.fixed = is_fixed_price(design);
  if (plan.user_level) {
    plan.names.push_back("ur");
    for (double s : cfg.kernel_lengths) plan.names.push_back("ur_s=" + fmt_double(s));
  } else {
    plan.names = {"model_free", "idle_time", "wde"};
    for (double s : cfg.kernel_lengths) plan.names.push_back("wde_s=" + fmt_double(s));
  }
  return plan;
}

template <typename Fn>
inline void fill_row(McRow& row, Fn&& fn) {
  try {
    fn();
  } catch (const EmptyArm&) {
    row.error = "EmptyArm";
  } catch (const EmptyCell&) {
    row.error = "EmptyCell";
  } catch (const WrongDesign&) {
    row.error = "WrongDesign";
  } catch (const KernelTooLong&) {
    row.error = "KernelTooLong";
  } catch (const DataError& ex) {
    row.error = sanitize_csv_field(std::string("DataError: ") + ex.what());
  } catch (const ConfigError& ex) {
    row.error = sanitize_csv_field(std::string("ConfigError: ") + ex.what());
  }
}

inline void attach_ci(McRow& row, const Estimate& est, double sigma2, double horizon, double zeta,
                      double alpha, double truth) {
  Estimate with_ci = confidence_interval(est, sigma2, horizon, zeta, alpha);
  row.sigma2_hat = sigma2;
  row.ci_low = with_ci.ci_low;
  row.ci_high = with_ci.ci_high;
  row.covered = truth >= *with_ci.ci_low && truth <= *with_ci.ci_high;
}

}  // namespace detail

inline McResult run_mc(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Design design = resolved_design(cfg);

  std::optional<RateModel> model;
  std::optional<Trace> trace;
  if (!cfg.scenario_name.empty()) {
    model = scenario_preset(cfg.scenario_name, cfg.scenario_params);
  } else if (cfg.trace) {
    trace = *cfg.trace;
  } else {
    trace = Trace{build_ed_trace(*cfg.ed_trace_weeks)};
  }

  double p = design_price(design);
  double zeta = design_zeta(design);
  double truth =
      model ? gradient_truth(*model, p) : trace_truth(*trace, cfg.horizon_T, p);
  detail::EstimatorPlan plan = detail::make_plan(cfg, design);

  auto replications = static_cast<std::size_t>(cfg.replications);
  std::vector<std::vector<McRow>> per_rep(replications);
  parallel_for(replications, [&](std::size_t r) {
    std::uint64_t seed = derive_seed(cfg.master_seed, r);
    EventLog log = model ? simulate(*model, design, cfg.horizon_T, seed, cfg.initial_state,
                                    cfg.burn_in)
                         : simulate(*trace, design, cfg.horizon_T, seed, cfg.initial_state,
                                    cfg.burn_in);
    Summary s = summarize(log);

    std::optional<AsymptoticVariances> vhat;
    if (!plan.fixed) {
      try {
        vhat = variance_estimates(s);
      } catch (const EmptyCell&) {
      }
    }

    std::vector<McRow>& rows = per_rep[r];
    rows.resize(plan.names.size());
    for (std::size_t i = 0; i < plan.names.size(); ++i) {
      rows[i].replicate = static_cast<int>(r);
      rows[i].estimator = plan.names[i];
    }

    auto core = [&](std::size_t i, auto estimator, double sigma2_field) {
      detail::fill_row(rows[i], [&] {
        Estimate est = estimator(s);
        rows[i].estimate = est.value;
        if (vhat && !plan.fixed) {
          detail::attach_ci(rows[i], est, sigma2_field, cfg.horizon_T, zeta, cfg.alpha, truth);
        }
      });
    };

    if (plan.user_level) {
      core(0, [](const Summary& sum) { return tau_ur(sum); },
           vhat ? vhat->sigma2_ur : 0.0);
      for (std::size_t ki = 0; ki < cfg.kernel_lengths.size(); ++ki) {
        std::size_t i = 1 + ki;
        detail::fill_row(rows[i], [&] {
          Estimate est = windowed_estimate(log, cfg.kernel_lengths[ki], WindowedKind::ur,
                                           cfg.truncation_C);
          rows[i].estimate = est.value;
        });
      }
    } else {
      core(0, [](const Summary& sum) { return tau_model_free(sum); },
           vhat ? vhat->sigma2_model_free : 0.0);
      core(1, [](const Summary& sum) { return tau_idle_time(sum); },
           vhat ? vhat->sigma2_idle : 0.0);
      core(2, [](const Summary& sum) { return tau_wde(sum); },
           vhat ? vhat->sigma2_wde : 0.0);
      for (std::size_t ki = 0; ki < cfg.kernel_lengths.size(); ++ki) {
        std::size_t i = 3 + ki;
        detail::fill_row(rows[i], [&] {
          Estimate est =
              windowed_estimate(log, cfg.kernel_lengths[ki], WindowedKind::wde, std::nullopt);
          rows[i].estimate = est.value;
        });
      }
    }
  });

  McResult result;
  result.truth = truth;
  result.horizon_T = cfg.horizon_T;
  result.zeta = zeta;
  for (auto& rows : per_rep) {
    for (auto& row : rows) result.rows.push_back(std::move(row));
  }

  for (std::size_t i = 0; i < plan.names.size(); ++i) {
    McAggregate agg;
    agg.estimator = plan.names[i];
    agg.truth = truth;
    KahanSum sum, sum_sq_err;
    std::vector<double> values;
    long covered_n = 0, ci_n = 0;
    for (const McRow& row : result.rows) {
      if (row.estimator != agg.estimator || !row.error.empty() || !row.estimate) continue;
      values.push_back(*row.estimate);
      sum.add(*row.estimate);
      double err = *row.estimate - truth;
      sum_sq_err.add(err * err);
      if (row.covered) {
        ++ci_n;
        if (*row.covered) ++covered_n;
      }
    }
    agg.n_ok = static_cast<int>(values.size());
    if (agg.n_ok > 0) {
      agg.mean = sum.value() / agg.n_ok;
      agg.bias = agg.mean - truth;
      agg.scaled_mse = cfg.horizon_T * zeta * zeta * sum_sq_err.value() / agg.n_ok;
      if (agg.n_ok > 1) {
        KahanSum centered;
        for (double v : values) centered.add((v - agg.mean) * (v - agg.mean));
        agg.variance = centered.value() / (agg.n_ok - 1);
      }
    }
    if (ci_n > 0) agg.coverage = static_cast<double>(covered_n) / static_cast<double>(ci_n);
    result.aggregates.push_back(std::move(agg));
  }

  if (!cfg.output.empty()) {
    std::filesystem::path rows_path(cfg.output);
    if (rows_path.has_parent_path()) std::filesystem::create_directories(rows_path.parent_path());
    std::filesystem::path agg_path = rows_path;
    agg_path.replace_extension(".agg.csv");

    auto opt_field = [](const std::optional<double>& v) { return v ? fmt_double(*v) : ""; };
    {
      std::ofstream out = open_for_write(rows_path.string());
      out << "replicate,estimator,estimate,sigma2_hat,ci_low,ci_high,covered,error\n";
      for (const McRow& row : result.rows) {
        out << row.replicate << ',' << row.estimator << ',' << opt_field(row.estimate) << ','
            << opt_field(row.sigma2_hat) << ',' << opt_field(row.ci_low) << ','
            << opt_field(row.ci_high) << ',' << (row.covered ? (*row.covered ? "1" : "0") : "")
            << ',' << row.error << '\n';
      }
    }
    {
      std::ofstream out = open_for_write(agg_path.string());
      out << "estimator,n_ok,truth,mean,bias,variance,scaled_mse,coverage\n";
      for (const McAggregate& agg : result.aggregates) {
        out << agg.estimator << ',' << agg.n_ok << ',' << fmt_double(agg.truth) << ','
            << fmt_double(agg.mean) << ',' << fmt_double(agg.bias) << ','
            << fmt_double(agg.variance) << ',' << fmt_double(agg.scaled_mse) << ','
            << (agg.coverage ? fmt_double(*agg.coverage) : "") << '\n';
      }
    }
    result.rows_path = rows_path.string();
    result.agg_path = agg_path.string();
  }
  return result;
}

}  // namespace conglab
