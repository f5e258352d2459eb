#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "conglab/config.hpp"
#include "conglab/csv.hpp"
#include "conglab/estimators.hpp"
#include "conglab/event_log.hpp"
#include "conglab/gradient.hpp"
#include "conglab/mc.hpp"
#include "conglab/scenario.hpp"
#include "conglab/studies.hpp"
#include "conglab/summary.hpp"

#ifndef CONGLAB_CLI_PATH
#define CONGLAB_CLI_PATH "conglab"
#endif

using namespace conglab;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  std::string cmd = std::string("\"") + CONGLAB_CLI_PATH + "\" " + args;
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split_csv_line(line));
  }
  return rows;
}

ExperimentConfig small_mc_config(const fs::path& out) {
  nlohmann::json j = {
      {"scenario", {{"name", "mm1"}}},
      {"design", {{"type", "regenerative_switchback"}, {"p", 1.0}, {"zeta", 0.1}}},
      {"horizon_T", 500.0},
      {"replications", 8},
      {"master_seed", 3},
      {"kernel_lengths", {50.0}},
      {"output", out.string()},
  };
  return config_from_json(j);
}

}  // namespace

TEST_CASE("experiment configs parse all documented fields", "[harness]") {
  nlohmann::json j = {
      {"scenario", {{"name", "zero_modified"}, {"params", {{"lambda0", 1.0}, {"K", 20}}}}},
      {"design",
       {{"type", "interval_switchback"},
        {"p", 1.0},
        {"zeta", 0.05},
        {"interval_length", 10.0},
        {"assignment", "balanced_permutation"}}},
      {"horizon_T", 20000.0},
      {"zeta", 0.051},
      {"replications", 500},
      {"master_seed", 17},
      {"kernel_lengths", {25.0, 100.0}},
      {"truncation_C", 10.0},
      {"initial_state", 2},
      {"burn_in", 50.0},
      {"alpha", 0.1},
      {"output", "rows.csv"},
  };
  ExperimentConfig cfg = config_from_json(j);
  REQUIRE(cfg.scenario_name == "zero_modified");
  REQUIRE(cfg.scenario_params.at("K") == 20.0);
  REQUIRE(design_type_name(cfg.design) == "interval_switchback");
  REQUIRE(cfg.horizon_T == 20000.0);
  REQUIRE(*cfg.zeta == 0.051);
  REQUIRE(cfg.replications == 500);
  REQUIRE(cfg.master_seed == 17);
  REQUIRE(cfg.kernel_lengths == std::vector<double>{25.0, 100.0});
  REQUIRE(*cfg.truncation_C == 10.0);
  REQUIRE(cfg.initial_state == 2);
  REQUIRE(cfg.burn_in == 50.0);
  REQUIRE(cfg.alpha == 0.1);
  REQUIRE(cfg.output == "rows.csv");

  // The config-level zeta overrides the design's own.
  REQUIRE(design_zeta(resolved_design(cfg)) == 0.051);
}

TEST_CASE("the zeta rule resolves to c * T^-gamma", "[harness]") {
  nlohmann::json j = {
      {"scenario", {{"name", "mm1"}}},
      {"design", {{"type", "user_level"}, {"p", 1.0}, {"zeta", 0.5}}},
      {"horizon_T", 10000.0},
      {"zeta_rule", {{"c", 0.5}, {"gamma", 0.3}}},
      {"replications", 1},
  };
  ExperimentConfig cfg = config_from_json(j);
  double expected = 0.5 * std::pow(10000.0, -0.3);
  REQUIRE(design_zeta(resolved_design(cfg)) == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("malformed configs are rejected with config errors", "[harness]") {
  auto base = [] {
    return nlohmann::json{
        {"scenario", {{"name", "mm1"}}},
        {"design", {{"type", "user_level"}, {"p", 1.0}, {"zeta", 0.05}}},
        {"horizon_T", 100.0},
        {"replications", 1},
    };
  };
  {
    auto j = base();
    j["unknown_knob"] = 1;
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["zeta"] = 0.05;
    j["zeta_rule"] = {{"c", 0.5}, {"gamma", 0.3}};
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["zeta_rule"] = {{"gamma", 0.2}};
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["zeta_rule"] = {{"gamma", 0.5}};
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["replications"] = 0;
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j.erase("design");
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["trace"] = {{"build", "ed"}, {"weeks", 1}};
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j.erase("scenario");
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["trace"] = {{"build", "hourly"}, {"weeks", 1}};
    j.erase("scenario");
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["alpha"] = 1.0;
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["kernel_lengths"] = {-5.0};
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }
  {
    auto j = base();
    j["truncation_C"] = 0.0;
    REQUIRE_THROWS_AS(config_from_json(j), BadConfig);
  }

  Design fixed = FixedPrice{1.0};
  REQUIRE_THROWS_AS(set_design_zeta(fixed, 0.05), BadConfig);
}

TEST_CASE("monte carlo output is identical across worker counts", "[harness]") {
  fs::path dir = fresh_dir("conglab_mc_threads");
  ExperimentConfig cfg = small_mc_config(dir / "rows.csv");

  setenv("CONGESTION_LAB_THREADS", "1", 1);
  McResult serial = run_mc(cfg);
  std::string rows_serial = slurp(serial.rows_path);
  std::string agg_serial = slurp(serial.agg_path);

  setenv("CONGESTION_LAB_THREADS", "3", 1);
  McResult threaded = run_mc(cfg);
  unsetenv("CONGESTION_LAB_THREADS");

  REQUIRE(slurp(threaded.rows_path) == rows_serial);
  REQUIRE(slurp(threaded.agg_path) == agg_serial);

  setenv("CONGESTION_LAB_THREADS", "0", 1);
  REQUIRE_THROWS_AS(run_mc(cfg), BadConfig);
  unsetenv("CONGESTION_LAB_THREADS");
  fs::remove_all(dir);
}

TEST_CASE("monte carlo rows support recomputing the aggregates", "[harness]") {
  fs::path dir = fresh_dir("conglab_mc_rows");
  ExperimentConfig cfg = small_mc_config(dir / "rows.csv");
  McResult res = run_mc(cfg);

  REQUIRE(res.truth == Catch::Approx(-0.49999999301508075).margin(1e-12));
  REQUIRE(res.rows.size() == 8 * 4);
  REQUIRE(res.aggregates.size() == 4);
  REQUIRE(res.aggregates[0].estimator == "model_free");
  REQUIRE(res.aggregates[3].estimator == "wde_s=50");

  for (const McAggregate& agg : res.aggregates) {
    KahanSum sum, sq_err;
    std::vector<double> values;
    long cov = 0, cin = 0;
    for (const McRow& row : res.rows) {
      if (row.estimator != agg.estimator || !row.error.empty() || !row.estimate) continue;
      values.push_back(*row.estimate);
      sum.add(*row.estimate);
      sq_err.add((*row.estimate - res.truth) * (*row.estimate - res.truth));
      if (row.covered) {
        ++cin;
        cov += *row.covered;
      }
    }
    REQUIRE(agg.n_ok == static_cast<int>(values.size()));
    REQUIRE(agg.n_ok > 0);
    double mean = sum.value() / agg.n_ok;
    REQUIRE(agg.mean == Catch::Approx(mean).margin(1e-12));
    REQUIRE(agg.bias == Catch::Approx(mean - res.truth).margin(1e-12));
    REQUIRE(agg.scaled_mse ==
            Catch::Approx(cfg.horizon_T * res.zeta * res.zeta * sq_err.value() / agg.n_ok)
                .margin(1e-10));
    if (cin > 0) {
      REQUIRE(*agg.coverage ==
              Catch::Approx(static_cast<double>(cov) / static_cast<double>(cin)).margin(1e-12));
    } else {
      REQUIRE_FALSE(agg.coverage.has_value());
    }
  }

  // Core estimators carry plug-in CIs; windowed rows do not.
  for (const McRow& row : res.rows) {
    if (row.error.empty() && row.estimator == "model_free") REQUIRE(row.sigma2_hat.has_value());
    if (row.estimator == "wde_s=50") REQUIRE_FALSE(row.sigma2_hat.has_value());
  }
  fs::remove_all(dir);
}

TEST_CASE("fixed-price monte carlo reports empty arms honestly", "[harness]") {
  nlohmann::json j = {
      {"scenario", {{"name", "mm1"}}},
      {"design", {{"type", "fixed_price"}, {"p", 1.0}}},
      {"horizon_T", 100.0},
      {"replications", 1},
      {"master_seed", 5},
  };
  McResult res = run_mc(config_from_json(j));
  REQUIRE(res.rows.size() == 3);
  std::map<std::string, std::string> errors;
  for (const McRow& row : res.rows) errors[row.estimator] = row.error;
  REQUIRE(errors.at("model_free") == "EmptyArm");
  REQUIRE(errors.at("idle_time") == "EmptyArm");
  REQUIRE(errors.at("wde").empty());
}

TEST_CASE("doubling the replication count shrinks the mc standard error", "[harness]") {
  nlohmann::json j = {
      {"scenario", {{"name", "mm1"}}},
      {"design", {{"type", "user_level"}, {"p", 1.0}, {"zeta", 0.1}}},
      {"horizon_T", 500.0},
      {"replications", 300},
      {"master_seed", 1},
  };
  McResult small = run_mc(config_from_json(j));
  j["replications"] = 600;
  McResult big = run_mc(config_from_json(j));
  double se_small = std::sqrt(small.aggregates[0].variance / small.aggregates[0].n_ok);
  double se_big = std::sqrt(big.aggregates[0].variance / big.aggregates[0].n_ok);
  double ratio = se_big / se_small;
  REQUIRE(ratio > 0.707 * 0.8);
  REQUIRE(ratio < 0.707 * 1.2);
}

TEST_CASE("the scenario gallery writes coherent analytic panels", "[harness]") {
  fs::path dir = fresh_dir("conglab_gallery");
  GalleryResult res = run_scenario_gallery(dir.string());
  REQUIRE(res.panels.size() == 4);

  nlohmann::json meta;
  std::ifstream(res.metadata_path) >> meta;
  REQUIRE(meta["panels"].size() == 4);

  for (const GalleryPanel& panel : res.panels) {
    auto sigma = read_csv(panel.sigma_file);
    REQUIRE(sigma.size() == panel.grid.size() + 1);
    REQUIRE(sigma[0] == std::vector<std::string>{panel.grid_param, "sigma2_model_free",
                                                 "sigma2_idle", "sigma2_wde"});
    for (std::size_t r = 1; r < sigma.size(); ++r) {
      double mf = parse_double(sigma[r][1], "sigma csv");
      double idle = parse_double(sigma[r][2], "sigma csv");
      double wde = parse_double(sigma[r][3], "sigma csv");
      REQUIRE(idle == 2.0 * wde);
      REQUIRE(wde <= mf + 1e-12);
      if (panel.scenario == "mm1") REQUIRE(std::abs(mf - wde) < 1e-6);
      if (panel.scenario == "zero_modified") {
        double lambda0 = parse_double(sigma[r][0], "sigma csv");
        if (lambda0 == 0.5) REQUIRE(std::abs(mf - wde) < 1e-6);
        if (lambda0 == 1.0) REQUIRE(mf - wde > 1e-3);
      }
    }

    auto pi = read_csv(panel.pi_file);
    REQUIRE(pi[0] == std::vector<std::string>{"k", "pi"});
    KahanSum total;
    for (std::size_t r = 1; r < pi.size(); ++r) total.add(parse_double(pi[r][1], "pi csv"));
    REQUIRE(total.value() == Catch::Approx(1.0).margin(1e-9));
    if (panel.scenario == "power_law") {
      int mode = 0;
      double best = -1.0;
      for (std::size_t r = 1; r < pi.size(); ++r) {
        double v = parse_double(pi[r][1], "pi csv");
        if (v > best) {
          best = v;
          mode = static_cast<int>(r) - 1;
        }
      }
      REQUIRE(mode == 5);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("the cli analytic subcommand prints the reference values", "[cli]") {
  fs::path dir = fresh_dir("conglab_cli_analytic");
  fs::path out = dir / "analytic.txt";
  REQUIRE(run_cli("analytic --scenario mm1 > " + out.string()) == 0);
  std::map<std::string, std::string> kv;
  for (const auto& row : read_csv(out)) {
    REQUIRE(row.size() == 2);
    kv[row[0]] = row[1];
  }
  REQUIRE(kv.at("scenario") == "mm1");
  REQUIRE(parse_double(kv.at("pi0"), "cli") == Catch::Approx(0.50000000023283064).margin(1e-15));
  REQUIRE(parse_double(kv.at("gradient_weighted_direct"), "cli") ==
          Catch::Approx(-0.49999999301508075).margin(1e-12));
  REQUIRE(parse_double(kv.at("sigma2_wde"), "cli") ==
          Catch::Approx(0.49999998649582272).margin(1e-12));

  REQUIRE(run_cli("analytic --scenario mm1 --param lambda=0.8 > " + out.string()) == 0);
  kv.clear();
  for (const auto& row : read_csv(out)) kv[row[0]] = row[1];
  REQUIRE(parse_double(kv.at("gradient_weighted_direct"), "cli") ==
          Catch::Approx(-0.7946407044705226).margin(1e-10));
  fs::remove_all(dir);
}

TEST_CASE("the cli maps error families to exit codes", "[cli]") {
  REQUIRE(run_cli("analytic --scenario no_such_scenario 2> /dev/null") == 2);
  REQUIRE(run_cli("estimate --log /nonexistent/never.csv 2> /dev/null") == 3);
  REQUIRE(run_cli("2> /dev/null") == 2);
  REQUIRE(run_cli("--help > /dev/null") == 0);
}

TEST_CASE("simulate and estimate cooperate through the log format", "[cli]") {
  fs::path dir = fresh_dir("conglab_cli_roundtrip");
  fs::path log_path = dir / "run.csv";
  nlohmann::json cfg = {
      {"scenario", {{"name", "mm1"}}},
      {"design", {{"type", "regenerative_switchback"}, {"p", 1.0}, {"zeta", 0.1}}},
      {"horizon_T", 300.0},
      {"replications", 1},
      {"master_seed", 5},
      {"output", log_path.string()},
  };
  fs::path cfg_path = dir / "sim.json";
  std::ofstream(cfg_path) << cfg.dump(2);
  REQUIRE(run_cli("simulate --config " + cfg_path.string()) == 0);
  REQUIRE(fs::exists(log_path));
  REQUIRE(fs::exists(sidecar_path(log_path.string())));

  fs::path est_path = dir / "est.csv";
  REQUIRE(run_cli("estimate --log " + log_path.string() + " --kernel 50 --out " +
                  est_path.string()) == 0);
  auto rows = read_csv(est_path);
  REQUIRE(rows[0] == std::vector<std::string>{"estimator", "value", "sigma2_hat", "ci_low",
                                              "ci_high", "skipped_states"});
  std::map<std::string, std::vector<std::string>> by_name;
  for (std::size_t r = 1; r < rows.size(); ++r) by_name[rows[r][0]] = rows[r];
  REQUIRE(by_name.count("model_free") == 1);
  REQUIRE(by_name.count("idle_time") == 1);
  REQUIRE(by_name.count("wde") == 1);
  REQUIRE(by_name.count("wde_s=50") == 1);

  EventLog log = read_event_log(log_path.string());
  Summary s = summarize(log);
  REQUIRE(parse_double(by_name["model_free"][1], "cli") == tau_model_free(s).value);
  REQUIRE(parse_double(by_name["wde"][1], "cli") == tau_wde(s).value);
  REQUIRE_FALSE(by_name["model_free"][3].empty());

  // The mc subcommand writes both row and aggregate files.
  fs::path mc_rows = dir / "mc.csv";
  cfg["replications"] = 4;
  cfg["output"] = mc_rows.string();
  std::ofstream(cfg_path) << cfg.dump(2);
  REQUIRE(run_cli("mc --config " + cfg_path.string() + " > /dev/null") == 0);
  REQUIRE(fs::exists(mc_rows));
  REQUIRE(fs::exists(dir / "mc.agg.csv"));

  // Config errors surface as exit 2.
  cfg["unknown_knob"] = true;
  std::ofstream(cfg_path) << cfg.dump(2);
  REQUIRE(run_cli("mc --config " + cfg_path.string() + " 2> /dev/null") == 2);

  // The trace subcommand emits a readable multiplier grid.
  fs::path trace_path = dir / "trace.csv";
  REQUIRE(run_cli("trace --build ed --weeks 1 --out " + trace_path.string()) == 0);
  REQUIRE(read_trace_multipliers(trace_path.string()).size() == 336);
  fs::remove_all(dir);
}
