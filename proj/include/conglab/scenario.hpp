#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "conglab/errors.hpp"
#include "conglab/model.hpp"

namespace conglab {

using ParamMap = std::map<std::string, double>;

enum class PriceFamily { linear, quadratic };

// Appendix-style price dependence applied to a base rate table lambda_k(1):
// linear (2-p), quadratic (2-p)+(1-p)^2. Both equal 1 at p=1.
inline double price_factor(PriceFamily family, double p) {
  if (family == PriceFamily::linear) return 2.0 - p;
  return (2.0 - p) + (1.0 - p) * (1.0 - p);
}

inline double price_factor_deriv(PriceFamily family, double p) {
  if (family == PriceFamily::linear) return -1.0;
  return -1.0 - 2.0 * (1.0 - p);
}

inline RateModel table_model(std::vector<double> rates_at_one, double mu,
                             PriceFamily family, std::string id) {
  if (!(mu > 0.0)) throw BadConfig("table_model: mu must be > 0");
  if (rates_at_one.empty()) throw BadConfig("table_model: empty rate table");
  for (double r : rates_at_one) {
    if (!(r > 0.0)) throw NonPositiveRate("table_model: rate table entry <= 0");
  }
  auto table = std::make_shared<std::vector<double>>(std::move(rates_at_one));
  RateModel m;
  m.mu = mu;
  m.capacity = static_cast<int>(table->size());
  m.rate = [table, family](int k, double p) {
    return (*table)[static_cast<std::size_t>(k)] * price_factor(family, p);
  };
  m.rate_deriv = [table, family](int k, double p) {
    return (*table)[static_cast<std::size_t>(k)] * price_factor_deriv(family, p);
  };
  m.price_lo = 0.0;
  m.price_hi = 2.0;
  m.id = std::move(id);
  return m;
}

namespace detail {

inline double take(ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  double v = it->second;
  params.erase(it);
  return v;
}

inline int take_int(ParamMap& params, const std::string& key, int fallback) {
  double v = take(params, key, static_cast<double>(fallback));
  int i = static_cast<int>(std::lround(v));
  if (static_cast<double>(i) != v) throw BadConfig("parameter " + key + " must be an integer");
  return i;
}

inline void expect_empty(const ParamMap& params, const std::string& scenario) {
  if (!params.empty()) {
    throw BadConfig("unknown parameter '" + params.begin()->first + "' for scenario " +
                    scenario);
  }
}

}  // namespace detail

// Named environments addressable from configs. mm1/zero_modified/power_law/
// conformity use the linear price family; appendix_linear/appendix_quadratic
// are the mm1 table under the two appendix families.
inline RateModel scenario_preset(const std::string& name, ParamMap params = {}) {
  if (name == "mm1" || name == "appendix_linear" || name == "appendix_quadratic") {
    double lambda = detail::take(params, "lambda", 0.5);
    int K = detail::take_int(params, "K", 30);
    detail::expect_empty(params, name);
    if (K < 1) throw BadConfig("K must be >= 1");
    PriceFamily family =
        (name == "appendix_quadratic") ? PriceFamily::quadratic : PriceFamily::linear;
    return table_model(std::vector<double>(static_cast<std::size_t>(K), lambda), 1.0,
                       family, name);
  }
  if (name == "zero_modified") {
    double lambda0 = detail::take(params, "lambda0", 1.0);
    double lambda = detail::take(params, "lambda", 0.5);
    int K = detail::take_int(params, "K", 30);
    detail::expect_empty(params, name);
    if (K < 1) throw BadConfig("K must be >= 1");
    std::vector<double> table(static_cast<std::size_t>(K), lambda);
    table[0] = lambda0;
    return table_model(std::move(table), 1.0, PriceFamily::linear, name);
  }
  if (name == "power_law") {
    double alpha = detail::take(params, "alpha", 0.4);
    int K = detail::take_int(params, "K", 15);
    detail::expect_empty(params, name);
    if (K < 1) throw BadConfig("K must be >= 1");
    std::vector<double> table(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      table[static_cast<std::size_t>(k)] = 2.0 * std::pow(k + 1.0, -alpha);
    }
    return table_model(std::move(table), 1.0, PriceFamily::linear, name);
  }
  if (name == "conformity") {
    double lambda = detail::take(params, "lambda", 2.0);
    int K = detail::take_int(params, "K", 15);
    detail::expect_empty(params, name);
    if (K < 1) throw BadConfig("K must be >= 1");
    std::vector<double> table(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
      table[static_cast<std::size_t>(k)] = lambda * (0.5 + (k - 7.0) / 200.0);
    }
    return table_model(std::move(table), 1.0, PriceFamily::linear, name);
  }
  throw UnknownScenario("unknown scenario '" + name + "'");
}

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = {
      "mm1",        "zero_modified",   "power_law",
      "conformity", "appendix_linear", "appendix_quadratic"};
  return names;
}

// Arrivals at raw rate thinned by a per-state joining probability.
inline RateModel join_probability_model(double lambda_raw,
                                        std::function<double(int, double, double)> prob,
                                        double mu, int K,
                                        std::string id = "join-probability") {
  if (!(lambda_raw > 0.0)) throw NonPositiveRate("join_probability_model: lambda_raw <= 0");
  if (!(mu > 0.0)) throw BadConfig("join_probability_model: mu must be > 0");
  if (K < 1) throw BadConfig("join_probability_model: K must be >= 1");
  auto p_fn = std::make_shared<std::function<double(int, double, double)>>(std::move(prob));
  RateModel m;
  m.mu = mu;
  m.capacity = K;
  m.rate = [p_fn, lambda_raw, mu](int k, double p) {
    double q = (*p_fn)(k, mu, p);
    if (!(q >= 0.0 && q <= 1.0)) {
      throw InvalidProbability("joining probability outside [0,1] at state " +
                               std::to_string(k));
    }
    return lambda_raw * q;
  };
  m.id = std::move(id);
  return m;
}

// Customers join when a Uniform[0,U] valuation covers the expected waiting
// cost c*k/mu plus the price.
inline std::function<double(int, double, double)> waiting_cost_probability(double U,
                                                                           double c) {
  if (!(U > 0.0)) throw BadConfig("waiting_cost_probability: U must be > 0");
  return [U, c](int k, double mu, double p) {
    return std::clamp((U - c * k / mu - p) / U, 0.0, 1.0);
  };
}

inline std::function<double(int, double, double)> proportional_balking_probability() {
  return [](int k, double, double) { return 1.0 / (k + 1.0); };
}

// Wraps a model so that price p means per-state price b_k * p.
inline RateModel state_dependent_pricing(const RateModel& base,
                                         std::vector<double> base_prices) {
  if (static_cast<int>(base_prices.size()) != base.capacity) {
    throw BadConfig("state_dependent_pricing: need one base price per state below K");
  }
  double b_min = *std::min_element(base_prices.begin(), base_prices.end());
  double b_max = *std::max_element(base_prices.begin(), base_prices.end());
  if (!(b_min > 0.0)) throw BadConfig("state_dependent_pricing: base prices must be > 0");
  auto prices = std::make_shared<std::vector<double>>(std::move(base_prices));
  auto inner = std::make_shared<RateModel>(base);
  RateModel m;
  m.mu = base.mu;
  m.capacity = base.capacity;
  m.rate = [inner, prices](int k, double p) {
    return inner->rate(k, (*prices)[static_cast<std::size_t>(k)] * p);
  };
  if (base.rate_deriv) {
    m.rate_deriv = [inner, prices](int k, double p) {
      double b = (*prices)[static_cast<std::size_t>(k)];
      return b * inner->rate_deriv(k, b * p);
    };
  }
  m.price_lo = base.price_lo / b_min;
  m.price_hi = base.price_hi / b_max;
  if (!(m.price_lo < m.price_hi)) {
    throw BadConfig("state_dependent_pricing: empty valid price range");
  }
  m.id = base.id + "+state-dependent-pricing";
  return m;
}

}  // namespace conglab
