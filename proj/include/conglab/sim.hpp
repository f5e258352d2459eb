#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "conglab/design.hpp"
#include "conglab/errors.hpp"
#include "conglab/event_log.hpp"
#include "conglab/model.hpp"
#include "conglab/rng.hpp"
#include "conglab/trace.hpp"

namespace conglab {

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uniform view over the three environments: a stationary model, a grid of
// rate multipliers, or piecewise-constant regimes.
struct Env {
  const RateModel* single = nullptr;
  const PiecewiseTrace* pw = nullptr;
  const GridTrace* grid = nullptr;
  double horizon = 0.0;
  std::vector<double> abs_breaks;

  static Env of_model(const RateModel& m, double horizon) {
    Env e;
    e.single = &m;
    e.horizon = horizon;
    return e;
  }

  static Env of_trace(const Trace& t, double horizon) {
    validate_trace(t);
    Env e;
    e.horizon = horizon;
    if (const auto* pw = std::get_if<PiecewiseTrace>(&t)) {
      e.pw = pw;
      e.abs_breaks.reserve(pw->breakpoints.size());
      for (double b : pw->breakpoints) e.abs_breaks.push_back(b * horizon);
    } else {
      e.grid = &std::get<GridTrace>(t);
      if (horizon > grid_trace_span(*e.grid) * (1.0 + 1e-12)) {
        throw InvalidTrace("horizon exceeds the multiplier grid span");
      }
    }
    return e;
  }

  const RateModel& model(double t) const {
    if (single) return *single;
    if (grid) return grid->base;
    auto it = std::upper_bound(abs_breaks.begin(), abs_breaks.end(), t);
    std::size_t idx = static_cast<std::size_t>(it - abs_breaks.begin());
    std::size_t b = idx == 0 ? 0 : idx - 1;
    return pw->regimes[std::min(b, pw->regimes.size() - 1)];
  }

  double multiplier(double t) const {
    if (!grid) return 1.0;
    auto slot = static_cast<std::size_t>(std::floor(t / grid->slot_length));
    return grid->multipliers[std::min(slot, grid->multipliers.size() - 1)];
  }

  double next_boundary(double t) const {
    if (single) return kInf;
    if (grid) {
      auto slot = static_cast<std::size_t>(std::floor(t / grid->slot_length));
      double nb = static_cast<double>(slot + 1) * grid->slot_length;
      if (nb <= t) nb = static_cast<double>(slot + 2) * grid->slot_length;
      return nb;
    }
    auto it = std::upper_bound(abs_breaks.begin(), abs_breaks.end(), t);
    return it == abs_breaks.end() ? kInf : *it;
  }

  double mu() const {
    if (single) return single->mu;
    if (grid) return grid->base.mu;
    return pw->regimes.front().mu;
  }

  int capacity() const {
    if (single) return single->capacity;
    if (grid) return grid->base.capacity;
    int k = 0;
    for (const RateModel& m : pw->regimes) k = std::max(k, m.capacity);
    return k;
  }

  std::string id() const {
    if (single) return single->id;
    if (grid) return grid->base.id + "+grid";
    std::string s = "piecewise(";
    for (std::size_t i = 0; i < pw->regimes.size(); ++i) {
      if (i) s += ",";
      s += pw->regimes[i].id;
    }
    return s + ")";
  }

  void validate(const Design& d) const {
    if (single) {
      validate_design(d, *single);
    } else if (grid) {
      validate_design(d, grid->base);
    } else {
      for (const RateModel& m : pw->regimes) validate_design(d, m);
    }
  }
};

inline EventLog simulate_env(const Env& env, const Design& design, double horizon,
                             std::uint64_t seed, int initial_state, double burn_in) {
  if (!(horizon >= 0.0)) throw BadConfig("horizon_T must be >= 0");
  env.validate(design);
  if (initial_state < 0 || initial_state > env.capacity()) {
    throw BadConfig("initial_state outside {0..K}");
  }

  RngStream assign_rng = derive_stream(seed, 0);
  RngStream clock = derive_stream(seed, 1);
  RngStream coin = derive_stream(seed, 2);

  double p = design_price(design);
  double zeta = design_zeta(design);
  const auto* isb = std::get_if<IntervalSwitchback>(&design);
  const auto* rsb = std::get_if<RegenerativeSwitchback>(&design);
  bool user_level = is_user_level(design);

  EventLog log;
  log.horizon = horizon;
  log.seed = seed;
  log.design = design;
  log.model_id = env.id();
  log.mu = env.mu();

  int k = initial_state;

  // Optional warm-up at the base price in the t=0 environment; the log
  // starts from the warmed-up state.
  if (burn_in > 0.0) {
    RngStream warm = derive_stream(seed, 3);
    const RateModel& m = env.model(0.0);
    double mult = env.multiplier(0.0);
    double t = 0.0;
    while (true) {
      double lam = mult * m.lambda(k, p);
      double total = lam + (k > 0 ? m.mu : 0.0);
      t += warm.next_exponential(total);
      if (t >= burn_in) break;
      if (warm.next_bernoulli(lam / total)) {
        ++k;
      } else {
        --k;
      }
    }
  }
  log.initial_state = k;

  std::vector<Label> interval_labels;
  Label arm = Label::base;
  if (isb) {
    int n = std::max(1, static_cast<int>(std::ceil(horizon / isb->interval_length - 1e-12)));
    interval_labels = assignment_sequence(*isb, n, assign_rng);
    arm = interval_labels[0];
    log.initial_label = arm;
  } else if (rsb) {
    arm = coin.next_bernoulli(0.5) ? Label::plus : Label::minus;
    log.initial_label = arm;
  } else if (!user_level) {
    log.initial_label = Label::base;
  }

  auto arm_price = [&](Label a) {
    if (a == Label::plus) return p + zeta;
    if (a == Label::minus) return p - zeta;
    return p;
  };

  double t = 0.0;
  std::size_t interval_idx = 0;
  while (t < horizon) {
    const RateModel& m = env.model(t);
    double mult = env.multiplier(t);
    double lam;
    if (user_level) {
      lam = 0.5 * mult * (m.lambda(k, p + zeta) + m.lambda(k, p - zeta));
    } else {
      lam = mult * m.lambda(k, arm_price(arm));
    }
    double total = lam + (k > 0 ? m.mu : 0.0);

    double next_interval =
        isb ? static_cast<double>(interval_idx + 1) * isb->interval_length : kInf;
    double bound = std::min({next_interval, env.next_boundary(t), horizon});

    double t_next = total > 0.0 ? t + clock.next_exponential(total) : kInf;
    if (t_next >= bound) {
      // Deterministic schedule point truncates the clock; memorylessness
      // lets us redraw on the other side.
      if (bound >= horizon) break;
      t = bound;
      if (isb && bound == next_interval) {
        ++interval_idx;
        Label next_arm = interval_labels[std::min(interval_idx, interval_labels.size() - 1)];
        if (next_arm != arm) {
          log.events.push_back(price_switch_event(t, next_arm));
          arm = next_arm;
        }
      }
      continue;
    }

    t = t_next;
    if (clock.next_bernoulli(lam / total)) {
      Label alabel;
      if (user_level) {
        double lp = m.lambda(k, p + zeta);
        double lm = m.lambda(k, p - zeta);
        alabel = coin.next_bernoulli(lp / (lp + lm)) ? Label::plus : Label::minus;
      } else {
        alabel = arm;
      }
      log.events.push_back(arrival_event(t, k, alabel));
      ++k;
    } else {
      log.events.push_back(departure_event(t, k));
      --k;
    }
    if (rsb && k == rsb->regeneration_state) {
      Label next_arm = coin.next_bernoulli(0.5) ? Label::plus : Label::minus;
      if (next_arm != arm) {
        log.events.push_back(price_switch_event(t, next_arm));
        arm = next_arm;
      }
    }
  }
  return log;
}

}  // namespace detail

inline EventLog simulate(const RateModel& model, const Design& design, double horizon,
                         std::uint64_t seed, int initial_state = 0, double burn_in = 0.0) {
  return detail::simulate_env(detail::Env::of_model(model, horizon), design, horizon, seed,
                              initial_state, burn_in);
}

inline EventLog simulate(const Trace& trace, const Design& design, double horizon,
                         std::uint64_t seed, int initial_state = 0, double burn_in = 0.0) {
  return detail::simulate_env(detail::Env::of_trace(trace, horizon), design, horizon, seed,
                              initial_state, burn_in);
}

}  // namespace conglab
