#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "conglab/errors.hpp"
#include "conglab/event_log.hpp"
#include "conglab/gradient.hpp"
#include "conglab/numeric.hpp"
#include "conglab/summary.hpp"

namespace conglab {

struct Estimate {
  double value = 0.0;
  std::optional<double> sigma2_hat;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::vector<int> skipped_states;
  int window_count = 0;
  double window_coverage = 1.0;
};

inline Estimate tau_model_free(const Summary& s) {
  if (!(s.T_plus > 0.0) || !(s.T_minus > 0.0)) {
    throw EmptyArm("model-free estimator needs time in both price arms");
  }
  Estimate e;
  double np = static_cast<double>(s.N_plus);
  double nm = static_cast<double>(s.N_minus);
  e.value = (np / s.T_plus - nm / s.T_minus) / (2.0 * s.zeta);
  return e;
}

inline Estimate tau_idle_time(const Summary& s) {
  if (!(s.T_plus > 0.0) || !(s.T_minus > 0.0)) {
    throw EmptyArm("idle-time estimator needs time in both price arms");
  }
  Estimate e;
  e.value = -(s.mu / (2.0 * s.zeta)) * (s.T_k_plus[0] / s.T_plus - s.T_k_minus[0] / s.T_minus);
  return e;
}

inline double delta_k(const Summary& s, int k) {
  if (k < 0 || k > s.K_obs) throw EmptyCell("state never observed");
  auto i = static_cast<std::size_t>(k);
  if (!(s.T_k_plus[i] > 0.0) || !(s.T_k_minus[i] > 0.0)) {
    throw EmptyCell("state has no occupancy in one arm");
  }
  double rp = static_cast<double>(s.N_k_plus[i]) / s.T_k_plus[i];
  double rm = static_cast<double>(s.N_k_minus[i]) / s.T_k_minus[i];
  if (!(rp + rm > 0.0)) throw EmptyCell("no arrivals from this state in either arm");
  return (rp - rm) / (s.zeta * (rp + rm));
}

namespace detail {

// Fractions of window/horizon time spent strictly above each state.
inline std::vector<double> tail_fractions(const Summary& s) {
  auto n = s.T_k.size();
  std::vector<double> tail(n, 0.0);
  double run = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    tail[i] = run / s.horizon_T;
    run += s.T_k[i];
  }
  return tail;
}

}  // namespace detail

inline Estimate tau_wde(const Summary& s) {
  if (!(s.T_k[0] > 0.0)) throw EmptyCell("state 0 never occupied");
  Estimate e;
  std::vector<double> tail = detail::tail_fractions(s);
  KahanSum sum;
  for (int k = 0; k <= s.K_obs; ++k) {
    double d;
    try {
      d = delta_k(s, k);
    } catch (const EmptyCell&) {
      e.skipped_states.push_back(k);
      continue;
    }
    sum.add(d * tail[static_cast<std::size_t>(k)]);
  }
  e.value = s.mu * (s.T_k[0] / s.horizon_T) * sum.value();
  return e;
}

inline Estimate tau_ur(const Summary& s) {
  if (s.T_plus > 0.0 || s.T_minus > 0.0) {
    throw WrongDesign("arrival-ratio estimator expects a user-level log");
  }
  Estimate e;
  std::vector<double> tail = detail::tail_fractions(s);
  KahanSum sum;
  for (int k = 0; k <= s.K_obs; ++k) {
    auto i = static_cast<std::size_t>(k);
    double np = static_cast<double>(s.N_k_plus[i]);
    double nm = static_cast<double>(s.N_k_minus[i]);
    if (np + nm <= 0.0) {
      e.skipped_states.push_back(k);
      continue;
    }
    sum.add((np - nm) / (s.zeta * (np + nm)) * tail[i]);
  }
  e.value = s.mu * (s.T_k[0] / s.horizon_T) * sum.value();
  return e;
}

enum class WindowedKind { wde, ur };

// Kernel-windowed estimator: local cell ratios and occupancies per window,
// averaged over complete windows; the optional truncation clamps each
// window's inner value.
inline Estimate windowed_estimate(const EventLog& log, double kernel_length, WindowedKind kind,
                                  std::optional<double> truncation_C = std::nullopt) {
  WindowedSummary ws = windowed_summarize(log, kernel_length);
  if (kind == WindowedKind::ur && log.initial_label.has_value()) {
    throw WrongDesign("arrival-ratio estimator expects a user-level log");
  }
  Estimate e;
  e.window_count = static_cast<int>(ws.windows.size());
  e.window_coverage = static_cast<double>(ws.windows.size()) * kernel_length / log.horizon;

  std::vector<int> skipped;
  KahanSum outer;
  for (const Summary& w : ws.windows) {
    std::vector<double> tail = detail::tail_fractions(w);
    KahanSum sum;
    for (int k = 0; k <= w.K_obs; ++k) {
      auto i = static_cast<std::size_t>(k);
      double d;
      if (kind == WindowedKind::wde) {
        try {
          d = delta_k(w, k);
        } catch (const EmptyCell&) {
          skipped.push_back(k);
          continue;
        }
      } else {
        double np = static_cast<double>(w.N_k_plus[i]);
        double nm = static_cast<double>(w.N_k_minus[i]);
        if (np + nm <= 0.0) {
          skipped.push_back(k);
          continue;
        }
        d = (np - nm) / (w.zeta * (np + nm));
      }
      sum.add(d * tail[i]);
    }
    double inner = (w.T_k[0] / kernel_length) * sum.value();
    if (truncation_C) {
      inner = std::clamp(inner, -*truncation_C, *truncation_C);
    }
    outer.add(inner);
  }
  e.value = log.mu * (kernel_length / log.horizon) * outer.value();

  std::sort(skipped.begin(), skipped.end());
  skipped.erase(std::unique(skipped.begin(), skipped.end()), skipped.end());
  e.skipped_states = std::move(skipped);
  return e;
}

// Plug-in variance estimates: empirical occupancy fractions substituted into
// the asymptotic variance formulas.
inline AsymptoticVariances variance_estimates(const Summary& s) {
  std::vector<double> pi_hat(s.T_k.size());
  for (std::size_t i = 0; i < s.T_k.size(); ++i) {
    if (!(s.T_k[i] > 0.0)) throw EmptyCell("state with zero occupancy below K_obs");
    pi_hat[i] = s.T_k[i] / s.horizon_T;
  }
  return variances_from_pi(pi_hat, s.mu);
}

inline Estimate confidence_interval(const Estimate& e, double sigma2_hat, double horizon_T,
                                    double zeta, double alpha) {
  if (!(sigma2_hat >= 0.0)) throw BadConfig("sigma2_hat must be >= 0");
  if (!(horizon_T > 0.0) || zeta == 0.0) {
    throw BadConfig("confidence intervals need horizon_T > 0 and zeta != 0");
  }
  if (!(alpha > 0.0) || !(alpha < 1.0)) throw InvalidAlpha("alpha must lie in (0, 1)");
  double z = normal_quantile(1.0 - alpha / 2.0);
  double half = z * std::sqrt(sigma2_hat) / std::sqrt(horizon_T * zeta * zeta);
  Estimate out = e;
  out.sigma2_hat = sigma2_hat;
  out.ci_low = e.value - half;
  out.ci_high = e.value + half;
  return out;
}

}  // namespace conglab
