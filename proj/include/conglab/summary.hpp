#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "conglab/design.hpp"
#include "conglab/errors.hpp"
#include "conglab/event_log.hpp"

namespace conglab {

// Cell counts and occupancy times reconstructed from one trajectory.
// Logs without per-arm pricing fold everything into the plus arm; user-level
// logs carry no arm occupancy at all (only labeled arrival counts).
struct Summary {
  int K_obs = 0;
  double horizon_T = 0.0;
  double zeta = 0.0;
  double mu = 1.0;
  double T_plus = 0.0;
  double T_minus = 0.0;
  std::vector<double> T_k;
  std::vector<double> T_k_plus;
  std::vector<double> T_k_minus;
  long long N_plus = 0;
  long long N_minus = 0;
  std::vector<long long> N_k_plus;
  std::vector<long long> N_k_minus;
};

struct WindowedSummary {
  double kernel_length = 0.0;
  std::vector<Summary> windows;
};

namespace detail {

struct SummaryAccum {
  bool track_arms = true;
  int max_state = -1;
  double T_plus = 0.0;
  double T_minus = 0.0;
  std::vector<double> T_k, T_k_plus, T_k_minus;
  long long N_plus = 0;
  long long N_minus = 0;
  std::vector<long long> N_k_plus, N_k_minus;

  void see(int k) {
    if (k > max_state) {
      max_state = k;
      auto n = static_cast<std::size_t>(k) + 1;
      T_k.resize(n, 0.0);
      T_k_plus.resize(n, 0.0);
      T_k_minus.resize(n, 0.0);
      N_k_plus.resize(n, 0);
      N_k_minus.resize(n, 0);
    }
  }

  void add_time(int k, Label arm, double dt) {
    see(k);
    auto i = static_cast<std::size_t>(k);
    T_k[i] += dt;
    if (!track_arms) return;
    if (arm == Label::minus) {
      T_minus += dt;
      T_k_minus[i] += dt;
    } else {
      T_plus += dt;
      T_k_plus[i] += dt;
    }
  }

  void add_arrival(int k, Label lab) {
    see(k);
    auto i = static_cast<std::size_t>(k);
    if (lab == Label::minus) {
      ++N_minus;
      ++N_k_minus[i];
    } else {
      ++N_plus;
      ++N_k_plus[i];
    }
  }

  Summary finish(double horizon, double zeta, double mu) const {
    Summary s;
    s.K_obs = std::max(max_state, 0);
    s.horizon_T = horizon;
    s.zeta = zeta;
    s.mu = mu;
    auto n = static_cast<std::size_t>(s.K_obs) + 1;
    s.T_k = T_k;
    s.T_k_plus = T_k_plus;
    s.T_k_minus = T_k_minus;
    s.N_k_plus = N_k_plus;
    s.N_k_minus = N_k_minus;
    s.T_k.resize(n, 0.0);
    s.T_k_plus.resize(n, 0.0);
    s.T_k_minus.resize(n, 0.0);
    s.N_k_plus.resize(n, 0);
    s.N_k_minus.resize(n, 0);
    s.T_plus = T_plus;
    s.T_minus = T_minus;
    s.N_plus = N_plus;
    s.N_minus = N_minus;
    return s;
  }
};

}  // namespace detail

inline Summary summarize(const EventLog& log) {
  validate_event_log(log);
  detail::SummaryAccum acc;
  acc.track_arms = log.initial_label.has_value();
  Label arm = log.initial_label.value_or(Label::base);
  int state = log.initial_state;
  double cur = 0.0;
  acc.see(state);
  for (const Event& e : log.events) {
    acc.add_time(state, arm, e.t - cur);
    cur = e.t;
    switch (e.kind) {
      case EventKind::arrival:
        acc.add_arrival(e.pre_state, e.label);
        ++state;
        break;
      case EventKind::departure:
        --state;
        break;
      case EventKind::price_switch:
        if (!acc.track_arms) throw CorruptLog("price switch in a user-level log");
        arm = e.label;
        break;
    }
  }
  acc.add_time(state, arm, log.horizon - cur);
  return acc.finish(log.horizon, design_zeta(log.design), log.mu);
}

// Splits one trajectory into consecutive windows of length s; the incomplete
// final window is dropped (its events still advance the state path).
inline WindowedSummary windowed_summarize(const EventLog& log, double kernel_length) {
  if (!(kernel_length > 0.0)) throw BadConfig("kernel length must be > 0");
  validate_event_log(log);
  auto nw = static_cast<std::size_t>(std::floor(log.horizon / kernel_length + 1e-9));
  if (nw == 0) throw KernelTooLong("kernel length exceeds the horizon");

  std::vector<detail::SummaryAccum> acc(nw);
  bool track_arms = log.initial_label.has_value();
  for (auto& a : acc) a.track_arms = track_arms;
  acc[0].see(log.initial_state);

  Label arm = log.initial_label.value_or(Label::base);
  int state = log.initial_state;
  double cur = 0.0;
  double covered = static_cast<double>(nw) * kernel_length;

  auto advance = [&](double to) {
    while (cur < to) {
      auto w = static_cast<std::size_t>(std::floor(cur / kernel_length));
      double w_end = static_cast<double>(w + 1) * kernel_length;
      if (w_end <= cur) {
        ++w;
        w_end = static_cast<double>(w + 1) * kernel_length;
      }
      if (w >= nw) break;
      double seg_end = std::min(to, w_end);
      acc[w].add_time(state, arm, seg_end - cur);
      cur = seg_end;
    }
    cur = to;
  };

  for (const Event& e : log.events) {
    advance(e.t);
    if (e.kind == EventKind::arrival) {
      auto w = static_cast<std::size_t>(std::floor(e.t / kernel_length));
      if ((static_cast<double>(w) + 1.0) * kernel_length <= e.t) ++w;
      if (w < nw) acc[w].add_arrival(e.pre_state, e.label);
      ++state;
    } else if (e.kind == EventKind::departure) {
      --state;
    } else {
      if (!track_arms) throw CorruptLog("price switch in a user-level log");
      arm = e.label;
    }
  }
  advance(std::min(log.horizon, covered));

  WindowedSummary out;
  out.kernel_length = kernel_length;
  out.windows.reserve(nw);
  for (const auto& a : acc) {
    out.windows.push_back(a.finish(kernel_length, design_zeta(log.design), log.mu));
  }
  return out;
}

}  // namespace conglab
