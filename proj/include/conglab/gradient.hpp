#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "conglab/model.hpp"
#include "conglab/numeric.hpp"

namespace conglab {

// The throughput gradient V'(p) evaluated three ways; the spread between
// them is a built-in consistency check.
struct GradientReport {
  double value_model_free = 0.0;      // d/dp sum_k pi_k lambda_k
  double value_idle_time = 0.0;       // -mu * pi_0'(p)
  double value_weighted_direct = 0.0; // mu pi_0 sum_k (lambda'_k/lambda_k) S_{k+1}
  double max_pairwise_gap = 0.0;
};

// Variances under the sqrt(T zeta^2) scaling.
struct AsymptoticVariances {
  double sigma2_model_free = 0.0;
  double sigma2_idle = 0.0;
  double sigma2_wde = 0.0;
  double sigma2_ur = 0.0;
};

inline GradientReport policy_gradient(const RateModel& model, double p) {
  SteadyState ss = steady_state(model, p);
  int K = model.capacity;
  std::vector<double> lam(static_cast<std::size_t>(K)), dlam(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    lam[static_cast<std::size_t>(k)] = model.lambda(k, p);
    dlam[static_cast<std::size_t>(k)] = model.lambda_deriv(k, p);
  }

  // g_k = sum_{i<k} lambda'_i/lambda_i, the log-derivative of the product
  // defining pi_k up to the common pi_0 factor.
  std::vector<double> g(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    g[static_cast<std::size_t>(k)] = g[static_cast<std::size_t>(k) - 1] +
                                     dlam[static_cast<std::size_t>(k) - 1] /
                                         lam[static_cast<std::size_t>(k) - 1];
  }

  GradientReport rep;

  // (a) differentiate sum pi_k lambda_k: direct effect plus occupancy shift,
  // with pi'_k = pi_k (g_k - gbar), gbar = sum_j pi_j g_j from normalization.
  {
    KahanSum gbar_sum;
    for (int k = 0; k <= K; ++k) {
      gbar_sum.add(ss.pi[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(k)]);
    }
    double gbar = gbar_sum.value();
    KahanSum total;
    for (int k = 0; k < K; ++k) {
      std::size_t u = static_cast<std::size_t>(k);
      double dpi = ss.pi[u] * (g[u] - gbar);
      total.add(dlam[u] * ss.pi[u] + lam[u] * dpi);
    }
    rep.value_model_free = total.value();
  }

  // (b) -mu pi_0'. With analytic derivatives, differentiate the normalizing
  // sum of rho_k = prod_{i<k} lambda_i/mu directly; otherwise central
  // difference of the steady-state solve.
  if (model.has_analytic_derivatives()) {
    KahanSum z, dz;
    double rho = 1.0, drho = 0.0;
    z.add(rho);
    for (int k = 1; k <= K; ++k) {
      std::size_t u = static_cast<std::size_t>(k) - 1;
      drho = (drho * lam[u] + rho * dlam[u]) / model.mu;
      rho = rho * lam[u] / model.mu;
      z.add(rho);
      dz.add(drho);
    }
    double dpi0 = -dz.value() / (z.value() * z.value());
    rep.value_idle_time = -model.mu * dpi0;
  } else {
    double h = 1e-6 * std::max(1.0, std::abs(p));
    double pi0_hi = steady_state(model, p + h).pi[0];
    double pi0_lo = steady_state(model, p - h).pi[0];
    rep.value_idle_time = -model.mu * (pi0_hi - pi0_lo) / (2.0 * h);
  }

  // (c) idle-probability-weighted direct effect.
  {
    KahanSum total;
    for (int k = 0; k < K; ++k) {
      std::size_t u = static_cast<std::size_t>(k);
      total.add(dlam[u] / lam[u] * ss.tail[u + 1]);
    }
    rep.value_weighted_direct = model.mu * ss.pi[0] * total.value();
  }

  rep.max_pairwise_gap =
      std::max({std::abs(rep.value_model_free - rep.value_idle_time),
                std::abs(rep.value_model_free - rep.value_weighted_direct),
                std::abs(rep.value_idle_time - rep.value_weighted_direct)});
  return rep;
}

// Shared by the analytic formulas and the plug-in estimates: evaluate the
// variance triple from an occupancy vector.
inline AsymptoticVariances variances_from_pi(const std::vector<double>& pi, double mu) {
  int K = static_cast<int>(pi.size()) - 1;
  std::vector<double> tail(static_cast<std::size_t>(K) + 2, 0.0);
  for (int k = K; k >= 0; --k) {
    tail[static_cast<std::size_t>(k)] =
        tail[static_cast<std::size_t>(k) + 1] + pi[static_cast<std::size_t>(k)];
  }
  KahanSum w, cross;
  for (int k = 1; k <= K; ++k) {
    std::size_t u = static_cast<std::size_t>(k);
    w.add(tail[u] * tail[u] / pi[u]);
    if (k < K) cross.add(tail[u] * tail[u + 1] / pi[u]);
  }
  double pi0 = pi[0];
  AsymptoticVariances v;
  v.sigma2_wde = mu * pi0 * pi0 * w.value();
  v.sigma2_ur = v.sigma2_wde;
  v.sigma2_idle = 2.0 * v.sigma2_wde;
  v.sigma2_model_free =
      (1.0 - pi0) * mu + 2.0 * mu * pi0 * (cross.value() - (1.0 - pi0) * w.value());
  return v;
}

inline AsymptoticVariances asymptotic_variance(const RateModel& model, double p) {
  return variances_from_pi(steady_state(model, p).pi, model.mu);
}

struct VarianceOrderingRow {
  double price = 0.0;
  double sigma2_model_free = 0.0;
  double sigma2_idle = 0.0;
  double sigma2_wde = 0.0;
  double gap = 0.0;           // sigma2_model_free - sigma2_wde
  double gap_identity = 0.0;  // mu * sum_k (sqrt(pi_k) - pi_0 S_k / sqrt(pi_k))^2
};

inline std::vector<VarianceOrderingRow> variance_ordering_report(
    const RateModel& model, const std::vector<double>& price_grid) {
  std::vector<VarianceOrderingRow> rows;
  rows.reserve(price_grid.size());
  for (double p : price_grid) {
    SteadyState ss = steady_state(model, p);
    AsymptoticVariances v = variances_from_pi(ss.pi, model.mu);
    VarianceOrderingRow row;
    row.price = p;
    row.sigma2_model_free = v.sigma2_model_free;
    row.sigma2_idle = v.sigma2_idle;
    row.sigma2_wde = v.sigma2_wde;
    row.gap = v.sigma2_model_free - v.sigma2_wde;
    KahanSum ident;
    for (int k = 1; k <= ss.capacity(); ++k) {
      std::size_t u = static_cast<std::size_t>(k);
      double root = std::sqrt(ss.pi[u]);
      double t = root - ss.pi[0] * ss.tail[u] / root;
      ident.add(t * t);
    }
    row.gap_identity = model.mu * ident.value();
    if (row.gap_identity < -1e-12) {
      throw SingularSystem("variance_ordering_report: negative gap identity");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace conglab
