#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "conglab/errors.hpp"
#include "conglab/numeric.hpp"

namespace conglab {

// State-dependent arrival-rate family lambda_k(p) with a single exponential
// server of rate mu. The queue lives on {0..capacity}; lambda_capacity == 0, and
// lambda_k > 0 for k < capacity on the valid price interval.
struct RateModel {
  double mu = 1.0;
  int capacity = 0;  // K
  std::function<double(int, double)> rate;        // lambda_k(p), k in [0, capacity)
  std::function<double(int, double)> rate_deriv;  // d lambda_k/dp; empty -> numeric
  double price_lo = 0.0;  // open interval of valid prices
  double price_hi = 2.0;
  std::string id = "custom";

  bool has_analytic_derivatives() const { return static_cast<bool>(rate_deriv); }

  void check_price(double p) const {
    if (!(p > price_lo && p < price_hi)) {
      throw InvalidPrice("price " + std::to_string(p) + " outside (" +
                         std::to_string(price_lo) + ", " + std::to_string(price_hi) +
                         ") for model " + id);
    }
  }

  double lambda(int k, double p) const {
    if (k >= capacity) return 0.0;
    double v = rate(k, p);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw NonPositiveRate("lambda_" + std::to_string(k) + "(" + std::to_string(p) +
                            ") = " + std::to_string(v) + " for model " + id);
    }
    return v;
  }

  // Central difference with step 1e-6 * max(1, |p|) when no analytic
  // derivative is attached.
  double lambda_deriv(int k, double p) const {
    if (k >= capacity) return 0.0;
    if (rate_deriv) return rate_deriv(k, p);
    double h = 1e-6 * std::max(1.0, std::abs(p));
    return (rate(k, p + h) - rate(k, p - h)) / (2.0 * h);
  }
};

// Stationary distribution of the birth-death chain at price p, with tail
// sums S_k = sum_{j>=k} pi_j and throughput V(p).
struct SteadyState {
  double price = 0.0;
  std::vector<double> pi;    // size K+1
  std::vector<double> tail;  // size K+2, tail[k] = S_k, tail[K+1] = 0
  double throughput = 0.0;   // V(p)

  int capacity() const { return static_cast<int>(pi.size()) - 1; }
};

struct RateMatrix {
  Matrix q;  // (K+1) x (K+1) generator
};

struct GroupInverse {
  Matrix q_sharp;
};

inline SteadyState steady_state(const RateModel& model, double p) {
  model.check_price(p);
  int K = model.capacity;
  std::vector<double> lam(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) lam[static_cast<std::size_t>(k)] = model.lambda(k, p);

  // pi_k proportional to prod_{i<k} lambda_i/mu, accumulated in log space.
  std::vector<double> logw(static_cast<std::size_t>(K) + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    logw[static_cast<std::size_t>(k)] =
        logw[static_cast<std::size_t>(k) - 1] +
        std::log(lam[static_cast<std::size_t>(k) - 1] / model.mu);
  }
  double m = *std::max_element(logw.begin(), logw.end());
  SteadyState ss;
  ss.price = p;
  ss.pi.resize(static_cast<std::size_t>(K) + 1);
  KahanSum z;
  for (int k = 0; k <= K; ++k) {
    ss.pi[static_cast<std::size_t>(k)] = std::exp(logw[static_cast<std::size_t>(k)] - m);
    z.add(ss.pi[static_cast<std::size_t>(k)]);
  }
  for (auto& x : ss.pi) x /= z.value();

  ss.tail.assign(static_cast<std::size_t>(K) + 2, 0.0);
  for (int k = K; k >= 0; --k) {
    ss.tail[static_cast<std::size_t>(k)] =
        ss.tail[static_cast<std::size_t>(k) + 1] + ss.pi[static_cast<std::size_t>(k)];
  }

  KahanSum v;
  for (int k = 0; k < K; ++k) {
    v.add(ss.pi[static_cast<std::size_t>(k)] * lam[static_cast<std::size_t>(k)]);
  }
  ss.throughput = v.value();
  return ss;
}

// Tridiagonal generator: row k has rate lambda_k up, mu down, minus their
// sum on the diagonal.
inline RateMatrix rate_matrix(const RateModel& model, double p) {
  model.check_price(p);
  int K = model.capacity;
  std::size_t n = static_cast<std::size_t>(K) + 1;
  RateMatrix rm;
  rm.q = Matrix(n, n);
  for (int k = 0; k <= K; ++k) {
    std::size_t i = static_cast<std::size_t>(k);
    double lam = (k < K) ? model.lambda(k, p) : 0.0;
    double out = lam + (k > 0 ? model.mu : 0.0);
    if (k < K) rm.q(i, i + 1) = lam;
    if (k > 0) rm.q(i, i - 1) = model.mu;
    rm.q(i, i) = -out;
  }
  return rm;
}

// Closed-form group inverse of the generator in terms of pi and the tail
// sums: entry (k,i) is (pi_i/mu) * (-sum_{j<=min(i,k)} 1/pi_j
//   + sum_{j<=k} S_j/pi_j + sum_{j<=i} S_j/pi_j - sum_{j<=K} S_j^2/pi_j),
// all inner sums starting at j=1.
inline GroupInverse group_inverse_closed_form(const RateModel& model, double p) {
  SteadyState ss = steady_state(model, p);
  int K = ss.capacity();
  std::size_t n = static_cast<std::size_t>(K) + 1;

  std::vector<double> inv_prefix(n, 0.0);   // A_m = sum_{j=1..m} 1/pi_j
  std::vector<double> tail_prefix(n, 0.0);  // B_m = sum_{j=1..m} S_j/pi_j
  KahanSum a, b, w;
  for (int j = 1; j <= K; ++j) {
    std::size_t u = static_cast<std::size_t>(j);
    a.add(1.0 / ss.pi[u]);
    b.add(ss.tail[u] / ss.pi[u]);
    w.add(ss.tail[u] * ss.tail[u] / ss.pi[u]);
    inv_prefix[u] = a.value();
    tail_prefix[u] = b.value();
  }
  double wk = w.value();

  GroupInverse gi;
  gi.q_sharp = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = -inv_prefix[std::min(i, k)] + tail_prefix[k] + tail_prefix[i] - wk;
      gi.q_sharp(k, i) = ss.pi[i] / model.mu * s;
    }
  }
  return gi;
}

// Independent dense-solve route: Q# = -(1 pi^T - Q)^{-1} (I - 1 pi^T).
inline GroupInverse group_inverse_oracle(const RateMatrix& rm,
                                         const std::vector<double>& pi) {
  std::size_t n = rm.q.rows();
  Eigen::MatrixXd q(n, n), one_pi(n, n), rhs(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rm.q(i, j);
      one_pi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = pi[j];
    }
  }
  rhs = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(n)) -
        one_pi;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(one_pi - q);
  if (!lu.isInvertible()) {
    throw SingularSystem("group_inverse_oracle: 1*pi^T - Q is singular");
  }
  Eigen::MatrixXd x = -lu.solve(rhs);
  GroupInverse gi;
  gi.q_sharp = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      gi.q_sharp(i, j) = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return gi;
}

}  // namespace conglab
