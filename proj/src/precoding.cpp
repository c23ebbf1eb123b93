// SPDX-License-Identifier: Apache-2.0

#include "riswsr/precoding.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "riswsr/error.hpp"

namespace riswsr::precoding {

using linalg::cplx;

namespace {

void check_conformable(const ComplexMatrix& c, const ComplexMatrix& v) {
  if (c.cols() != v.rows() || c.rows() != v.cols()) {
    throw DimensionError("precoding: channel " + c.shape_string() + " vs precoder " +
                         v.shape_string());
  }
}

}  // namespace

std::vector<double> sinr(const ComplexMatrix& c, const ComplexMatrix& v, double noise_power) {
  check_conformable(c, v);
  const ComplexMatrix l = linalg::cmatmul(c, v);
  const std::size_t users = c.rows();
  std::vector<double> out(users);
  for (std::size_t u = 0; u < users; ++u) {
    double interference = 0.0;
    for (std::size_t k = 0; k < users; ++k) {
      if (k != u) interference += std::norm(l(u, k));
    }
    out[u] = std::norm(l(u, u)) / (interference + noise_power);
  }
  return out;
}

double wsr_objective(const ComplexMatrix& c, const ComplexMatrix& v, double noise_power,
                     std::span<const double> weights) {
  if (weights.size() != c.rows()) {
    throw DimensionError("wsr_objective: " + std::to_string(weights.size()) + " weights for " +
                         std::to_string(c.rows()) + " users");
  }
  if (!(noise_power > 0.0)) throw DomainError("wsr_objective: noise power must be > 0");
  const std::vector<double> s = sinr(c, v, noise_power);
  double f = 0.0;
  for (std::size_t u = 0; u < s.size(); ++u) f += weights[u] * std::log2(1.0 + s[u]);
  return f;
}

double transmit_power(const ComplexMatrix& v) {
  const double n = v.frobenius_norm();
  return n * n;
}

ComplexMatrix mrt_precoder(const ComplexMatrix& c, double power_budget) {
  if (!(power_budget > 0.0)) throw DomainError("mrt_precoder: power budget must be > 0");
  const double norm = c.frobenius_norm();
  if (norm == 0.0) throw DomainError("mrt_precoder: all-zero channel");
  ComplexMatrix v = c.conj_transpose();
  v *= std::sqrt(power_budget) / norm;
  return v;
}

void WmmseConfig::validate() const {
  if (max_iters == 0 || !(rel_tol > 0.0) || !(bisection_tol > 0.0) || !(mu_growth > 1.0)) {
    throw DomainError("WmmseConfig: all settings must be positive (mu_growth > 1)");
  }
}

namespace {

struct PrecoderSolve {
  ComplexMatrix v;
  double power = 0.0;
  bool ok = false;
};

// V = (A + mu I)^{-1} R.
PrecoderSolve solve_for_mu(const ComplexMatrix& a, const ComplexMatrix& r, double mu) {
  ComplexMatrix m = a;
  for (std::size_t i = 0; i < m.rows(); ++i) m(i, i) += mu;
  PrecoderSolve out;
  try {
    const linalg::LUFactorization f = linalg::lu_factor(std::move(m));
    out.v = linalg::lu_solve(f, r, linalg::Side::left);
  } catch (const SingularError&) {
    return out;
  }
  out.power = transmit_power(out.v);
  out.ok = std::isfinite(out.power);
  return out;
}

}  // namespace

WmmseResult wmmse_precoder(const ComplexMatrix& c, std::span<const double> weights,
                           double noise_power, double power_budget, const WmmseConfig& cfg) {
  cfg.validate();
  if (!(noise_power > 0.0)) throw DomainError("wmmse_precoder: noise power must be > 0");
  if (!(power_budget > 0.0)) throw DomainError("wmmse_precoder: power budget must be > 0");
  const std::size_t users = c.rows();
  const std::size_t antennas = c.cols();
  if (weights.size() != users) throw DimensionError("wmmse_precoder: weight count mismatch");

  WmmseResult res;
  res.v = mrt_precoder(c, power_budget);
  double current = wsr_objective(c, res.v, noise_power, weights);
  res.wsr_trace.push_back(current);
  ComplexMatrix best_v = res.v;
  double best = current;

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const ComplexMatrix l = linalg::cmatmul(c, res.v);
    // Receiver coefficients and MSE weights.
    std::vector<cplx> u(users);
    std::vector<double> lambda(users);
    for (std::size_t k = 0; k < users; ++k) {
      double total = noise_power;
      for (std::size_t j = 0; j < users; ++j) total += std::norm(l(k, j));
      u[k] = l(k, k) / total;
      const double mse = 1.0 - std::norm(l(k, k)) / total;
      lambda[k] = weights[k] / mse;
    }
    // A = sum_k lambda_k |u_k|^2 c_k^H c_k, R[:, k] = lambda_k u_k c_k^H.
    ComplexMatrix a(antennas, antennas);
    ComplexMatrix r(antennas, users);
    for (std::size_t k = 0; k < users; ++k) {
      const double s = lambda[k] * std::norm(u[k]);
      for (std::size_t i = 0; i < antennas; ++i) {
        const cplx ci = std::conj(c(k, i));
        for (std::size_t j = 0; j < antennas; ++j) a(i, j) += s * ci * c(k, j);
        r(i, k) = lambda[k] * u[k] * ci;
      }
    }

    PrecoderSolve sol = solve_for_mu(a, r, 0.0);
    if (!sol.ok || sol.power > power_budget) {
      // Smallest mu with power <= E_Tr: grow the bracket, then bisect.
      double lo = 0.0;
      double hi = 1.0;
      PrecoderSolve at_hi = solve_for_mu(a, r, hi);
      for (int grow = 0; grow < 2000 && (!at_hi.ok || at_hi.power > power_budget); ++grow) {
        lo = hi;
        hi *= cfg.mu_growth;
        at_hi = solve_for_mu(a, r, hi);
      }
      for (int bis = 0; bis < 200; ++bis) {
        if ((power_budget - at_hi.power) <= cfg.bisection_tol * power_budget) break;
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi)) break;
        PrecoderSolve at_mid = solve_for_mu(a, r, mid);
        if (at_mid.ok && at_mid.power <= power_budget) {
          hi = mid;
          at_hi = std::move(at_mid);
        } else {
          lo = mid;
        }
      }
      sol = std::move(at_hi);
      // The power constraint is active; a common gain up to the budget can only
      // raise every SINR.
      if (sol.ok && sol.power > 0.0 && sol.power < power_budget) {
        sol.v *= std::sqrt(power_budget / sol.power);
      }
    }
    if (!sol.ok) break;
    res.v = std::move(sol.v);
    const double next = wsr_objective(c, res.v, noise_power, weights);
    res.wsr_trace.push_back(next);
    res.iterations = it + 1;
    if (next > best) {
      best = next;
      best_v = res.v;
    }
    const bool small_change = std::abs(next - current) <= cfg.rel_tol * std::max(std::abs(current), 1e-300);
    current = next;
    if (small_change) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) res.v = best_v;
  return res;
}

std::vector<double> random_phase_baseline(std::size_t elements, std::uint64_t seed) {
  if (elements == 0) throw DomainError("random_phase_baseline: need at least one element");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(0.0, 2.0 * std::numbers::pi);
  std::vector<double> phases(elements);
  for (double& p : phases) p = dist(rng);
  return phases;
}

}  // namespace riswsr::precoding
