// SPDX-License-Identifier: Apache-2.0
//
// Weighted sum-rate evaluation and MISO downlink precoders.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "riswsr/linalg.hpp"

namespace riswsr::precoding {

using linalg::ComplexMatrix;

/// Slack allowed on trace(V V^H) <= E_Tr.
inline constexpr double kPowerSlack = 1e-9;

/// f = sum_u w_u log2(1 + |l_uu|^2 / (sum_{v != u} |l_uv|^2 + sigma^2)), L = C V.
double wsr_objective(const ComplexMatrix& c, const ComplexMatrix& v, double noise_power,
                     std::span<const double> weights);

/// Per-user SINR of L = C V.
std::vector<double> sinr(const ComplexMatrix& c, const ComplexMatrix& v, double noise_power);

/// trace(V V^H).
double transmit_power(const ComplexMatrix& v);

/// Columns along the conjugated user channels, scaled to trace(V V^H) = E_Tr.
ComplexMatrix mrt_precoder(const ComplexMatrix& c, double power_budget);

struct WmmseConfig {
  std::size_t max_iters = 100;
  double rel_tol = 1e-5;
  double bisection_tol = 1e-8;
  double mu_growth = 2.0;
  void validate() const;
};

struct WmmseResult {
  ComplexMatrix v;
  std::vector<double> wsr_trace;  // entry 0 is the MRT initializer
  std::size_t iterations = 0;
  bool converged = false;
};

WmmseResult wmmse_precoder(const ComplexMatrix& c, std::span<const double> weights,
                           double noise_power, double power_budget, const WmmseConfig& cfg = {});

/// Phases drawn i.i.d. uniform on [0, 2 pi).
std::vector<double> random_phase_baseline(std::size_t elements, std::uint64_t seed);

}  // namespace riswsr::precoding
