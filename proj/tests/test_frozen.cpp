// SPDX-License-Identifier: Apache-2.0
//
// Values produced by tests/oracles/frozen.py (numpy) and frozen here.

#include <gtest/gtest.h>

#include <cmath>

#include "riswsr/channel.hpp"
#include "riswsr/precoding.hpp"
#include "riswsr/risnet.hpp"

using namespace riswsr;
using linalg::ComplexMatrix;
using linalg::cplx;

TEST(Frozen, HandcraftedFullCsiNetwork) {
  const std::size_t n = 9, u = 2, q = 2, p = 5;
  ad::Tensor f({p, n, u});
  for (std::size_t pi = 0; pi < p; ++pi)
    for (std::size_t e = 0; e < n; ++e)
      for (std::size_t k = 0; k < u; ++k)
        f.data[(pi * n + e) * u + k] = 1.5 * std::sin(0.37 * static_cast<double>(pi * 18 + e * 2 + k) + 0.2);
  risnet::NetworkParams np = risnet::zero_params(risnet::full_csi_specs(q, 1));
  for (std::size_t l = 0; l < np.layers.size(); ++l) {
    auto& layer = np.layers[l];
    for (std::size_t c = 0; c < layer.spec.classes(); ++c) {
      risnet::UnitParams& up = layer.at(static_cast<risnet::FeatureClass>(c), 0);
      const std::size_t rows = up.weight.shape[0], cols = up.weight.shape[1];
      for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b)
          up.weight.data[a * cols + b] = 0.3 * std::sin(static_cast<double>(1 + 2 * l + 3 * c + 5 * a + 7 * b));
        up.bias.data[a] = 0.1 * std::cos(static_cast<double>(1 + l + c + a));
      }
    }
  }
  const double expected[] = {-0.34007193806893576, -0.3856399198316903,  -0.22337719884252438,
                             -0.06074595251068407, -0.06366176467725843, -0.06366176467725843,
                             -0.06366176467725843, -0.0830934899673556,  -0.25186609800374093};
  for (risnet::Mode mode : {risnet::Mode::loop, risnet::Mode::tensor}) {
    const auto phases = risnet::forward(f, np, {3, 3}, mode).phases;
    ASSERT_EQ(phases.size(), n);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(phases[i], expected[i], 1e-10);
  }
}

TEST(Frozen, WeightedSumRate) {
  ComplexMatrix c(2, 3), v(3, 2);
  for (int a = 0; a < 2; ++a)
    for (int m = 0; m < 3; ++m) c(a, m) = 0.8 * cplx(std::cos(a + 2 * m + 0.3), std::sin(0.7 * a - m + 0.1));
  for (int m = 0; m < 3; ++m)
    for (int k = 0; k < 2; ++k) v(m, k) = cplx(0.3 * std::cos(m * k + 1), 0.2 * std::sin(m + 2 * k));
  const std::vector<double> w{0.3, 0.7};
  EXPECT_NEAR(precoding::wsr_objective(c, v, 0.05, w), 1.1377195993731204, 1e-12);
}

TEST(Frozen, CascadedChannel) {
  const std::size_t n = 4, m = 2, u = 2;
  channel::ChannelSample s;
  s.h = ComplexMatrix(n, m);
  s.g = ComplexMatrix(u, n);
  s.d = ComplexMatrix(u, m);
  s.s_ii = ComplexMatrix(n, n);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const double x = static_cast<double>(a), y = static_cast<double>(b);
      s.h(a, b) = 0.5 * cplx(std::cos(1 + x + 3 * y), std::sin(2 * x - y));
    }
  for (std::size_t a = 0; a < u; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double x = static_cast<double>(a), y = static_cast<double>(b);
      s.g(a, b) = 0.4 * cplx(std::sin(x + 5 * y + 0.5), std::cos(3 * x + y));
    }
  for (std::size_t a = 0; a < u; ++a)
    for (std::size_t b = 0; b < m; ++b) {
      const double x = static_cast<double>(a), y = static_cast<double>(b);
      s.d(a, b) = 0.2 * cplx(std::cos(2 * x + y), std::sin(x + y + 1));
    }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double x = static_cast<double>(a), y = static_cast<double>(b);
      const cplx z1 = 0.15 * cplx(std::cos(x + y), std::sin(x * y + 0.3));
      const cplx z2 = 0.15 * cplx(std::cos(y + x), std::sin(y * x + 0.3));
      s.s_ii(a, b) = (z1 + z2) / 2.0;
    }
  s.weights = {0.5, 0.5};
  std::vector<double> phases;
  for (std::size_t k = 0; k < n; ++k) phases.push_back(0.4 + 1.1 * static_cast<double>(k));

  const cplx closed[] = {{0.29638059433702435, -0.014075034643857454}, {0.606445581156592, 0.16868022427267795},
                         {-0.4643084164296408, 0.25099513414975616}, {-0.14309160733718895, -0.5109114947902498}};
  const cplx second[] = {{0.0697014327408581, 0.4749697358514634}, {0.2822214401750527, -0.8463564526331948},
                         {-0.016636574916366973, 0.09023938354664807}, {-1.057777668690748, -0.12313485092404561}};
  const ComplexMatrix c1 = channel::cascaded_channel(s, phases, channel::CascadeMode::closed_form);
  const ComplexMatrix c2 = channel::cascaded_channel(s, phases, channel::CascadeMode::with_second_order);
  const ComplexMatrix c3 = channel::oracle_channel_general(s, phases);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_LT(std::abs(c1.entries()[i] - closed[i]), 1e-12);
    EXPECT_LT(std::abs(c2.entries()[i] - second[i]), 1e-12);
    EXPECT_LT(std::abs(c3.entries()[i] - second[i]), 1e-12);
  }
}

TEST(Frozen, FriisAtCarrier) {
  // 3.5 GHz over 20 m is about 1.2e-7.
  EXPECT_NEAR(channel::friis_gain(3.5e9, 20.0), 1.1615170728864187e-07, 1e-18);
  EXPECT_NEAR(channel::friis_gain(3.5e9, 20.0), 1.2e-7, 0.05 * 1.2e-7);
}
