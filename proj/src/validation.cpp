// SPDX-License-Identifier: Apache-2.0

#include "riswsr/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "riswsr/autodiff.hpp"
#include "riswsr/error.hpp"
#include "riswsr/precoding.hpp"
#include "riswsr/risnet.hpp"
#include "riswsr/training.hpp"

namespace riswsr::validation {

using ad::NodeId;
using ad::Tape;
using ad::Tensor;
using channel::ChannelSample;
using linalg::ComplexMatrix;
using linalg::cplx;

ComplexMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
  std::normal_distribution<double> n(0.0, scale / std::sqrt(2.0));
  ComplexMatrix m(rows, cols);
  for (cplx& z : m.entries()) {
    const double re = n(rng);
    z = {re, n(rng)};
  }
  return m;
}

ChannelSample random_instance(std::mt19937_64& rng, std::size_t ris_rows, std::size_t ris_cols,
                              std::size_t antennas, std::size_t users, double gain, double kappa) {
  channel::GeometryConfig geo;
  geo.ris_rows = ris_rows;
  geo.ris_cols = ris_cols;
  geo.bs_antennas = antennas;
  geo.users = users;
  const std::size_t n = geo.elements();
  ChannelSample s;
  s.h = random_matrix(rng, n, antennas, gain);
  s.g = random_matrix(rng, users, n, gain);
  s.d = random_matrix(rng, users, antennas, gain);
  s.s_ii = channel::generate_s_ii(geo, kappa, 0).s_ii;
  std::exponential_distribution<double> e(1.0);
  s.weights.resize(users);
  double total = 0.0;
  for (double& w : s.weights) total += (w = e(rng));
  for (double& w : s.weights) w /= total;
  s.noise_power = gain * gain * 1e-2;
  s.power_budget = 1.0;
  s.regime = channel::Regime::iid;
  return s;
}

ChannelSample permute_users(const ChannelSample& s, const std::vector<std::size_t>& perm) {
  ChannelSample p = s;
  for (std::size_t u = 0; u < perm.size(); ++u) {
    for (std::size_t n = 0; n < s.g.cols(); ++n) p.g(u, n) = s.g(perm[u], n);
    for (std::size_t m = 0; m < s.d.cols(); ++m) p.d(u, m) = s.d(perm[u], m);
    p.weights[u] = s.weights[perm[u]];
  }
  return p;
}

namespace {

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(3);
  ss << x;
  return ss.str();
}

CheckResult check(const std::string& name, double value, double bound, const std::string& what) {
  CheckResult r;
  r.name = name;
  r.passed = std::isfinite(value) && value <= bound;
  r.detail = what + " = " + fmt(value) + " (bound " + fmt(bound) + ")";
  return r;
}

// Sum of c * y over all entries of y; turns any node into a scalar objective.
NodeId weighted_total(Tape& t, NodeId y, std::uint64_t seed) {
  const ad::Shape shape = t.value(y).shape;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Tensor c(shape);
  for (double& x : c.data) x = u(rng);
  const std::size_t n = c.size();
  const NodeId prod = ad::mul(t, y, t.constant(std::move(c)));
  return ad::sum_axis(t, ad::reshape(t, prod, {n}), 0);
}

Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& x : t.data) x = u(rng);
  return t;
}

// Values bounded away from zero by `margin`.
Tensor away_from_zero(std::mt19937_64& rng, ad::Shape shape, double margin) {
  Tensor t = random_tensor(rng, std::move(shape), margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& x : t.data)
    if (sign(rng)) x = -x;
  return t;
}

// --- linalg -----------------------------------------------------------------

CheckResult linalg_lu(std::mt19937_64& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ComplexMatrix a = random_matrix(rng, 6, 6);
    for (std::size_t i = 0; i < 6; ++i) a(i, i) += 4.0;
    const linalg::LUFactorization f = linalg::lu_factor(a);
    worst = std::max(worst, linalg::relative_error(f.reconstruct(), a));
    const ComplexMatrix b = random_matrix(rng, 6, 3);
    const ComplexMatrix x = linalg::lu_solve(f, b, linalg::Side::left);
    worst = std::max(worst, linalg::relative_error(linalg::cmatmul(a, x), b));
    const ComplexMatrix br = random_matrix(rng, 3, 6);
    const ComplexMatrix xr = linalg::lu_solve(f, br, linalg::Side::right);
    worst = std::max(worst, linalg::relative_error(linalg::cmatmul(xr, a), br));
  }
  return check("linalg: LU reconstruction and solve residuals", worst, 1e-10, "max relative error");
}

CheckResult linalg_pinv(std::mt19937_64& rng) {
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const ComplexMatrix h = random_matrix(rng, 8, 3);
    const ComplexMatrix p = linalg::pinv_left(h);
    worst = std::max(worst, linalg::relative_error(linalg::cmatmul(p, h), ComplexMatrix::identity(3)));
  }
  return check("linalg: pinv_left(H) H = I", worst, 1e-9, "max relative error");
}

CheckResult linalg_associativity(std::mt19937_64& rng) {
  const ComplexMatrix a = random_matrix(rng, 4, 5);
  const ComplexMatrix b = random_matrix(rng, 5, 3);
  const ComplexMatrix c = random_matrix(rng, 3, 6);
  const double err = linalg::relative_error(linalg::cmatmul(linalg::cmatmul(a, b), c),
                                            linalg::cmatmul(a, linalg::cmatmul(b, c)));
  return check("linalg: (AB)C = A(BC)", err, 1e-12, "relative error");
}

// A = Q1 diag(s) Q2 with unitary factors has spectral norm max(s).
CheckResult linalg_spectral_norm(std::mt19937_64& rng) {
  auto unitary = [&](std::size_t n) {
    const ComplexMatrix z = random_matrix(rng, n, n);
    // Columns of pinv_left(z)^H span the same space; orthonormalize by Gram-Schmidt.
    ComplexMatrix q = z;
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        cplx dot{};
        for (std::size_t r = 0; r < n; ++r) dot += std::conj(q(r, p)) * q(r, c);
        for (std::size_t r = 0; r < n; ++r) q(r, c) -= dot * q(r, p);
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < n; ++r) norm += std::norm(q(r, c));
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < n; ++r) q(r, c) /= norm;
    }
    return q;
  };
  const std::vector<cplx> s{3.0, 1.5, 1.0, 0.7, 0.5, 0.2};
  const ComplexMatrix a =
      linalg::cmatmul(linalg::cmatmul(unitary(6), ComplexMatrix::diagonal(s)), unitary(6));
  const double est = linalg::spectral_norm(a, 100);
  return check("linalg: spectral norm estimate", std::abs(est - 3.0) / 3.0, 0.01, "relative error");
}

// --- autodiff ---------------------------------------------------------------

CheckResult autodiff_primitives(std::mt19937_64& rng) {
  struct Case {
    const char* name;
    std::vector<Tensor> point;
    std::function<NodeId(Tape&, std::span<const NodeId>)> body;
  };
  std::vector<Case> cases;
  const ad::Shape s23{2, 3};
  auto add_case = [&](const char* name, std::vector<Tensor> pt,
                      std::function<NodeId(Tape&, std::span<const NodeId>)> body) {
    cases.push_back({name, std::move(pt), std::move(body)});
  };
  add_case("add", {random_tensor(rng, s23, -1, 1), random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::add(t, p[0], p[1]); });
  add_case("sub", {random_tensor(rng, s23, -1, 1), random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::sub(t, p[0], p[1]); });
  add_case("mul", {random_tensor(rng, s23, -1, 1), random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::mul(t, p[0], p[1]); });
  add_case("scale", {random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::scale(t, p[0], -1.7); });
  add_case("matmul", {random_tensor(rng, {2, 3}, -1, 1), random_tensor(rng, {3, 4, 2}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::matmul(t, p[0], p[1]); });
  add_case("relu", {away_from_zero(rng, s23, 0.1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::relu(t, p[0]); });
  add_case("sum_axis", {random_tensor(rng, {2, 3, 2}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::sum_axis(t, p[0], 1); });
  add_case("mean_axis", {random_tensor(rng, {2, 3, 2}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::mean_axis(t, p[0], 2); });
  add_case("broadcast", {random_tensor(rng, {2, 1, 3}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::broadcast(t, p[0], {2, 4, 3}); });
  add_case("concat", {random_tensor(rng, {2, 3}, -1, 1), random_tensor(rng, {1, 3}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::concat(t, p, 0); });
  add_case("sin", {random_tensor(rng, s23, -2, 2)},
           [](Tape& t, std::span<const NodeId> p) { return ad::sin(t, p[0]); });
  add_case("cos", {random_tensor(rng, s23, -2, 2)},
           [](Tape& t, std::span<const NodeId> p) { return ad::cos(t, p[0]); });
  add_case("log", {random_tensor(rng, s23, 0.5, 2)},
           [](Tape& t, std::span<const NodeId> p) { return ad::log(t, p[0]); });
  add_case("reciprocal", {away_from_zero(rng, s23, 0.5)},
           [](Tape& t, std::span<const NodeId> p) { return ad::reciprocal(t, p[0]); });
  add_case("square", {random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::square(t, p[0]); });
  add_case("complex_matmul", {random_tensor(rng, {2, 3, 2}, -1, 1), random_tensor(rng, {3, 2, 2}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::complex_matmul(t, p[0], p[1]); });
  {
    Tensor a = random_tensor(rng, {3, 3, 2}, -0.5, 0.5);
    for (std::size_t i = 0; i < 3; ++i) a.data[(i * 3 + i) * 2] += 3.0;
    add_case("complex_solve_right", {a, random_tensor(rng, {2, 3, 2}, -1, 1)},
             [](Tape& t, std::span<const NodeId> p) { return ad::complex_solve_right(t, p[0], p[1]); });
  }
  add_case("magnitude_squared", {random_tensor(rng, {2, 3, 2}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::magnitude_squared(t, p[0]); });
  add_case("reshape", {random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::reshape(t, p[0], {3, 2}); });
  add_case("gather", {random_tensor(rng, {2, 4}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::gather(t, p[0], 1, {3, 0, 0, 2}); });
  add_case("complex_pack", {random_tensor(rng, s23, -1, 1), random_tensor(rng, s23, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::complex_pack(t, p[0], p[1]); });
  add_case("complex_mul", {random_tensor(rng, {2, 3, 2}, -1, 1), random_tensor(rng, {2, 3, 2}, -1, 1)},
           [](Tape& t, std::span<const NodeId> p) { return ad::complex_mul(t, p[0], p[1]); });

  double worst = 0.0;
  std::string worst_name = "-";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const Case& c = cases[i];
    const auto fn = [&](Tape& t, std::span<const NodeId> p) { return weighted_total(t, c.body(t, p), i); };
    const ad::GradcheckResult r = ad::gradcheck(fn, c.point, 1e-6);
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = c.name;
    }
  }
  CheckResult res = check("autodiff: gradcheck of every primitive", worst, 1e-5, "max relative error");
  res.detail += ", worst op " + worst_name;
  return res;
}

// --- channel ----------------------------------------------------------------

std::vector<double> random_phases(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 6.283185307179586);
  std::vector<double> p(n);
  for (double& x : p) x = u(rng);
  return p;
}

CheckResult channel_oracle(std::mt19937_64& rng) {
  double worst = 0.0;
  for (std::size_t side : {2u, 4u}) {
    const ChannelSample s = random_instance(rng, side, side, 4, 2, 0.3, 0.2);
    const std::vector<double> ph = random_phases(rng, s.elements());
    worst = std::max(worst, linalg::relative_error(
                                channel::cascaded_channel(s, ph, channel::CascadeMode::with_second_order),
                                channel::oracle_channel_general(s, ph)));
  }
  return check("channel: second-order closed form vs block S-parameter oracle", worst, 1e-8,
               "max relative error");
}

CheckResult channel_linear_in_d(std::mt19937_64& rng) {
  ChannelSample s = random_instance(rng, 3, 3, 4, 2, 1e-3, 0.2);
  const std::vector<double> ph = random_phases(rng, s.elements());
  const ComplexMatrix d1 = s.d;
  const ComplexMatrix d2 = random_matrix(rng, 2, 4, 1e-3);
  auto c_of = [&](const ComplexMatrix& d) {
    s.d = d;
    return channel::cascaded_channel(s, ph, channel::CascadeMode::closed_form);
  };
  const ComplexMatrix lhs = c_of(d1 + d2);
  const ComplexMatrix rhs = c_of(d1) + c_of(d2) - c_of(ComplexMatrix(2, 4));
  return check("channel: C is linear in D", (lhs - rhs).max_abs() / lhs.max_abs(), 1e-12,
               "max entry deviation (relative)");
}

CheckResult channel_features(std::mt19937_64& rng) {
  const ChannelSample s = random_instance(rng, 3, 3, 4, 3, 1.0, 0.1);
  const std::vector<std::size_t> perm{2, 0, 1};
  const ChannelSample p = permute_users(s, perm);
  const channel::FeatureStats st;
  const Tensor a = channel::compute_features(s, st);
  const Tensor b = channel::compute_features(p, st);
  double worst = 0.0;
  const std::size_t n = s.elements();
  for (std::size_t f = 0; f < channel::kInputFeatures; ++f)
    for (std::size_t e = 0; e < n; ++e)
      for (std::size_t u = 0; u < 3; ++u)
        worst = std::max(worst, std::abs(b.data[(f * n + e) * 3 + u] - a.data[(f * n + e) * 3 + perm[u]]));
  return check("channel: features are user-permutation equivariant", worst, 1e-12, "max deviation");
}

CheckResult channel_coupling_norm() {
  double worst = 0.0;
  for (double kappa : {0.1, 0.3, 1.0, 5.0}) {
    channel::GeometryConfig g;
    g.ris_rows = 6;
    g.ris_cols = 6;
    const ComplexMatrix s = channel::generate_s_ii(g, kappa, 0).s_ii;
    // Dense oracle: the largest eigenvalue of S^H S by long power iteration.
    worst = std::max(worst, linalg::spectral_norm(s, 5000));
  }
  CheckResult r = check("channel: ||S_II||_2 < 0.9 after generation", worst, 0.9, "max norm");
  r.passed = r.passed && worst < 0.9;
  return r;
}

// --- risnet -----------------------------------------------------------------

risnet::LayerParams random_layer(std::mt19937_64& rng, risnet::LayerSpec spec) {
  const std::vector<risnet::LayerSpec> chain{spec, {risnet::LayerKind::final, spec.out_dim(), 1}};
  risnet::NetworkParams np = risnet::init_params(chain, rng());
  for (risnet::UnitParams& u : np.layers[0].units)
    for (double& b : u.bias.data) b = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
  return np.layers[0];
}

Tensor permute_tensor_users(const Tensor& f, const std::vector<std::size_t>& perm) {
  Tensor out = f;
  const std::size_t u = f.shape[2];
  for (std::size_t i = 0; i < f.size() / u; ++i)
    for (std::size_t k = 0; k < u; ++k) out.data[i * u + k] = f.data[i * u + perm[k]];
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

CheckResult risnet_loop_tensor(std::mt19937_64& rng) {
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 4; ++trial) {
    const std::size_t p = trial % 2 ? 16 : 4;
    const std::size_t q = trial < 2 ? 4 : 16;
    const Tensor f = random_tensor(rng, {p, 9, 2 + trial % 3}, -1, 1);
    const risnet::LayerParams lp = random_layer(rng, {risnet::LayerKind::normal, p, q});
    worst = std::max(worst, max_abs_diff(risnet::layer_forward(f, lp, {3, 3}, risnet::Mode::loop).data,
                                         risnet::layer_forward(f, lp, {3, 3}, risnet::Mode::tensor).data));
    const risnet::LayerParams ex = random_layer(rng, {risnet::LayerKind::expansion, p, q});
    worst = std::max(worst, max_abs_diff(risnet::expansion_forward(f, {3, 3}, ex, risnet::Mode::loop).data,
                                         risnet::expansion_forward(f, {3, 3}, ex, risnet::Mode::tensor).data));
  }
  return check("risnet: loop and tensor layer forms agree", worst, 1e-10, "max deviation");
}

CheckResult risnet_equivariance(std::mt19937_64& rng) {
  double worst = 0.0;
  const std::vector<std::size_t> perm{1, 3, 0, 2};
  for (risnet::LayerKind kind : {risnet::LayerKind::normal, risnet::LayerKind::expansion}) {
    const Tensor f = random_tensor(rng, {8, 4, 4}, -1, 1);
    const risnet::LayerParams lp = random_layer(rng, {kind, 8, 4});
    const Tensor a = risnet::layer_forward(f, lp, {2, 2}, risnet::Mode::tensor);
    const Tensor b = risnet::layer_forward(permute_tensor_users(f, perm), lp, {2, 2}, risnet::Mode::tensor);
    worst = std::max(worst, max_abs_diff(permute_tensor_users(a, perm).data, b.data));
  }
  return check("risnet: every hidden layer is user-permutation equivariant", worst, 1e-12, "max deviation");
}

CheckResult risnet_invariance(std::mt19937_64& rng) {
  double worst = 0.0;
  const std::vector<std::size_t> perm{1, 0};
  {
    const auto specs = risnet::full_csi_specs(8, 2);
    const risnet::NetworkParams np = risnet::init_params(specs, rng());
    const Tensor f = random_tensor(rng, {5, 9, 2}, -1, 1);
    worst = std::max(worst, max_abs_diff(risnet::forward(f, np, {3, 3}).phases,
                                         risnet::forward(permute_tensor_users(f, perm), np, {3, 3}).phases));
  }
  {
    const auto specs = risnet::partial_csi_specs(4);
    const risnet::NetworkParams np = risnet::init_params(specs, rng());
    const Tensor f = random_tensor(rng, {5, 1, 2}, -1, 1);
    worst = std::max(worst, max_abs_diff(risnet::forward(f, np, {1, 1}).phases,
                                         risnet::forward(permute_tensor_users(f, perm), np, {1, 1}).phases));
  }
  return check("risnet: phases are invariant to user permutation", worst, 1e-9, "max deviation");
}

CheckResult risnet_param_count() {
  const auto specs = risnet::full_csi_specs();
  const risnet::NetworkParams a = risnet::init_params(specs, 1);
  const std::size_t count = a.parameter_count();
  // The same parameters drive any element and user count.
  bool ok = true;
  for (const auto& [n, u] : std::vector<std::pair<std::size_t, std::size_t>>{{4, 2}, {9, 3}, {25, 4}}) {
    Tensor f({5, n, u});
    ok = ok && risnet::forward(f, a, {n, 1}).phases.size() == n && a.parameter_count() == count;
  }
  CheckResult r;
  r.name = "risnet: parameter count independent of N and U";
  r.passed = ok;
  r.detail = std::to_string(count) + " parameters";
  return r;
}

CheckResult risnet_phase_constraints(std::mt19937_64& rng) {
  const std::vector<double> ph = random_phases(rng, 50);
  const ComplexMatrix phi = risnet::phases_to_phi(ph);
  double worst = 0.0;
  bool offdiag_zero = true;
  for (std::size_t r = 0; r < phi.rows(); ++r)
    for (std::size_t c = 0; c < phi.cols(); ++c) {
      if (r == c) worst = std::max(worst, std::abs(std::abs(phi(r, c)) - 1.0));
      else offdiag_zero = offdiag_zero && phi(r, c) == cplx{};
    }
  CheckResult res = check("risnet: |Phi_nn| = 1 and off-diagonals zero", worst, 1e-15, "max ||phi|-1|");
  res.passed = res.passed && offdiag_zero;
  return res;
}

// --- precoding --------------------------------------------------------------

CheckResult precoding_wmmse(std::mt19937_64& rng) {
  double worst_drop = 0.0;
  double worst_power = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix c = random_matrix(rng, 3, 4);
    const std::vector<double> w{0.2, 0.5, 0.3};
    const precoding::WmmseResult r = precoding::wmmse_precoder(c, w, 0.1, 1.0);
    for (std::size_t i = 1; i < r.wsr_trace.size(); ++i)
      worst_drop = std::max(worst_drop, r.wsr_trace[i - 1] - r.wsr_trace[i]);
    worst_power = std::max(worst_power, precoding::transmit_power(r.v) - 1.0);
  }
  CheckResult res = check("precoding: WMMSE monotone and power feasible", worst_drop, 1e-9, "max WSR drop");
  res.passed = res.passed && worst_power <= precoding::kPowerSlack;
  res.detail += ", max power excess " + fmt(worst_power);
  return res;
}

CheckResult precoding_invariances(std::mt19937_64& rng) {
  const ComplexMatrix c = random_matrix(rng, 3, 4);
  const ComplexMatrix v = random_matrix(rng, 4, 3, 0.5);
  const std::vector<double> w{0.2, 0.5, 0.3};
  const double base = precoding::wsr_objective(c, v, 0.1, w);
  const std::vector<std::size_t> perm{2, 0, 1};
  ComplexMatrix cp(3, 4);
  ComplexMatrix vp(4, 3);
  std::vector<double> wp(3);
  for (std::size_t u = 0; u < 3; ++u) {
    for (std::size_t m = 0; m < 4; ++m) {
      cp(u, m) = c(perm[u], m);
      vp(m, u) = v(m, perm[u]);
    }
    wp[u] = w[perm[u]];
  }
  ComplexMatrix vr = v;
  const cplx rot = std::polar(1.0, 1.234);
  for (std::size_t m = 0; m < 4; ++m) vr(m, 1) *= rot;
  const double dev = std::max(std::abs(precoding::wsr_objective(cp, vp, 0.1, wp) - base),
                              std::abs(precoding::wsr_objective(c, vr, 0.1, w) - base));
  return check("precoding: WSR invariant to user relabeling and column phase", dev, 1e-12, "max deviation");
}

// --- training ---------------------------------------------------------------

CheckResult training_consistency(std::mt19937_64& rng) {
  const ChannelSample s = random_instance(rng, 3, 3, 4, 2, 1.0, 0.2);
  const std::vector<double> ph = random_phases(rng, 9);
  const ComplexMatrix v = precoding::mrt_precoder(
      channel::cascaded_channel(s, ph, channel::CascadeMode::closed_form), 1.0);
  Tape t;
  const NodeId p = t.constant(Tensor({9}, ph));
  const double tape = t.value(training::record_sample_objective(t, p, s, v)).item();
  const double direct = training::sample_objective(ph, s, v);
  return check("training: tape objective equals evaluation objective", std::abs(tape - direct) / std::abs(direct),
               1e-10, "relative deviation");
}

CheckResult training_gradients(std::mt19937_64& rng) {
  std::vector<ChannelSample> batch;
  for (int i = 0; i < 2; ++i) batch.push_back(random_instance(rng, 3, 3, 4, 2, 1.0, 0.2));
  const auto specs = risnet::full_csi_specs(4, 1);
  const risnet::NetworkParams np = risnet::init_params(specs, rng());
  std::vector<Tensor> feats;
  std::vector<ComplexMatrix> vs;
  for (const ChannelSample& s : batch) {
    feats.push_back(channel::compute_features(s, {}));
    vs.push_back(precoding::mrt_precoder(
        channel::cascaded_channel(s, std::vector<double>(9, 0.0), channel::CascadeMode::closed_form), 1.0));
  }
  auto objective = [&](std::vector<std::size_t> members) {
    return [&, members](Tape& t, std::span<const NodeId> params) {
      NodeId total = 0;
      for (std::size_t k = 0; k < members.size(); ++k) {
        const std::size_t i = members[k];
        const NodeId ph = risnet::record_forward(t, t.constant(feats[i]), np, params, {3, 3});
        const NodeId o = training::record_sample_objective(t, ph, batch[i], vs[i]);
        total = k == 0 ? o : ad::add(t, total, o);
      }
      return total;
    };
  };
  const std::vector<Tensor> point = np.flatten();
  const ad::GradcheckResult gc = ad::gradcheck(objective({0, 1}), point, 1e-5);
  // Batch gradient equals the sum of per-sample gradients.
  const auto whole = ad::value_and_grad(objective({0, 1}), point).second;
  const auto g0 = ad::value_and_grad(objective({0}), point).second;
  const auto g1 = ad::value_and_grad(objective({1}), point).second;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t p = 0; p < whole.size(); ++p)
    for (std::size_t e = 0; e < whole[p].size(); ++e) {
      const double d = whole[p].data[e] - g0[p].data[e] - g1[p].data[e];
      num += d * d;
      den += whole[p].data[e] * whole[p].data[e];
    }
  CheckResult r = check("training: batch gradient vs finite differences", gc.max_relative_error, 1e-4,
                        "max relative error");
  const double split = std::sqrt(num / std::max(den, 1e-300));
  r.passed = r.passed && split <= 1e-10;
  r.detail += ", batch-sum deviation " + fmt(split);
  return r;
}

CheckResult training_determinism(std::mt19937_64& rng) {
  const ChannelSample s = random_instance(rng, 3, 3, 4, 2, 1.0, 0.2);
  const risnet::NetworkParams np = risnet::init_params(risnet::full_csi_specs(4, 1), 5);
  const Tensor f = channel::compute_features(s, {});
  const ComplexMatrix v = precoding::mrt_precoder(s.d, 1.0);
  auto run = [&]() {
    Tape t;
    const auto pn = risnet::record_params(t, np, true);
    const NodeId o = training::record_sample_objective(
        t, risnet::record_forward(t, t.constant(f), np, pn, {3, 3}), s, v);
    std::vector<double> out{t.value(o).item()};
    for (const Tensor& g : t.backward(o)) out.insert(out.end(), g.data.begin(), g.data.end());
    return out;
  };
  CheckResult r;
  r.name = "autodiff: tape replay is bit-identical";
  r.passed = run() == run();
  r.detail = r.passed ? "identical" : "replays differ";
  return r;
}

}  // namespace

std::vector<CheckResult> run_all(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<const char*, std::function<CheckResult()>>> checks{
      {"linalg: LU", [&] { return linalg_lu(rng); }},
      {"linalg: pinv", [&] { return linalg_pinv(rng); }},
      {"linalg: associativity", [&] { return linalg_associativity(rng); }},
      {"linalg: spectral norm", [&] { return linalg_spectral_norm(rng); }},
      {"autodiff: primitives", [&] { return autodiff_primitives(rng); }},
      {"autodiff: replay", [&] { return training_determinism(rng); }},
      {"channel: oracle", [&] { return channel_oracle(rng); }},
      {"channel: linearity", [&] { return channel_linear_in_d(rng); }},
      {"channel: features", [&] { return channel_features(rng); }},
      {"channel: coupling norm", [] { return channel_coupling_norm(); }},
      {"risnet: loop/tensor", [&] { return risnet_loop_tensor(rng); }},
      {"risnet: equivariance", [&] { return risnet_equivariance(rng); }},
      {"risnet: invariance", [&] { return risnet_invariance(rng); }},
      {"risnet: parameter count", [] { return risnet_param_count(); }},
      {"risnet: phase constraints", [&] { return risnet_phase_constraints(rng); }},
      {"precoding: WMMSE", [&] { return precoding_wmmse(rng); }},
      {"precoding: invariances", [&] { return precoding_invariances(rng); }},
      {"training: consistency", [&] { return training_consistency(rng); }},
      {"training: gradients", [&] { return training_gradients(rng); }},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, c] : checks) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = c();
    } catch (const std::exception& e) {
      r.name = name;
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace riswsr::validation
