// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "riswsr/config.hpp"
#include "riswsr/kernels.hpp"
#include "riswsr/precoding.hpp"
#include "riswsr/risnet.hpp"
#include "riswsr/training.hpp"
#include "riswsr/validation.hpp"

using namespace riswsr;
using linalg::ComplexMatrix;
using linalg::cplx;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  int id = 0;
  std::string title;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::string fmt(double x, int digits = 3) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << x;
  return ss.str();
}

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Running record of every phase vector and precoder produced by the suite.
struct Constraints {
  double max_modulus_dev = 0.0;
  bool offdiag_zero = true;
  double max_power_excess = -INFINITY;
  std::size_t phases_seen = 0;
  std::size_t precoders_seen = 0;

  void phases(std::span<const double> ph) {
    const ComplexMatrix phi = risnet::phases_to_phi(ph);
    for (std::size_t r = 0; r < phi.rows(); ++r)
      for (std::size_t c = 0; c < phi.cols(); ++c) {
        if (r == c) max_modulus_dev = std::max(max_modulus_dev, std::abs(std::abs(phi(r, c)) - 1.0));
        else offdiag_zero = offdiag_zero && phi(r, c).real() == 0.0 && phi(r, c).imag() == 0.0;
      }
    ++phases_seen;
  }
  void precoder(const ComplexMatrix& v, double budget) {
    max_power_excess = std::max(max_power_excess, precoding::transmit_power(v) - budget);
    ++precoders_seen;
  }
};

Constraints g_constraints;

std::vector<double> random_phases(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  std::vector<double> p(n);
  for (double& x : p) x = u(rng);
  return p;
}

ad::Tensor random_tensor(std::mt19937_64& rng, ad::Shape shape) {
  ad::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : t.data) x = u(rng);
  return t;
}

risnet::LayerParams random_layer(std::mt19937_64& rng, risnet::LayerSpec spec) {
  risnet::LayerParams lp{spec, {}};
  for (std::size_t i = 0; i < spec.classes() * spec.units(); ++i)
    lp.units.push_back({random_tensor(rng, {spec.q, spec.in_dim}), random_tensor(rng, {spec.q})});
  return lp;
}

ad::Tensor permute_users(const ad::Tensor& f, const std::vector<std::size_t>& perm) {
  ad::Tensor out = f;
  const std::size_t u = f.shape[2];
  for (std::size_t i = 0; i < f.size() / u; ++i)
    for (std::size_t k = 0; k < u; ++k) out.data[i * u + k] = f.data[i * u + perm[k]];
  return out;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Scale every entry of H, G and D so the largest modulus equals `cap`.
void scale_gains(channel::ChannelSample& s, double cap) {
  const double m = std::max({s.h.max_abs(), s.g.max_abs(), s.d.max_abs()});
  s.h *= cap / m;
  s.g *= cap / m;
  s.d *= cap / m;
}

// ---------------------------------------------------------------------------

Outcome criterion1() {
  Outcome o{1, "channel oracle equivalence"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst_second = 0.0, worst_closed = 0.0, worst_norm = 0.0;
  const std::size_t sides[] = {2, 4, 6};
  for (int i = 0; i < 50; ++i) {
    const std::size_t side = sides[i % 3];
    channel::ChannelSample s = validation::random_instance(rng, side, side, 4, 2, 1.0, 0.3);
    worst_norm = std::max(worst_norm, linalg::spectral_norm(s.s_ii, 500));
    const auto ph = random_phases(rng, s.elements());
    g_constraints.phases(ph);
    worst_second = std::max(worst_second, linalg::relative_error(
        channel::cascaded_channel(s, ph, channel::CascadeMode::with_second_order),
        channel::oracle_channel_general(s, ph)));
    scale_gains(s, 1e-3);
    worst_closed = std::max(worst_closed, linalg::relative_error(
        channel::cascaded_channel(s, ph, channel::CascadeMode::closed_form),
        channel::oracle_channel_general(s, ph)));
  }
  o.seconds = since(t0);
  o.passed = worst_second <= 1e-8 && worst_closed <= 1e-5 && worst_norm < 0.9 && o.seconds < 10.0;
  o.detail = "second-order rel err " + fmt(worst_second) + " (<= 1e-8), closed-form at gains <= 1e-3 rel err " +
             fmt(worst_closed) + " (<= 1e-5), max ||S_II|| " + fmt(worst_norm);
  return o;
}

Outcome criterion2() {
  Outcome o{2, "no-coupling reduction"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t side = 2 + i % 3;
    channel::ChannelSample s = validation::random_instance(rng, side, side, 4, 2, 1.0, 0.3);
    s.s_ii = ComplexMatrix(s.elements(), s.elements());
    // Entries at the Friis gain; the second-order term is O(N gain^2).
    scale_gains(s, channel::friis_gain(3.5e9, 20.0));
    const auto ph = random_phases(rng, s.elements());
    g_constraints.phases(ph);
    std::vector<cplx> diag;
    for (double p : ph) diag.push_back(std::polar(1.0, p));
    const ComplexMatrix ref =
        s.d + linalg::cmatmul(linalg::cmatmul(s.g, ComplexMatrix::diagonal(diag)), s.h);
    for (auto mode : {channel::CascadeMode::closed_form, channel::CascadeMode::with_second_order,
                      channel::CascadeMode::no_coupling})
      worst = std::max(worst, linalg::relative_error(channel::cascaded_channel(s, ph, mode), ref));
  }
  o.seconds = since(t0);
  o.passed = worst <= 1e-12;
  o.detail = "max rel deviation from D + G Phi H over all three modes " + fmt(worst) + " (<= 1e-12)";
  return o;
}

Outcome criterion3() {
  Outcome o{3, "loop/tensor equality"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  double worst = 0.0;
  int layers = 0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t p = (i & 1) ? 16 : 4;
    const std::size_t q = (i & 2) ? 16 : 4;
    const std::size_t side = (i & 4) ? 9 : 3;
    const std::size_t u = (i & 8) ? 4 : 2;
    const auto kind = i % 3 == 2 ? risnet::LayerKind::expansion : risnet::LayerKind::normal;
    const ad::Tensor f = random_tensor(rng, {p, side * side, u});
    const risnet::LayerParams lp = random_layer(rng, {kind, p, q});
    worst = std::max(worst, max_diff(risnet::layer_forward(f, lp, {side, side}, risnet::Mode::loop).data,
                                     risnet::layer_forward(f, lp, {side, side}, risnet::Mode::tensor).data));
    ++layers;
  }
  o.seconds = since(t0);
  o.passed = worst <= 1e-10 && o.seconds < 5.0;
  o.detail = std::to_string(layers) + " layers, max entry deviation " + fmt(worst) + " (<= 1e-10)";
  return o;
}

Outcome criterion4() {
  Outcome o{4, "permutation invariance"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  const std::size_t users = 4;
  double worst_net = 0.0;
  struct Net {
    std::vector<risnet::LayerSpec> specs;
    risnet::Grid grid;
  };
  const Net nets[] = {{risnet::full_csi_specs(), {18, 18}}, {risnet::partial_csi_specs(), {2, 2}}};
  for (const Net& net : nets) {
    const risnet::NetworkParams params = risnet::init_params(net.specs, rng());
    for (int sample = 0; sample < 10; ++sample) {
      const ad::Tensor f = random_tensor(rng, {5, net.grid.size(), users});
      const auto base = risnet::forward(f, params, net.grid).phases;
      g_constraints.phases(base);
      std::vector<std::size_t> perm(users);
      for (int k = 0; k < 20; ++k) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        worst_net = std::max(worst_net, max_diff(base, risnet::forward(permute_users(f, perm), params, net.grid).phases));
      }
    }
  }
  double worst_layer = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto kind = i % 2 ? risnet::LayerKind::expansion : risnet::LayerKind::normal;
    const ad::Tensor f = random_tensor(rng, {16, 9, users});
    const risnet::LayerParams lp = random_layer(rng, {kind, 16, 16});
    std::vector<std::size_t> perm(users);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const ad::Tensor a = risnet::layer_forward(f, lp, {3, 3}, risnet::Mode::tensor);
    const ad::Tensor b = risnet::layer_forward(permute_users(f, perm), lp, {3, 3}, risnet::Mode::tensor);
    worst_layer = std::max(worst_layer, max_diff(permute_users(a, perm).data, b.data));
  }
  o.seconds = since(t0);
  o.passed = worst_net <= 1e-9 && worst_layer <= 1e-12 && o.seconds < 10.0;
  o.detail = "network max |dphi| " + fmt(worst_net) + " (<= 1e-9), per-layer max deviation " + fmt(worst_layer) +
             " (<= 1e-12)";
  return o;
}

Outcome criterion5() {
  Outcome o{5, "gradient correctness"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(505);
  const channel::ChannelSample s = validation::random_instance(rng, 3, 3, 4, 2, 1.0, 0.3);
  const auto specs = risnet::full_csi_specs(16, 1);
  const risnet::NetworkParams np = risnet::init_params(specs, 55);
  const ad::Tensor feats = channel::compute_features(s, {});
  const auto c0 = channel::cascaded_channel(s, risnet::forward(feats, np, {3, 3}).phases,
                                            channel::CascadeMode::closed_form);
  const ComplexMatrix v = precoding::wmmse_precoder(c0, s.weights, s.noise_power, s.power_budget).v;
  g_constraints.precoder(v, s.power_budget);
  const auto fn = [&](ad::Tape& t, std::span<const ad::NodeId> params) {
    const ad::NodeId ph = risnet::record_forward(t, t.constant(feats), np, params, {3, 3});
    return training::record_sample_objective(t, ph, s, v);
  };
  const auto point = np.flatten();
  const ad::GradcheckResult r = ad::gradcheck(fn, point, 1e-5);
  o.seconds = since(t0);
  o.passed = r.max_relative_error < 1e-4 && o.seconds < 30.0;
  o.detail = std::to_string(np.parameter_count()) + " parameters, max rel error " + fmt(r.max_relative_error) +
             " (< 1e-4)";
  return o;
}

Outcome criterion7() {
  Outcome o{7, "WMMSE behavior"};
  const auto t0 = Clock::now();
  std::mt19937_64 rng(707);
  double worst_drop = 0.0, worst_power = 0.0, worst_single = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t u = 2 + i % 3;
    const ComplexMatrix c = validation::random_matrix(rng, u, 4);
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w(u);
    double sum = 0.0;
    for (double& x : w) sum += (x = e(rng));
    for (double& x : w) x /= sum;
    const double sigma2 = std::pow(10.0, -2.0 + 2.0 * (i % 5) / 4.0);
    const double budget = 0.5 + (i % 4);
    const precoding::WmmseResult r = precoding::wmmse_precoder(c, w, sigma2, budget);
    for (std::size_t k = 1; k < r.wsr_trace.size(); ++k)
      worst_drop = std::max(worst_drop, r.wsr_trace[k - 1] - r.wsr_trace[k]);
    worst_power = std::max(worst_power, std::abs(precoding::transmit_power(r.v) - budget) / budget);
    g_constraints.precoder(r.v, budget);

    const ComplexMatrix c1 = validation::random_matrix(rng, 1, 4);
    const precoding::WmmseResult r1 = precoding::wmmse_precoder(c1, std::vector<double>{1.0}, sigma2, budget);
    const double cap = std::log2(1.0 + budget * std::pow(c1.frobenius_norm(), 2) / sigma2);
    worst_single = std::max(worst_single,
                            std::abs(precoding::wsr_objective(c1, r1.v, sigma2, std::vector<double>{1.0}) - cap));
    g_constraints.precoder(r1.v, budget);
  }
  o.seconds = since(t0);
  o.passed = worst_drop <= 1e-9 && worst_single <= 1e-9 && worst_power <= 1e-8 && o.seconds < 30.0;
  o.detail = "max WSR drop " + fmt(worst_drop) + " (<= 1e-9), single-user capacity gap " + fmt(worst_single) +
             " (<= 1e-9), power rel gap " + fmt(worst_power) + " (<= 1e-8)";
  return o;
}

// ---------------------------------------------------------------------------
// Training runs on the desk configuration.

struct RunSummary {
  double final_test = 0.0;
  double baseline = 0.0;
  double seconds = 0.0;
  risnet::NetworkParams params;
};

RunSummary desk_run(config::RunConfig cfg, const std::string& label) {
  const auto t0 = Clock::now();
  const auto [train, test] =
      training::build_dataset(cfg.geometry, cfg.regime, cfg.sizes, cfg.seed, cfg.generator);
  RunSummary out;
  out.baseline = training::random_phase_stats(test, cfg.baseline_seed, cfg.train.wmmse).mean;
  const auto specs = cfg.layer_specs();
  const training::TrainResult res =
      training::train_ao(train, test, specs, cfg.train_config(), [&](const training::EpochRecord& e) {
        std::fprintf(stderr, "  [%s] epoch %zu test %.4f (x%.3f random) %.1fs\n", label.c_str(), e.epoch,
                     e.test_wsr, e.test_wsr / out.baseline, e.seconds);
      });
  out.final_test = res.record.epochs.back().test_wsr;
  out.params = res.params;
  out.seconds = since(t0);

  // Constraint audit on the trained network's test-set decisions.
  const auto elements = training::input_elements(test.geometry, cfg.train.csi, specs);
  const risnet::Grid grid = training::network_input_grid(test.geometry, cfg.train.csi, specs);
  for (const auto& s : test.samples) {
    const auto ph = risnet::forward(channel::compute_features(s, test.stats, elements), res.params, grid).phases;
    g_constraints.phases(ph);
    const auto c = channel::cascaded_channel(s, ph, channel::CascadeMode::closed_form);
    g_constraints.precoder(precoding::wmmse_precoder(c, s.weights, s.noise_power, s.power_budget).v,
                           s.power_budget);
  }
  return out;
}

// Epoch count for each of the four runs of criterion 9.
constexpr std::size_t kOrderingEpochs = 15;

Outcome criterion8() {
  Outcome o{8, "desk-scale training run"};
  const config::RunConfig cfg = config::preset("desk-deterministic");
  const RunSummary r = desk_run(cfg, "c8 full/deterministic");
  o.seconds = r.seconds;
  const double ratio = r.final_test / r.baseline;
  o.passed = ratio >= 1.2 && cfg.train.epochs <= 500 && o.seconds <= 600.0;
  o.detail = std::to_string(cfg.train.epochs) + " epochs, final test WSR " + fmt(r.final_test, 5) +
             " vs random-phase " + fmt(r.baseline, 5) + ", ratio " + fmt(ratio, 4) + " (>= 1.2), " +
             fmt(o.seconds, 4) + " s (<= 600)";
  return o;
}

Outcome criterion9() {
  Outcome o{9, "partial-CSI ordering"};
  auto make = [](channel::Regime regime, training::CsiMode mode) {
    config::RunConfig cfg = config::preset("desk-deterministic");
    cfg.regime = regime;
    cfg.train.csi = {mode, 2, 2};
    cfg.train.epochs = kOrderingEpochs;
    cfg.validate();
    return cfg;
  };
  using training::CsiMode;
  const RunSummary det_full = desk_run(make(channel::Regime::deterministic, CsiMode::full), "c9 full/deterministic");
  const RunSummary det_part =
      desk_run(make(channel::Regime::deterministic, CsiMode::partial), "c9 partial/deterministic");
  const RunSummary iid_full = desk_run(make(channel::Regime::iid, CsiMode::full), "c9 full/iid");
  const RunSummary iid_part = desk_run(make(channel::Regime::iid, CsiMode::partial), "c9 partial/iid");
  o.seconds = det_full.seconds + det_part.seconds + iid_full.seconds + iid_part.seconds;
  const double a = det_part.final_test / det_full.final_test;
  const double b_part = iid_part.final_test / iid_part.baseline;
  const double b_full = iid_full.final_test / iid_full.baseline;
  o.passed = a >= 0.85 && b_part <= 1.1 && b_full > 1.2 && o.seconds <= 1200.0;
  o.detail = std::to_string(kOrderingEpochs) + " epochs per run; (a) deterministic partial/full " + fmt(a, 4) +
             " (>= 0.85); (b) iid partial/random " + fmt(b_part, 4) + " (<= 1.1), iid full/random " +
             fmt(b_full, 4) + " (> 1.2); " + fmt(o.seconds, 4) + " s (<= 1200)";
  return o;
}

Outcome criterion10() {
  Outcome o{10, "reproducibility"};
  const auto t0 = Clock::now();
  config::RunConfig cfg = config::preset("desk-deterministic");
  cfg.sizes = {32, 8};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 8;
  bool same = true;
  std::string why;
  const auto [train1, test1] = training::build_dataset(cfg.geometry, cfg.regime, cfg.sizes, cfg.seed, cfg.generator);
  const auto [train2, test2] = training::build_dataset(cfg.geometry, cfg.regime, cfg.sizes, cfg.seed, cfg.generator);
  for (std::size_t i = 0; i < train1.size(); ++i)
    if (!(train1.samples[i].g == train2.samples[i].g) || !(train1.samples[i].h == train2.samples[i].h) ||
        !(train1.samples[i].d == train2.samples[i].d) || train1.samples[i].weights != train2.samples[i].weights) {
      same = false;
      why = "generated data differs";
    }
  const auto specs = cfg.layer_specs();
  training::TrainConfig tc = cfg.train_config();
  std::vector<training::TrainResult> runs;
  for (std::size_t threads : {1u, 1u, 2u, 4u}) {
    tc.threads = threads;
    runs.push_back(training::train_ao(train1, test1, specs, tc));
  }
  for (std::size_t r = 1; r < runs.size(); ++r) {
    for (std::size_t e = 0; e < runs[0].record.epochs.size(); ++e) {
      if (runs[r].record.epochs[e].train_wsr != runs[0].record.epochs[e].train_wsr ||
          runs[r].record.epochs[e].test_wsr != runs[0].record.epochs[e].test_wsr) {
        same = false;
        why = "run record differs";
      }
    }
    const auto a = runs[0].params.flatten();
    const auto b = runs[r].params.flatten();
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k].data != b[k].data) {
        same = false;
        why = "parameters differ";
      }
  }
  const auto base1 = training::random_phase_stats(test1, cfg.baseline_seed, cfg.train.wmmse, 1).per_sample;
  const auto base3 = training::random_phase_stats(test1, cfg.baseline_seed, cfg.train.wmmse, 3).per_sample;
  if (base1 != base3) {
    same = false;
    why = "baselines differ across thread counts";
  }
  o.seconds = since(t0);
  o.passed = same;
  o.detail = same ? "data, run records, parameters and baselines bit-identical across reruns and 1/2/3/4 threads"
                  : why;
  return o;
}

Outcome criterion6() {
  Outcome o{6, "constraint satisfaction"};
  const Constraints& c = g_constraints;
  o.passed = c.max_modulus_dev <= 1e-15 && c.offdiag_zero && c.max_power_excess <= precoding::kPowerSlack &&
             c.phases_seen > 0 && c.precoders_seen > 0;
  o.detail = std::to_string(c.phases_seen) + " phase vectors: max ||phi|-1| " + fmt(c.max_modulus_dev) +
             " (<= 1e-15), off-diagonals " + (c.offdiag_zero ? "exactly 0" : "NONZERO") + "; " +
             std::to_string(c.precoders_seen) + " precoders: max trace(VV^H) - E_Tr " + fmt(c.max_power_excess) +
             " (<= 1e-9)";
  return o;
}

void print(const Outcome& o) {
  std::printf("%s criterion %d (%s): %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", o.id, o.title.c_str(),
              o.detail.c_str(), o.seconds);
  std::fflush(stdout);
}

}  // namespace

int main() {
  std::printf("kernels: %s\n", kernels::active().name);
  const std::vector<std::pair<int, std::function<Outcome()>>> order{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},   {5, criterion5},
      {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}, {6, criterion6}};
  std::vector<Outcome> results;
  for (const auto& [id, run] : order) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.id = id;
      o.title = "aborted";
      o.passed = false;
      o.detail = std::string("threw: ") + e.what();
    }
    std::fprintf(stderr, "finished criterion %d\n", o.id);
    results.push_back(o);
  }
  std::sort(results.begin(), results.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  bool all = true;
  for (const Outcome& o : results) {
    print(o);
    all = all && o.passed;
  }
  std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return all ? 0 : 1;
}
