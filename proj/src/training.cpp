// SPDX-License-Identifier: Apache-2.0

#include "riswsr/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>
#include <thread>

#include "riswsr/error.hpp"

namespace riswsr::training {

using ad::NodeId;
using ad::Tape;
using ad::Tensor;
using channel::ChannelSample;
using linalg::ComplexMatrix;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

std::string to_string(CsiMode m) { return m == CsiMode::full ? "full" : "partial"; }

CsiMode csi_mode_from_string(const std::string& s) {
  if (s == "full") return CsiMode::full;
  if (s == "partial") return CsiMode::partial;
  throw ConfigError("unknown csi mode '" + s + "' (expected full or partial)");
}

void Dataset::validate() const {
  if (samples.empty()) throw DomainError("dataset: no samples");
  geometry.validate();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ChannelSample& s = samples[i];
    if (s.elements() != geometry.elements() || s.users() != geometry.users ||
        s.antennas() != geometry.bs_antennas || s.regime != regime) {
      throw DimensionError("dataset: sample " + std::to_string(i) + " does not match the geometry/regime");
    }
  }
}

std::pair<Dataset, Dataset> build_dataset(const channel::GeometryConfig& geometry,
                                          channel::Regime regime, DatasetSizes sizes,
                                          std::uint64_t master_seed,
                                          const channel::GeneratorConfig& generator) {
  if (sizes.train == 0 || sizes.test == 0) throw DomainError("build_dataset: split sizes must be >= 1");
  channel::GeneratorConfig gen = generator;
  if (!gen.deployment_seed) gen.deployment_seed = channel::derive_seed(master_seed, 2);

  Dataset train;
  train.geometry = geometry;
  train.regime = regime;
  train.split = Split::train;
  train.master_seed = channel::derive_seed(master_seed, 0);
  train.samples = channel::generate_channels(geometry, regime, sizes.train, train.master_seed, gen);
  gen.noise_power = train.samples.front().noise_power;
  train.generator = gen;
  train.stats = channel::compute_feature_stats(train.samples);

  Dataset test;
  test.geometry = geometry;
  test.regime = regime;
  test.split = Split::test;
  test.master_seed = channel::derive_seed(master_seed, 1);
  test.generator = gen;
  test.samples = channel::generate_channels(geometry, regime, sizes.test, test.master_seed, gen);
  test.stats = train.stats;
  return {std::move(train), std::move(test)};
}

std::vector<std::size_t> input_elements(const channel::GeometryConfig& geometry, const CsiConfig& csi,
                                        std::span<const risnet::LayerSpec> specs) {
  const std::size_t expansions = risnet::expansion_count(specs);
  if (csi.mode == CsiMode::full) {
    if (expansions != 0) throw ConfigError("full-CSI networks cannot contain expansion layers");
    std::vector<std::size_t> all(geometry.elements());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  if (expansions == 0) throw ConfigError("partial-CSI networks need at least one expansion layer");
  return channel::anchor_indices(geometry, csi.anchor_rows, csi.anchor_cols, expansions);
}

risnet::Grid network_input_grid(const channel::GeometryConfig& geometry, const CsiConfig& csi,
                                std::span<const risnet::LayerSpec> specs) {
  input_elements(geometry, csi, specs);
  if (csi.mode == CsiMode::full) return {geometry.ris_rows, geometry.ris_cols};
  return {csi.anchor_rows, csi.anchor_cols};
}

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0 || threads == 0) {
    throw ConfigError("train: epochs, batch_size and threads must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train: learning_rate must be finite and >= 0");
  }
  wmmse.validate();
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_index = n;
  std::exception_ptr err;
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        // Report the lowest failing index so errors do not depend on scheduling.
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, n);
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

EvalStats summarize(std::vector<double> per_sample) {
  EvalStats st;
  st.per_sample = std::move(per_sample);
  if (st.per_sample.empty()) return st;
  double sum = 0.0;
  for (double x : st.per_sample) sum += x;
  st.mean = sum / static_cast<double>(st.per_sample.size());
  double var = 0.0;
  for (double x : st.per_sample) var += (x - st.mean) * (x - st.mean);
  st.stddev = std::sqrt(var / static_cast<double>(st.per_sample.size()));
  return st;
}

namespace {

double wmmse_wsr(const ChannelSample& s, std::span<const double> phases,
                 const precoding::WmmseConfig& cfg) {
  const ComplexMatrix c = channel::cascaded_channel(s, phases, channel::CascadeMode::closed_form);
  const precoding::WmmseResult r =
      precoding::wmmse_precoder(c, s.weights, s.noise_power, s.power_budget, cfg);
  return precoding::wsr_objective(c, r.v, s.noise_power, s.weights);
}

std::vector<Tensor> dataset_features(const Dataset& data, std::span<const std::size_t> elements,
                                     std::size_t threads) {
  std::vector<Tensor> out(data.size());
  const bool all = elements.size() == data.geometry.elements();
  parallel_for(data.size(), threads, [&](std::size_t i) {
    out[i] = all ? channel::compute_features(data.samples[i], data.stats)
                 : channel::compute_features(data.samples[i], data.stats, elements);
  });
  return out;
}

}  // namespace

EvalStats evaluate_phases(const Dataset& data, const PhaseSource& phases,
                          const precoding::WmmseConfig& wmmse, std::size_t threads) {
  std::vector<double> wsr(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    wsr[i] = wmmse_wsr(data.samples[i], phases(i), wmmse);
  });
  return summarize(std::move(wsr));
}

EvalStats evaluate(const risnet::NetworkParams& params, const Dataset& data, const CsiConfig& csi,
                   const precoding::WmmseConfig& wmmse, std::size_t threads) {
  data.validate();
  const std::vector<risnet::LayerSpec> specs = params.specs();
  const std::vector<std::size_t> elements = input_elements(data.geometry, csi, specs);
  const risnet::Grid grid = network_input_grid(data.geometry, csi, specs);
  std::vector<double> wsr(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const ChannelSample& s = data.samples[i];
    const Tensor f = elements.size() == s.elements() ? channel::compute_features(s, data.stats)
                                                     : channel::compute_features(s, data.stats, elements);
    const risnet::PhaseConfiguration p = risnet::forward(f, params, grid);
    if (p.phases.size() != s.elements()) {
      throw DimensionError("evaluate: network yields " + std::to_string(p.phases.size()) +
                           " phases for " + std::to_string(s.elements()) + " elements");
    }
    wsr[i] = wmmse_wsr(s, p.phases, wmmse);
  });
  return summarize(std::move(wsr));
}

EvalStats random_phase_stats(const Dataset& data, std::uint64_t seed,
                             const precoding::WmmseConfig& wmmse, std::size_t threads) {
  const std::size_t n = data.geometry.elements();
  return evaluate_phases(
      data,
      [&](std::size_t i) { return precoding::random_phase_baseline(n, channel::derive_seed(seed, i)); },
      wmmse, threads);
}

NodeId record_sample_objective(Tape& t, NodeId phases, const ChannelSample& s, const ComplexMatrix& v) {
  const std::size_t n = s.elements();
  const std::size_t m = s.antennas();
  const std::size_t users = s.users();
  if (t.value(phases).shape != ad::Shape{n}) {
    throw DimensionError("sample objective: phases " + ad::shape_to_string(t.value(phases).shape) +
                         " for " + std::to_string(n) + " elements");
  }
  if (v.rows() != m || v.cols() != users) {
    throw DimensionError("sample objective: precoder " + v.shape_string());
  }
  const NodeId phi = ad::reshape(t, ad::complex_pack(t, ad::cos(t, phases), ad::sin(t, phases)), {n, 1, 2});

  // X (I - Phi S_II) = G
  const NodeId phi_s = ad::complex_mul(t, ad::broadcast(t, phi, {n, n, 2}),
                                       t.constant(Tensor::from_complex(s.s_ii)));
  const NodeId a = ad::sub(t, t.constant(Tensor::from_complex(ComplexMatrix::identity(n))), phi_s);
  const NodeId x = ad::complex_solve_right(t, a, t.constant(Tensor::from_complex(s.g)));

  // C = D + X Phi H, L = C V
  const NodeId phi_h = ad::complex_mul(t, ad::broadcast(t, phi, {n, m, 2}),
                                       t.constant(Tensor::from_complex(s.h)));
  const NodeId c = ad::add(t, t.constant(Tensor::from_complex(s.d)), ad::complex_matmul(t, x, phi_h));
  const NodeId l = ad::complex_matmul(t, c, t.constant(Tensor::from_complex(v)));
  const NodeId power = ad::magnitude_squared(t, l);  // [U, U]

  std::vector<std::size_t> diag(users);
  for (std::size_t u = 0; u < users; ++u) diag[u] = u * users + u;
  const NodeId signal = ad::gather(t, ad::reshape(t, power, {users * users}), 0, diag);
  const NodeId total = ad::reshape(t, ad::sum_axis(t, power, 1), {users});
  const NodeId noise = t.constant(Tensor({users}, std::vector<double>(users, s.noise_power)));
  const NodeId denom = ad::add(t, ad::sub(t, total, signal), noise);
  const NodeId sinr = ad::mul(t, signal, ad::reciprocal(t, denom));
  const NodeId ones = t.constant(Tensor({users}, std::vector<double>(users, 1.0)));
  const NodeId rate = ad::scale(t, ad::log(t, ad::add(t, ones, sinr)), 1.0 / std::numbers::ln2);
  const NodeId weighted = ad::mul(t, t.constant(Tensor({users}, s.weights)), rate);
  return ad::sum_axis(t, weighted, 0);
}

double sample_objective(std::span<const double> phases, const ChannelSample& s, const ComplexMatrix& v) {
  const ComplexMatrix c = channel::cascaded_channel(s, phases, channel::CascadeMode::closed_form);
  return precoding::wsr_objective(c, v, s.noise_power, s.weights);
}

TrainResult train_ao(const Dataset& train, const Dataset& test, std::span<const risnet::LayerSpec> specs,
                     const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  train.validate();
  test.validate();
  if (!(train.geometry == test.geometry)) throw ConfigError("train_ao: train and test geometries differ");
  risnet::validate_specs(specs, channel::kInputFeatures);

  const std::vector<std::size_t> elements = input_elements(train.geometry, cfg.csi, specs);
  const risnet::Grid grid = network_input_grid(train.geometry, cfg.csi, specs);
  const std::vector<Tensor> features = dataset_features(train, elements, cfg.threads);

  TrainResult result;
  result.params = risnet::init_params(specs, cfg.seed);
  std::vector<Tensor> flat = result.params.flatten();
  ad::AdamState adam = ad::make_adam_state(flat);

  const std::size_t n = train.size();
  std::vector<ComplexMatrix> precoders(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(channel::derive_seed(cfg.seed, 0x5Bu));

  std::vector<std::vector<Tensor>> grads(cfg.batch_size);
  std::vector<double> objectives(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const bool refresh = epoch == 0 || (cfg.precoder_refresh_every > 0 &&
                                        epoch % cfg.precoder_refresh_every == 0);
    if (refresh) {
      parallel_for(n, cfg.threads, [&](std::size_t i) {
        const ChannelSample& s = train.samples[i];
        const risnet::PhaseConfiguration p = risnet::forward(features[i], result.params, grid);
        const ComplexMatrix c = channel::cascaded_channel(s, p.phases, channel::CascadeMode::closed_form);
        precoders[i] =
            precoding::wmmse_precoder(c, s.weights, s.noise_power, s.power_budget, cfg.wmmse).v;
      });
    }

    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_sum = 0.0;
    for (std::size_t b0 = 0, batch = 0; b0 < n; b0 += cfg.batch_size, ++batch) {
      const std::size_t len = std::min(cfg.batch_size, n - b0);
      parallel_for(len, cfg.threads, [&](std::size_t k) {
        const std::size_t idx = order[b0 + k];
        Tape t;
        const std::vector<NodeId> pn = risnet::record_params(t, result.params, true);
        const NodeId x = t.constant(features[idx]);
        const NodeId phases = risnet::record_forward(t, x, result.params, pn, grid);
        const NodeId obj = record_sample_objective(t, phases, train.samples[idx], precoders[idx]);
        objectives[k] = t.value(obj).item();
        grads[k] = std::isfinite(objectives[k]) ? t.backward(obj) : std::vector<Tensor>{};
      });
      // Canonical accumulation order: batch position.
      std::vector<Tensor> total;
      for (std::size_t k = 0; k < len; ++k) {
        if (!std::isfinite(objectives[k])) {
          throw NonFiniteError("train_ao: non-finite objective at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(batch) + ", sample " +
                               std::to_string(order[b0 + k]));
        }
        epoch_sum += objectives[k];
        if (k == 0) {
          total = std::move(grads[0]);
        } else {
          for (std::size_t p = 0; p < total.size(); ++p) {
            double* dst = total[p].data.data();
            const double* src = grads[k][p].data.data();
            for (std::size_t e = 0; e < total[p].size(); ++e) dst[e] += src[e];
          }
        }
      }
      ad::adam_step(flat, total, adam, cfg.learning_rate, true);
      result.params.assign(flat);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_wsr = epoch_sum / static_cast<double>(n);
    rec.test_wsr = evaluate(result.params, test, cfg.csi, cfg.wmmse, cfg.threads).mean;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.record.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace riswsr::training
