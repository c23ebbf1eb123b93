// SPDX-License-Identifier: Apache-2.0
//
// Unsupervised RISnet training by gradient ascent on the weighted sum-rate,
// alternating with WMMSE precoder refreshes, plus held-out evaluation.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "riswsr/autodiff.hpp"
#include "riswsr/channel.hpp"
#include "riswsr/precoding.hpp"
#include "riswsr/risnet.hpp"

namespace riswsr::training {

enum class Split { train, test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
  channel::GeometryConfig geometry;
  channel::Regime regime = channel::Regime::deterministic;
  channel::GeneratorConfig generator;
  Split split = Split::train;
  std::uint64_t master_seed = 0;
  channel::FeatureStats stats;
  std::vector<channel::ChannelSample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  /// Non-empty, shapes consistent with the geometry, one regime.
  void validate() const;
};

struct DatasetSizes {
  std::size_t train = 10240;
  std::size_t test = 1024;
};

/// Train and test splits from disjoint seed streams of one deployment. Noise
/// power and feature statistics come from the training split.
std::pair<Dataset, Dataset> build_dataset(const channel::GeometryConfig& geometry,
                                          channel::Regime regime, DatasetSizes sizes,
                                          std::uint64_t master_seed,
                                          const channel::GeneratorConfig& generator = {});

enum class CsiMode { full, partial };
std::string to_string(CsiMode m);
CsiMode csi_mode_from_string(const std::string& s);

struct CsiConfig {
  CsiMode mode = CsiMode::full;
  std::size_t anchor_rows = 2;  // partial only
  std::size_t anchor_cols = 2;
  friend bool operator==(const CsiConfig&, const CsiConfig&) = default;
};

/// Element indices fed to the network (all elements for full CSI).
std::vector<std::size_t> input_elements(const channel::GeometryConfig& geometry, const CsiConfig& csi,
                                        std::span<const risnet::LayerSpec> specs);
risnet::Grid network_input_grid(const channel::GeometryConfig& geometry, const CsiConfig& csi,
                                std::span<const risnet::LayerSpec> specs);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t precoder_refresh_every = 1;  // 0: only before the first epoch
  std::uint64_t seed = 1;
  CsiConfig csi;
  std::size_t threads = 1;
  precoding::WmmseConfig wmmse;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_wsr = 0.0;
  double test_wsr = 0.0;
  double seconds = 0.0;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  std::string checkpoint;
  std::string config_echo;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainResult {
  risnet::NetworkParams params;
  RunRecord record;
};

TrainResult train_ao(const Dataset& train, const Dataset& test,
                     std::span<const risnet::LayerSpec> specs, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {});

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> per_sample;
};

EvalStats summarize(std::vector<double> per_sample);

/// Network phases -> WMMSE -> WSR for each sample.
EvalStats evaluate(const risnet::NetworkParams& params, const Dataset& data, const CsiConfig& csi,
                   const precoding::WmmseConfig& wmmse = {}, std::size_t threads = 1);

/// WMMSE WSR for externally supplied phases.
using PhaseSource = std::function<std::vector<double>(std::size_t sample_index)>;
EvalStats evaluate_phases(const Dataset& data, const PhaseSource& phases,
                          const precoding::WmmseConfig& wmmse = {}, std::size_t threads = 1);

/// Random phases per sample, seeded by derive_seed(seed, index).
EvalStats random_phase_stats(const Dataset& data, std::uint64_t seed,
                             const precoding::WmmseConfig& wmmse = {}, std::size_t threads = 1);

/// Weighted sum-rate of one sample for phases (a [N] node) and a fixed V,
/// through the closed-form coupled channel. Returns a [1] node.
ad::NodeId record_sample_objective(ad::Tape& tape, ad::NodeId phases,
                                   const channel::ChannelSample& sample,
                                   const linalg::ComplexMatrix& v);

/// The same quantity without a tape.
double sample_objective(std::span<const double> phases, const channel::ChannelSample& sample,
                        const linalg::ComplexMatrix& v);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace riswsr::training
