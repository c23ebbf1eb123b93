// SPDX-License-Identifier: Apache-2.0
//
// Run configuration shared by the CLI commands. JSON with a strict schema:
// unknown keys are rejected and every field is validated before use.
//
// {
//   "preset":    "desk-deterministic" | "paper-table"       (optional)
//   "seed":      master seed
//   "regime":    "deterministic" | "deterministic_plus_scatter" | "iid"
//   "geometry":  { bs_antennas, ris_rows, ris_cols, users, carrier_frequency,
//                  bs_spacing, ris_spacing }
//   "generator": { paths_h, paths_g, paths_d, direct_blockage_db, scatter_relative_db,
//                  user_spread, los_factor_db, gain_scale, coupling_strength,
//                  power_budget, noise_power, target_snr_db, deployment_seed }
//   "dataset":   { train, test, path }
//   "network":   { csi, q, hidden_layers, anchor_rows, anchor_cols }
//   "train":     { epochs, batch_size, learning_rate, precoder_refresh_every }
//   "wmmse":     { max_iters, rel_tol, bisection_tol, mu_growth }
//   "evaluate":  { checkpoint }
//   "baselines": { seed }
// }
//
// A preset supplies defaults; keys given next to it override them.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "riswsr/channel.hpp"
#include "riswsr/risnet.hpp"
#include "riswsr/training.hpp"

namespace riswsr::config {

struct NetworkConfig {
  std::size_t q = 16;
  std::size_t hidden_layers = 3;  // full CSI only
};

struct RunConfig {
  std::uint64_t seed = 2024;
  channel::GeometryConfig geometry;
  channel::Regime regime = channel::Regime::deterministic;
  channel::GeneratorConfig generator;
  training::DatasetSizes sizes{256, 64};
  std::string dataset_path;  // empty: generate in memory
  NetworkConfig network;
  training::TrainConfig train;
  std::string checkpoint_path;
  std::uint64_t baseline_seed = 7;

  std::vector<risnet::LayerSpec> layer_specs() const;
  // Training settings with the network seed derived from the master seed.
  training::TrainConfig train_config() const;
  void validate() const;
};

std::vector<std::string> preset_names();
RunConfig preset(const std::string& name);

/// Throws ConfigError naming the offending field, or with line/column for
/// malformed JSON.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Fully defaulted configuration as JSON; parse_config(echo(c)) == c.
std::string echo(const RunConfig& cfg);

}  // namespace riswsr::config
