// SPDX-License-Identifier: Apache-2.0
//
// Problem instances: geometric/iid channel generation, the RIS coupling
// matrix S_II, the cascaded BS->user channel with mutual coupling, the
// block S-parameter oracle, and network input features.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riswsr/autodiff.hpp"
#include "riswsr/linalg.hpp"

namespace riswsr::channel {

using linalg::ComplexMatrix;
using linalg::cplx;

inline constexpr double kSpeedOfLight = 299792458.0;

struct GeometryConfig {
  std::size_t bs_antennas = 4;
  std::size_t ris_rows = 18;
  std::size_t ris_cols = 18;
  std::size_t users = 2;
  double carrier_frequency = 3.5e9;  // Hz
  double bs_spacing = 0.5;           // wavelengths
  double ris_spacing = 0.25;         // wavelengths

  std::size_t elements() const noexcept { return ris_rows * ris_cols; }
  void validate() const;
  friend bool operator==(const GeometryConfig&, const GeometryConfig&) = default;
};

enum class Regime { deterministic, deterministic_plus_scatter, iid };

std::string to_string(Regime r);
Regime regime_from_string(const std::string& s);

/// Knobs of the synthetic generator.
struct GeneratorConfig {
  std::size_t paths_h = 4;
  std::size_t paths_g = 3;  // per user
  std::size_t paths_d = 3;  // per user
  double direct_blockage_db = -20.0;
  double scatter_relative_db = -10.0;
  // Users share a cluster: LOS direction cosines lie within +-user_spread of a
  // per-deployment centre. The LOS path carries los_factor_db more power than
  // each of the other paths.
  double user_spread = 0.05;
  double los_factor_db = 10.0;
  double gain_scale = 1e-3;       // rms amplitude of an H/G entry
  double coupling_strength = 0.1; // kappa of generate_s_ii
  double power_budget = 1.0;      // E_Tr
  double noise_power = 0.0;       // 0: calibrate to target_snr_db
  double target_snr_db = 10.0;
  // The BS-RIS channel is drawn once per deployment in the geometric regimes.
  // Train and test splits pass the same deployment seed.
  std::optional<std::uint64_t> deployment_seed;
  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct ChannelSample {
  ComplexMatrix h;     // N x M, BS -> RIS
  ComplexMatrix g;     // U x N, RIS -> users
  ComplexMatrix d;     // U x M, BS -> users
  ComplexMatrix s_ii;  // N x N, RIS coupling
  std::vector<double> weights;
  double noise_power = 1.0;
  double power_budget = 1.0;
  Regime regime = Regime::deterministic;
  std::uint64_t seed = 0;

  std::size_t users() const noexcept { return g.rows(); }
  std::size_t elements() const noexcept { return h.rows(); }
  std::size_t antennas() const noexcept { return h.cols(); }
  /// Throws DimensionError/DomainError when an invariant is broken.
  void validate() const;
};

struct CouplingMatrix {
  ComplexMatrix s_ii;
  double spectral_norm_before = 0.0;
  double rescale = 1.0;  // 1 when the norm guard did not trigger
};

/// Bound enforced on ||S_II||_2 after generation.
inline constexpr double kCouplingNormBound = 0.9;

/// Splits a master seed into independent per-item seeds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

CouplingMatrix generate_s_ii(const GeometryConfig& geometry, double coupling_strength,
                             std::uint64_t master_seed);

std::vector<ChannelSample> generate_channels(const GeometryConfig& geometry, Regime regime,
                                             std::size_t count, std::uint64_t master_seed,
                                             const GeneratorConfig& cfg = {});

/// sigma^2 giving the target mean per-user SNR under random RIS phases and
/// full-power MRT, averaged over the samples.
double calibrate_noise_power(std::span<const ChannelSample> samples, double target_snr_db,
                             std::uint64_t seed);

enum class CascadeMode { closed_form, with_second_order, no_coupling };

/// C (U x M) for the RIS phases.
ComplexMatrix cascaded_channel(const ChannelSample& sample, std::span<const double> phases,
                               CascadeMode mode);

/// C from the full (M+N+U) block S-parameter system: T = S (I - Lambda S)^{-1},
/// C = T_RT (I + T_TT)^{-1}. Reciprocity closes S_TI = H^T, S_TR = D^T, S_IR = G^T.
ComplexMatrix oracle_channel_general(const ChannelSample& sample, std::span<const double> phases);

/// (lambda / (4 pi d))^2.
double friis_gain(double frequency, double distance);

/// Log-amplitude normalization frozen from a training split (dB units).
struct FeatureStats {
  double g_mean_db = 0.0;
  double g_std_db = 1.0;
  double j_mean_db = 0.0;
  double j_std_db = 1.0;
  friend bool operator==(const FeatureStats&, const FeatureStats&) = default;
};

/// Amplitude floor relative to the largest entry of the same matrix.
inline constexpr double kLogFloorDb = -30.0;
inline constexpr std::size_t kInputFeatures = 5;

FeatureStats compute_feature_stats(std::span<const ChannelSample> samples);

/// Input tensor [5, elements, users]: (w_u, log|g_un|, arg g_un, log|j_un|, arg j_un)
/// with J = D H^+. When `anchors` is given only those element columns are kept.
ad::Tensor compute_features(const ChannelSample& sample, const FeatureStats& stats,
                            std::optional<std::span<const std::size_t>> anchors = std::nullopt);

/// Element indices (row-major) of anchor_rows x anchor_cols anchors placed at
/// the centres of the 3^expansions blocks of the RIS grid.
std::vector<std::size_t> anchor_indices(const GeometryConfig& geometry, std::size_t anchor_rows,
                                        std::size_t anchor_cols, std::size_t expansions);

}  // namespace riswsr::channel
