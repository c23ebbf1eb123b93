// SPDX-License-Identifier: Apache-2.0
//
// RISnet: permutation-equivariant information-processing layers over a
// (features x elements x users) tensor, 3x3 expansion layers for partial CSI,
// and the user-summing final layer that yields RIS phases.
//
// Feature classes are stacked on the feature axis in the order cc, ca, oc, oa.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "riswsr/autodiff.hpp"
#include "riswsr/linalg.hpp"

namespace riswsr::risnet {

enum class LayerKind { normal, expansion, final };

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

enum class FeatureClass : std::size_t { cc = 0, ca = 1, oc = 2, oa = 3 };
inline constexpr std::size_t kClassCount = 4;
inline constexpr std::array<const char*, kClassCount> kClassNames{"cc", "ca", "oc", "oa"};
inline constexpr std::size_t kExpansionUnits = 9;

struct LayerSpec {
  LayerKind kind = LayerKind::normal;
  std::size_t in_dim = 0;  // P_i
  std::size_t q = 0;       // Q_i, per class; 1 for the final layer

  std::size_t classes() const noexcept { return kind == LayerKind::final ? 1 : kClassCount; }
  std::size_t units() const noexcept { return kind == LayerKind::expansion ? kExpansionUnits : 1; }
  std::size_t out_dim() const noexcept { return kind == LayerKind::final ? 1 : kClassCount * q; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Throws DimensionError unless the chain starts at `input_dim`, composes
/// (P_{i+1} = 4 Q_i) and ends in exactly one final layer.
void validate_specs(std::span<const LayerSpec> specs,
                    std::size_t input_dim = 5);

/// `hidden` normal layers of width q, then the final layer.
std::vector<LayerSpec> full_csi_specs(std::size_t q = 16, std::size_t hidden = 3,
                                      std::size_t input_dim = 5);
/// normal, normal, expansion, normal, expansion, final; all of width q.
std::vector<LayerSpec> partial_csi_specs(std::size_t q = 16, std::size_t input_dim = 5);

std::size_t expansion_count(std::span<const LayerSpec> specs);

struct UnitParams {
  ad::Tensor weight;  // [Q, P]
  ad::Tensor bias;    // [Q]
};

struct LayerParams {
  LayerSpec spec;
  std::vector<UnitParams> units;  // index class * spec.units() + unit

  UnitParams& at(FeatureClass c, std::size_t unit) {
    return units[static_cast<std::size_t>(c) * spec.units() + unit];
  }
  const UnitParams& at(FeatureClass c, std::size_t unit) const {
    return units[static_cast<std::size_t>(c) * spec.units() + unit];
  }
};

struct NetworkParams {
  std::vector<LayerParams> layers;
  std::uint64_t seed = 0;

  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
  /// Weight then bias of every (layer, class, unit), lexicographic.
  std::vector<ad::Tensor> flatten() const;
  void assign(std::span<const ad::Tensor> tensors);
};

/// Glorot-uniform weights, zero biases.
NetworkParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed);
/// Same layout, all zeros.
NetworkParams zero_params(std::span<const LayerSpec> specs);

struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

/// Grid of the network input for a given output grid.
Grid input_grid(std::span<const LayerSpec> specs, Grid output);

enum class Mode { loop, tensor };

/// One normal or expansion layer. `grid` is the element grid of `f`; only
/// expansion layers use it. f is [P, elements, users].
ad::Tensor layer_forward(const ad::Tensor& f, const LayerParams& p, Grid grid, Mode mode);

/// Expansion layer: [P, R*C, U] on an R x C grid -> [4Q, 9*R*C, U] on 3R x 3C.
ad::Tensor expansion_forward(const ad::Tensor& f, Grid coarse, const LayerParams& p, Mode mode);

/// 1-based element index reached by unit j (1..9) from element n (1-based)
/// on a grid with h_cols columns. Throws when the neighbour leaves the grid.
std::size_t nu_index(std::size_t n, std::size_t j, std::size_t h_cols, std::size_t h_rows = 0);

/// 0-based fine-grid element written by unit j (0..8) for coarse element k.
std::size_t expansion_target(std::size_t k, std::size_t j, Grid coarse);

struct PhaseConfiguration {
  std::vector<double> phases;
  linalg::ComplexMatrix phi() const;
};

/// diag(exp(j phi)).
linalg::ComplexMatrix phases_to_phi(std::span<const double> phases);

/// Full network: features [5, grid elements, U] -> phases over the output grid.
PhaseConfiguration forward(const ad::Tensor& features, const NetworkParams& params, Grid grid,
                           Mode mode = Mode::tensor);

/// Records every weight and bias as a tape leaf, in flatten() order.
std::vector<ad::NodeId> record_params(ad::Tape& tape, const NetworkParams& params, bool trainable);

/// Records the forward pass on a tape; returns a node of shape [N_out].
ad::NodeId record_forward(ad::Tape& tape, ad::NodeId features, const NetworkParams& params,
                          std::span<const ad::NodeId> param_nodes, Grid grid);

}  // namespace riswsr::risnet
