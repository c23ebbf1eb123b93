// SPDX-License-Identifier: Apache-2.0

#include "riswsr/risnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "riswsr/error.hpp"

namespace riswsr::risnet {

using ad::NodeId;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::normal:
      return "normal";
    case LayerKind::expansion:
      return "expansion";
    case LayerKind::final:
      return "final";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "normal") return LayerKind::normal;
  if (s == "expansion") return LayerKind::expansion;
  if (s == "final") return LayerKind::final;
  throw ConfigError("unknown layer kind '" + s + "'");
}

void validate_specs(std::span<const LayerSpec> specs, std::size_t input_dim) {
  if (specs.empty()) throw DimensionError("layer specs: empty chain");
  std::size_t p = input_dim;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    const std::string where = "layer " + std::to_string(i) + ": ";
    if (s.in_dim != p) {
      throw DimensionError(where + "in_dim " + std::to_string(s.in_dim) + " but previous layer gives " +
                           std::to_string(p));
    }
    if (s.q == 0) throw DimensionError(where + "q must be >= 1");
    const bool last = i + 1 == specs.size();
    if ((s.kind == LayerKind::final) != last) {
      throw DimensionError(where + "the final layer must be last and appear exactly once");
    }
    if (s.kind == LayerKind::final && s.q != 1) throw DimensionError(where + "final layer has q = 1");
    p = s.out_dim();
  }
}

std::vector<LayerSpec> full_csi_specs(std::size_t q, std::size_t hidden, std::size_t input_dim) {
  std::vector<LayerSpec> s;
  std::size_t p = input_dim;
  for (std::size_t i = 0; i < hidden; ++i) {
    s.push_back({LayerKind::normal, p, q});
    p = kClassCount * q;
  }
  s.push_back({LayerKind::final, p, 1});
  return s;
}

std::vector<LayerSpec> partial_csi_specs(std::size_t q, std::size_t input_dim) {
  const std::size_t w = kClassCount * q;
  return {{LayerKind::normal, input_dim, q},  {LayerKind::normal, w, q},
          {LayerKind::expansion, w, q},       {LayerKind::normal, w, q},
          {LayerKind::expansion, w, q},       {LayerKind::final, w, 1}};
}

std::size_t expansion_count(std::span<const LayerSpec> specs) {
  return static_cast<std::size_t>(std::count_if(
      specs.begin(), specs.end(), [](const LayerSpec& s) { return s.kind == LayerKind::expansion; }));
}

std::vector<LayerSpec> NetworkParams::specs() const {
  std::vector<LayerSpec> out;
  for (const LayerParams& l : layers) out.push_back(l.spec);
  return out;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const LayerParams& l : layers)
    for (const UnitParams& u : l.units) n += u.weight.size() + u.bias.size();
  return n;
}

std::vector<Tensor> NetworkParams::flatten() const {
  std::vector<Tensor> out;
  for (const LayerParams& l : layers)
    for (const UnitParams& u : l.units) {
      out.push_back(u.weight);
      out.push_back(u.bias);
    }
  return out;
}

void NetworkParams::assign(std::span<const Tensor> tensors) {
  std::size_t i = 0;
  for (LayerParams& l : layers)
    for (UnitParams& u : l.units) {
      if (i + 2 > tensors.size()) {
        throw DimensionError("NetworkParams::assign: too few tensors");
      }
      if (tensors[i].shape != u.weight.shape || tensors[i + 1].shape != u.bias.shape) {
        throw DimensionError("NetworkParams::assign: shape mismatch at tensor " + std::to_string(i));
      }
      u.weight = tensors[i];
      u.bias = tensors[i + 1];
      i += 2;
    }
  if (i != tensors.size()) throw DimensionError("NetworkParams::assign: too many tensors");
}

NetworkParams zero_params(std::span<const LayerSpec> specs) {
  validate_specs(specs, specs.front().in_dim);
  NetworkParams np;
  for (const LayerSpec& s : specs) {
    LayerParams lp;
    lp.spec = s;
    const std::size_t q = s.kind == LayerKind::final ? 1 : s.q;
    lp.units.resize(s.classes() * s.units(), UnitParams{Tensor({q, s.in_dim}), Tensor({q})});
    np.layers.push_back(std::move(lp));
  }
  return np;
}

NetworkParams init_params(std::span<const LayerSpec> specs, std::uint64_t seed) {
  NetworkParams np = zero_params(specs);
  np.seed = seed;
  std::mt19937_64 rng(seed);
  for (LayerParams& l : np.layers) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.spec.in_dim + l.units.front().weight.shape[0]));
    std::uniform_real_distribution<double> dist(-a, a);
    for (UnitParams& u : l.units)
      for (double& w : u.weight.data) w = dist(rng);
  }
  return np;
}

Grid input_grid(std::span<const LayerSpec> specs, Grid output) {
  std::size_t factor = 1;
  for (std::size_t e = 0; e < expansion_count(specs); ++e) factor *= 3;
  if (output.rows % factor != 0 || output.cols % factor != 0) {
    throw DimensionError("input_grid: " + std::to_string(output.rows) + "x" +
                         std::to_string(output.cols) + " is not divisible by " + std::to_string(factor));
  }
  return {output.rows / factor, output.cols / factor};
}

// ---------------------------------------------------------------------------
// Loop form.

namespace {

struct Dims {
  std::size_t p;
  std::size_t n;
  std::size_t u;
};

Dims feature_dims(const Tensor& f, std::size_t expected_p) {
  if (f.rank() != 3) throw DimensionError("features must be [P, N, U], got " + ad::shape_to_string(f.shape));
  const Dims d{f.shape[0], f.shape[1], f.shape[2]};
  if (d.p != expected_p) {
    throw DimensionError("features have P = " + std::to_string(d.p) + ", layer expects " +
                         std::to_string(expected_p));
  }
  if (d.u < 2) throw DimensionError("layers need at least two users");
  return d;
}

// ReLU(W f_un + b) for every (n, u): [Q, N, U].
std::vector<double> unit_activation(const Tensor& f, Dims d, const UnitParams& up) {
  const std::size_t q = up.weight.shape[0];
  std::vector<double> out(q * d.n * d.u);
  for (std::size_t qi = 0; qi < q; ++qi)
    for (std::size_t n = 0; n < d.n; ++n)
      for (std::size_t u = 0; u < d.u; ++u) {
        double acc = up.bias.data[qi];
        for (std::size_t pi = 0; pi < d.p; ++pi)
          acc += up.weight.data[qi * d.p + pi] * f.data[(pi * d.n + n) * d.u + u];
        out[(qi * d.n + n) * d.u + u] = acc > 0.0 ? acc : 0.0;
      }
  return out;
}

// Four-class output of one processing unit, [4Q, N, U].
Tensor four_class_loop(const Tensor& f, Dims d, const LayerParams& lp, std::size_t unit) {
  const std::size_t q = lp.spec.q;
  Tensor out({kClassCount * q, d.n, d.u});
  auto o = [&](std::size_t cls, std::size_t qi, std::size_t n, std::size_t u) -> double& {
    return out.data[((cls * q + qi) * d.n + n) * d.u + u];
  };
  const double inv_n = 1.0 / static_cast<double>(d.n);
  const double inv_u = 1.0 / static_cast<double>(d.u - 1);
  const auto cc = unit_activation(f, d, lp.at(FeatureClass::cc, unit));
  const auto ca = unit_activation(f, d, lp.at(FeatureClass::ca, unit));
  const auto oc = unit_activation(f, d, lp.at(FeatureClass::oc, unit));
  const auto oa = unit_activation(f, d, lp.at(FeatureClass::oa, unit));
  auto r = [&](const std::vector<double>& a, std::size_t qi, std::size_t n, std::size_t u) {
    return a[(qi * d.n + n) * d.u + u];
  };
  for (std::size_t qi = 0; qi < q; ++qi)
    for (std::size_t n = 0; n < d.n; ++n)
      for (std::size_t u = 0; u < d.u; ++u) {
        o(0, qi, n, u) = r(cc, qi, n, u);
        double s_ca = 0.0;
        for (std::size_t n2 = 0; n2 < d.n; ++n2) s_ca += r(ca, qi, n2, u);
        o(1, qi, n, u) = s_ca * inv_n;
        double s_oc = 0.0;
        double s_oa = 0.0;
        for (std::size_t u2 = 0; u2 < d.u; ++u2) {
          if (u2 == u) continue;
          s_oc += r(oc, qi, n, u2);
          for (std::size_t n2 = 0; n2 < d.n; ++n2) s_oa += r(oa, qi, n2, u2);
        }
        o(2, qi, n, u) = s_oc * inv_u;
        o(3, qi, n, u) = s_oa * inv_n * inv_u;
      }
  return out;
}

}  // namespace

std::size_t nu_index(std::size_t n, std::size_t j, std::size_t h_cols, std::size_t h_rows) {
  if (n == 0 || j == 0 || j > kExpansionUnits || h_cols == 0) {
    throw DomainError("nu_index: n and j are 1-based, j <= 9");
  }
  const std::size_t row = (n - 1) / h_cols;
  const std::size_t col = (n - 1) % h_cols;
  if (row == 0 || col == 0 || col + 1 >= h_cols || (h_rows != 0 && row + 1 >= h_rows)) {
    throw DomainError("nu_index: element " + std::to_string(n) + " has neighbours outside the grid");
  }
  if (j <= 3) return n - h_cols - 2 + j;
  if (j <= 6) return n - 5 + j;
  return n + h_cols - 8 + j;
}

std::size_t expansion_target(std::size_t k, std::size_t j, Grid coarse) {
  if (k >= coarse.size() || j >= kExpansionUnits) throw DomainError("expansion_target: out of range");
  const std::size_t r = k / coarse.cols;
  const std::size_t c = k % coarse.cols;
  // Offsets (j / 3 - 1, j % 3 - 1) around the centre cell (3r + 1, 3c + 1).
  const std::size_t fr = 3 * r + j / 3;
  const std::size_t fc = 3 * c + j % 3;
  return fr * (3 * coarse.cols) + fc;
}

namespace {

Tensor normal_loop(const Tensor& f, const LayerParams& lp) {
  const Dims d = feature_dims(f, lp.spec.in_dim);
  return four_class_loop(f, d, lp, 0);
}

Tensor expansion_loop(const Tensor& f, Grid coarse, const LayerParams& lp) {
  const Dims d = feature_dims(f, lp.spec.in_dim);
  if (d.n != coarse.size()) throw DimensionError("expansion: feature elements do not match the grid");
  const std::size_t width = lp.spec.out_dim();
  const std::size_t fine = kExpansionUnits * d.n;
  Tensor out({width, fine, d.u});
  for (std::size_t j = 0; j < kExpansionUnits; ++j) {
    const Tensor part = four_class_loop(f, d, lp, j);
    for (std::size_t k = 0; k < d.n; ++k) {
      const std::size_t e = expansion_target(k, j, coarse);
      for (std::size_t c = 0; c < width; ++c)
        for (std::size_t u = 0; u < d.u; ++u)
          out.data[(c * fine + e) * d.u + u] = part.data[(c * d.n + k) * d.u + u];
    }
  }
  return out;
}

std::vector<double> final_loop(const Tensor& f, const LayerParams& lp) {
  const Dims d = feature_dims(f, lp.spec.in_dim);
  const UnitParams& up = lp.at(FeatureClass::cc, 0);
  std::vector<double> phases(d.n, 0.0);
  for (std::size_t n = 0; n < d.n; ++n)
    for (std::size_t u = 0; u < d.u; ++u) {
      double acc = up.bias.data[0];
      for (std::size_t pi = 0; pi < d.p; ++pi) acc += up.weight.data[pi] * f.data[(pi * d.n + n) * d.u + u];
      phases[n] += acc;
    }
  return phases;
}

// ---------------------------------------------------------------------------
// Tensor form on a tape.

struct UnitNodes {
  NodeId weight;
  NodeId bias;
};

NodeId affine_relu(Tape& t, NodeId x, UnitNodes un, bool activate) {
  const Shape xs = t.value(x).shape;
  const std::size_t q = t.value(un.weight).shape[0];
  NodeId z = ad::matmul(t, un.weight, x);
  const NodeId b = ad::broadcast(t, ad::reshape(t, un.bias, {q, 1, 1}), {q, xs[1], xs[2]});
  z = ad::add(t, z, b);
  return activate ? ad::relu(t, z) : z;
}

// [cc; ca; oc; oa] for one unit.
NodeId four_class_tensor(Tape& t, NodeId x, std::span<const UnitNodes> classes) {
  const Shape xs = t.value(x).shape;
  const std::size_t n = xs[1];
  const std::size_t users = xs[2];
  const double inv_u = 1.0 / static_cast<double>(users - 1);

  const NodeId cc = affine_relu(t, x, classes[0], true);
  const std::size_t q = t.value(cc).shape[0];
  const Shape full{q, n, users};

  // ReLU(W F + b) 1^{NxN} / N
  const NodeId ca = ad::broadcast(t, ad::mean_axis(t, affine_relu(t, x, classes[1], true), 1), full);

  // E^{UxU} ReLU(W F + b) / (U - 1), E = 1 1^T - I
  const NodeId r_oc = affine_relu(t, x, classes[2], true);
  const NodeId oc = ad::scale(
      t, ad::sub(t, ad::broadcast(t, ad::sum_axis(t, r_oc, 2), full), r_oc), inv_u);

  const NodeId m_oa = ad::mean_axis(t, affine_relu(t, x, classes[3], true), 1);  // [Q, 1, U]
  const NodeId others = ad::scale(
      t, ad::sub(t, ad::broadcast(t, ad::sum_axis(t, m_oa, 2), {q, 1, users}), m_oa), inv_u);
  const NodeId oa = ad::broadcast(t, others, full);

  const std::array<NodeId, kClassCount> parts{cc, ca, oc, oa};
  return ad::concat(t, parts, 0);
}

std::vector<UnitNodes> unit_nodes(const LayerParams& lp, std::span<const NodeId> layer_nodes,
                                  std::size_t unit) {
  std::vector<UnitNodes> out;
  for (std::size_t c = 0; c < lp.spec.classes(); ++c) {
    const std::size_t idx = 2 * (c * lp.spec.units() + unit);
    out.push_back({layer_nodes[idx], layer_nodes[idx + 1]});
  }
  return out;
}

NodeId record_layer(Tape& t, NodeId x, const LayerParams& lp, std::span<const NodeId> layer_nodes,
                    Grid grid) {
  const Shape xs = t.value(x).shape;
  if (xs.size() != 3 || xs[0] != lp.spec.in_dim) {
    throw DimensionError("layer expects P = " + std::to_string(lp.spec.in_dim) + ", got " +
                         ad::shape_to_string(xs));
  }
  if (xs[2] < 2) throw DimensionError("layers need at least two users");
  switch (lp.spec.kind) {
    case LayerKind::normal:
      return four_class_tensor(t, x, unit_nodes(lp, layer_nodes, 0));
    case LayerKind::expansion: {
      const std::size_t n = xs[1];
      if (n != grid.size()) throw DimensionError("expansion: feature elements do not match the grid");
      std::vector<NodeId> parts;
      for (std::size_t j = 0; j < kExpansionUnits; ++j) {
        parts.push_back(four_class_tensor(t, x, unit_nodes(lp, layer_nodes, j)));
      }
      const NodeId stacked = ad::concat(t, parts, 1);  // position j * n + k
      std::vector<std::size_t> source(kExpansionUnits * n);
      for (std::size_t j = 0; j < kExpansionUnits; ++j)
        for (std::size_t k = 0; k < n; ++k) source[expansion_target(k, j, grid)] = j * n + k;
      return ad::gather(t, stacked, 1, std::move(source));
    }
    case LayerKind::final: {
      const NodeId z = affine_relu(t, x, unit_nodes(lp, layer_nodes, 0)[0], false);
      return ad::reshape(t, ad::sum_axis(t, z, 2), {xs[1]});
    }
  }
  throw DomainError("record_layer: unknown layer kind");
}

}  // namespace

Tensor layer_forward(const Tensor& f, const LayerParams& p, Grid grid, Mode mode) {
  if (p.spec.kind == LayerKind::final) {
    throw DomainError("layer_forward: the final layer is applied by forward()");
  }
  if (mode == Mode::loop) {
    return p.spec.kind == LayerKind::expansion ? expansion_loop(f, grid, p) : normal_loop(f, p);
  }
  feature_dims(f, p.spec.in_dim);
  Tape t;
  const NodeId x = t.constant(f);
  std::vector<NodeId> nodes;
  for (const UnitParams& u : p.units) {
    nodes.push_back(t.constant(u.weight));
    nodes.push_back(t.constant(u.bias));
  }
  return t.value(record_layer(t, x, p, nodes, grid));
}

Tensor expansion_forward(const Tensor& f, Grid coarse, const LayerParams& p, Mode mode) {
  if (p.spec.kind != LayerKind::expansion) throw DomainError("expansion_forward: not an expansion layer");
  return layer_forward(f, p, coarse, mode);
}

linalg::ComplexMatrix PhaseConfiguration::phi() const { return phases_to_phi(phases); }

linalg::ComplexMatrix phases_to_phi(std::span<const double> phases) {
  linalg::ComplexMatrix m(phases.size(), phases.size());
  for (std::size_t n = 0; n < phases.size(); ++n) {
    if (!std::isfinite(phases[n])) throw NonFiniteError("phases_to_phi: phase " + std::to_string(n) + " is not finite");
    m(n, n) = {std::cos(phases[n]), std::sin(phases[n])};
  }
  return m;
}

std::vector<NodeId> record_params(Tape& tape, const NetworkParams& params, bool trainable) {
  std::vector<NodeId> ids;
  for (const LayerParams& l : params.layers)
    for (const UnitParams& u : l.units) {
      ids.push_back(trainable ? tape.parameter(u.weight) : tape.constant(u.weight));
      ids.push_back(trainable ? tape.parameter(u.bias) : tape.constant(u.bias));
    }
  return ids;
}

NodeId record_forward(Tape& tape, NodeId features, const NetworkParams& params,
                      std::span<const NodeId> param_nodes, Grid grid) {
  NodeId x = features;
  std::size_t offset = 0;
  for (const LayerParams& l : params.layers) {
    const std::size_t count = 2 * l.units.size();
    if (offset + count > param_nodes.size()) throw DimensionError("record_forward: missing parameter nodes");
    x = record_layer(tape, x, l, param_nodes.subspan(offset, count), grid);
    if (l.spec.kind == LayerKind::expansion) grid = {3 * grid.rows, 3 * grid.cols};
    offset += count;
  }
  return x;
}

PhaseConfiguration forward(const Tensor& features, const NetworkParams& params, Grid grid, Mode mode) {
  if (params.layers.empty()) throw DimensionError("forward: empty network");
  if (features.rank() != 3 || features.shape[1] != grid.size()) {
    throw DimensionError("forward: features " + ad::shape_to_string(features.shape) +
                         " do not match a " + std::to_string(grid.rows) + "x" +
                         std::to_string(grid.cols) + " input grid");
  }
  PhaseConfiguration out;
  if (mode == Mode::loop) {
    Tensor x = features;
    for (const LayerParams& l : params.layers) {
      if (l.spec.kind == LayerKind::final) {
        out.phases = final_loop(x, l);
      } else {
        x = layer_forward(x, l, grid, Mode::loop);
        if (l.spec.kind == LayerKind::expansion) grid = {3 * grid.rows, 3 * grid.cols};
      }
    }
    return out;
  }
  Tape t;
  const NodeId x = t.constant(features);
  const std::vector<NodeId> nodes = record_params(t, params, false);
  out.phases = t.value(record_forward(t, x, params, nodes, grid)).data;
  return out;
}

}  // namespace riswsr::risnet
