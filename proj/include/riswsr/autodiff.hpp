// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense real tensors.
//
// Complex quantities travel as real tensors whose last axis has extent 2
// (interleaved re, im), the same memory layout as linalg::ComplexMatrix.
// Gradients of complex nodes use the pair (dL/dre, dL/dim), which read as a
// complex number is the usual conjugate cotangent: for Z = X Y the adjoints
// are X' = Z' Y^H and Y' = X^H Z'.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "riswsr/linalg.hpp"

namespace riswsr::ad {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& s);

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s);
  Tensor(Shape s, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor from_complex(const linalg::ComplexMatrix& m);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  double item() const;
  /// View of a [r, c, 2] tensor as a complex matrix (copy).
  linalg::ComplexMatrix to_complex() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(const Shape& s);

enum class OpKind : std::uint8_t {
  leaf,
  add,
  sub,
  mul,
  scale,
  matmul,
  relu,
  sum_axis,
  mean_axis,
  broadcast,
  concat,
  sin,
  cos,
  log,
  reciprocal,
  square,
  complex_matmul,
  complex_solve_right,
  magnitude_squared,
  // Structural helpers; values are moved, never combined.
  reshape,
  gather,
  complex_pack,
  complex_mul,
  kCount,
};

const char* op_name(OpKind k);

/// Operation attributes; each op reads only the fields it needs.
struct Attrs {
  std::size_t axis = 0;
  double scalar = 1.0;
  Shape shape;
  std::vector<std::size_t> indices;
};

using NodeId = std::size_t;

struct Node {
  NodeId id = 0;
  OpKind op = OpKind::leaf;
  std::vector<NodeId> inputs;
  Attrs attrs;
  Tensor value;
  bool requires_grad = false;
  bool trainable = false;
  // Factorization of the system matrix, kept for the solve adjoint.
  std::optional<linalg::LUFactorization> lu;

  const Shape& shape() const noexcept { return value.shape; }
};

/// Append-only tape. Values are computed eagerly when a node is recorded.
class Tape {
 public:
  NodeId parameter(Tensor value);
  NodeId constant(Tensor value);
  NodeId record(OpKind op, std::span<const NodeId> inputs, Attrs attrs = {});

  const Node& node(NodeId id) const;
  const Tensor& value(NodeId id) const { return node(id).value; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<NodeId>& parameter_ids() const noexcept { return parameter_ids_; }

  /// Gradient of a single-element output with respect to every parameter,
  /// in parameter_ids() order. Unreachable parameters get zero gradients.
  std::vector<Tensor> backward(NodeId output) const;

 private:
  std::vector<Node> nodes_;
  std::vector<NodeId> parameter_ids_;
};

// Convenience builders around Tape::record.
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
NodeId scale(Tape& t, NodeId a, double s);
NodeId matmul(Tape& t, NodeId a, NodeId b);
NodeId relu(Tape& t, NodeId a);
NodeId sum_axis(Tape& t, NodeId a, std::size_t axis);
NodeId mean_axis(Tape& t, NodeId a, std::size_t axis);
NodeId broadcast(Tape& t, NodeId a, Shape target);
NodeId concat(Tape& t, std::span<const NodeId> parts, std::size_t axis);
NodeId sin(Tape& t, NodeId a);
NodeId cos(Tape& t, NodeId a);
NodeId log(Tape& t, NodeId a);
NodeId reciprocal(Tape& t, NodeId a);
NodeId square(Tape& t, NodeId a);
NodeId complex_matmul(Tape& t, NodeId a, NodeId b);
/// X with X * A = B; A is [n, n, 2], B is [r, n, 2].
NodeId complex_solve_right(Tape& t, NodeId a, NodeId b);
NodeId magnitude_squared(Tape& t, NodeId a);
NodeId reshape(Tape& t, NodeId a, Shape target);
NodeId gather(Tape& t, NodeId a, std::size_t axis, std::vector<std::size_t> indices);
NodeId complex_pack(Tape& t, NodeId re, NodeId im);
NodeId complex_mul(Tape& t, NodeId a, NodeId b);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step_count = 0;
};

AdamState make_adam_state(std::span<const Tensor> params, AdamConfig cfg = {});

/// One bias-corrected ADAM update. With maximize set the update ascends.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               double lr, bool maximize);

// ---------------------------------------------------------------------------

/// Builds a scalar objective on a tape from the given parameter nodes.
using TapeBuilder = std::function<NodeId(Tape&, std::span<const NodeId>)>;

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t worst_coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference check of Tape::backward for every coordinate of every
/// parameter. Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-12).
GradcheckResult gradcheck(const TapeBuilder& fn, std::span<const Tensor> point, double step);

/// Evaluate fn at point; returns (value, gradients).
std::pair<double, std::vector<Tensor>> value_and_grad(const TapeBuilder& fn,
                                                      std::span<const Tensor> point);

}  // namespace riswsr::ad
