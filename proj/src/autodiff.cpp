// SPDX-License-Identifier: Apache-2.0

#include "riswsr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <utility>

#include "riswsr/error.hpp"
#include "riswsr/kernels.hpp"

namespace riswsr::ad {

std::string shape_to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

std::size_t element_count(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(element_count(shape), 0.0) {}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != element_count(shape)) {
    throw DimensionError("Tensor: " + std::to_string(data.size()) + " values for shape " +
                         shape_to_string(shape));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::from_complex(const linalg::ComplexMatrix& m) {
  Tensor t({m.rows(), m.cols(), 2});
  std::memcpy(t.data.data(), m.data(), t.data.size() * sizeof(double));
  return t;
}

double Tensor::item() const {
  if (data.size() != 1) throw DimensionError("Tensor::item on shape " + shape_to_string(shape));
  return data[0];
}

linalg::ComplexMatrix Tensor::to_complex() const {
  if (shape.size() != 3 || shape[2] != 2) {
    throw DimensionError("Tensor::to_complex expects [r, c, 2], got " + shape_to_string(shape));
  }
  linalg::ComplexMatrix m(shape[0], shape[1]);
  std::memcpy(reinterpret_cast<double*>(m.data()), data.data(), data.size() * sizeof(double));
  return m;
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::matmul: return "matmul";
    case OpKind::relu: return "relu";
    case OpKind::sum_axis: return "sum_axis";
    case OpKind::mean_axis: return "mean_axis";
    case OpKind::broadcast: return "broadcast";
    case OpKind::concat: return "concat";
    case OpKind::sin: return "sin";
    case OpKind::cos: return "cos";
    case OpKind::log: return "log";
    case OpKind::reciprocal: return "reciprocal";
    case OpKind::square: return "square";
    case OpKind::complex_matmul: return "complex_matmul";
    case OpKind::complex_solve_right: return "complex_solve_right";
    case OpKind::magnitude_squared: return "magnitude_squared";
    case OpKind::reshape: return "reshape";
    case OpKind::gather: return "gather";
    case OpKind::complex_pack: return "complex_pack";
    case OpKind::complex_mul: return "complex_mul";
    case OpKind::kCount: break;
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_error(OpKind op, const std::string& detail) {
  throw DimensionError(std::string(op_name(op)) + ": " + detail);
}

struct AxisSplit {
  std::size_t outer;
  std::size_t len;
  std::size_t inner;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

bool is_complex_matrix(const Shape& s) { return s.size() == 3 && s[2] == 2; }

// Maps each output element of a broadcast to its source offset.
template <typename F>
void for_each_broadcast(const Shape& src, const Shape& dst, F&& f) {
  const std::size_t rank = dst.size();
  std::vector<std::size_t> src_stride(rank, 0);
  std::size_t stride = 1;
  for (std::size_t d = rank; d-- > 0;) {
    src_stride[d] = src[d] == 1 ? 0 : stride;
    stride *= src[d];
  }
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t total = element_count(dst);
  std::size_t src_off = 0;
  for (std::size_t out = 0; out < total; ++out) {
    f(out, src_off);
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src_off += src_stride[d];
      if (idx[d] < dst[d]) break;
      src_off -= src_stride[d] * idx[d];
      idx[d] = 0;
    }
  }
}

void axpy_into(Tensor& dst, const Tensor& src, double a = 1.0) {
  if (dst.data.empty()) {
    dst = Tensor(src.shape);
  }
  kernels::active().daxpy(src.size(), a, src.data.data(), dst.data.data());
}

Tensor forward_value(OpKind op, const std::vector<const Tensor*>& in, const Attrs& at,
                     std::optional<linalg::LUFactorization>& lu_out) {
  auto need = [&](std::size_t n) {
    if (in.size() != n) {
      shape_error(op, "expected " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
    }
  };
  auto same_shape = [&]() {
    if (in[0]->shape != in[1]->shape) {
      shape_error(op, shape_to_string(in[0]->shape) + " vs " + shape_to_string(in[1]->shape));
    }
  };
  switch (op) {
    case OpKind::add:
    case OpKind::sub:
    case OpKind::mul: {
      need(2);
      same_shape();
      Tensor out(in[0]->shape);
      const double* a = in[0]->data.data();
      const double* b = in[1]->data.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = op == OpKind::add ? a[i] + b[i] : op == OpKind::sub ? a[i] - b[i] : a[i] * b[i];
      }
      return out;
    }
    case OpKind::scale: {
      need(1);
      Tensor out = *in[0];
      for (double& v : out.data) v *= at.scalar;
      return out;
    }
    case OpKind::matmul: {
      need(2);
      const Shape& a = in[0]->shape;
      const Shape& b = in[1]->shape;
      if (a.size() != 2 || b.empty() || a[1] != b[0]) {
        shape_error(op, shape_to_string(a) + " x " + shape_to_string(b));
      }
      Shape os = b;
      os[0] = a[0];
      Tensor out(os);
      const std::size_t cols = in[1]->size() / b[0];
      kernels::gemm_nn(a[0], cols, a[1], in[0]->data.data(), in[1]->data.data(), out.data.data(),
                       false);
      return out;
    }
    case OpKind::relu: {
      need(1);
      Tensor out(in[0]->shape);
      kernels::active().relu(out.size(), in[0]->data.data(), out.data.data());
      return out;
    }
    case OpKind::sum_axis:
    case OpKind::mean_axis: {
      need(1);
      const Shape& s = in[0]->shape;
      if (at.axis >= s.size()) shape_error(op, "axis " + std::to_string(at.axis) + " of " + shape_to_string(s));
      const AxisSplit sp = split_at(s, at.axis);
      Shape os = s;
      os[at.axis] = 1;
      Tensor out(os);
      const double* x = in[0]->data.data();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        double* dst = out.data.data() + o * sp.inner;
        for (std::size_t l = 0; l < sp.len; ++l) {
          const double* src = x + (o * sp.len + l) * sp.inner;
          for (std::size_t i = 0; i < sp.inner; ++i) dst[i] += src[i];
        }
      }
      if (op == OpKind::mean_axis && sp.len > 0) {
        const double inv = 1.0 / static_cast<double>(sp.len);
        for (double& v : out.data) v *= inv;
      }
      return out;
    }
    case OpKind::broadcast: {
      need(1);
      const Shape& s = in[0]->shape;
      if (s.size() != at.shape.size()) shape_error(op, shape_to_string(s) + " -> " + shape_to_string(at.shape));
      for (std::size_t d = 0; d < s.size(); ++d) {
        if (s[d] != at.shape[d] && s[d] != 1) {
          shape_error(op, shape_to_string(s) + " -> " + shape_to_string(at.shape));
        }
      }
      Tensor out(at.shape);
      const double* x = in[0]->data.data();
      for_each_broadcast(s, at.shape, [&](std::size_t o, std::size_t si) { out.data[o] = x[si]; });
      return out;
    }
    case OpKind::concat: {
      if (in.empty()) shape_error(op, "no inputs");
      const Shape& s0 = in[0]->shape;
      if (at.axis >= s0.size()) shape_error(op, "axis out of range");
      Shape os = s0;
      os[at.axis] = 0;
      for (const Tensor* t : in) {
        if (t->shape.size() != s0.size()) shape_error(op, "rank mismatch");
        for (std::size_t d = 0; d < s0.size(); ++d) {
          if (d != at.axis && t->shape[d] != s0[d]) {
            shape_error(op, shape_to_string(t->shape) + " vs " + shape_to_string(s0));
          }
        }
        os[at.axis] += t->shape[at.axis];
      }
      Tensor out(os);
      const AxisSplit osp = split_at(os, at.axis);
      std::size_t offset = 0;
      for (const Tensor* t : in) {
        const AxisSplit sp = split_at(t->shape, at.axis);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          std::memcpy(out.data.data() + (o * osp.len + offset) * osp.inner,
                      t->data.data() + o * sp.len * sp.inner, sp.len * sp.inner * sizeof(double));
        }
        offset += sp.len;
      }
      return out;
    }
    case OpKind::sin:
    case OpKind::cos:
    case OpKind::log:
    case OpKind::reciprocal:
    case OpKind::square: {
      need(1);
      Tensor out(in[0]->shape);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = in[0]->data[i];
        switch (op) {
          case OpKind::sin: out.data[i] = std::sin(x); break;
          case OpKind::cos: out.data[i] = std::cos(x); break;
          case OpKind::log: out.data[i] = std::log(x); break;
          case OpKind::reciprocal: out.data[i] = 1.0 / x; break;
          default: out.data[i] = x * x; break;
        }
      }
      return out;
    }
    case OpKind::complex_matmul: {
      need(2);
      if (!is_complex_matrix(in[0]->shape) || !is_complex_matrix(in[1]->shape) ||
          in[0]->shape[1] != in[1]->shape[0]) {
        shape_error(op, shape_to_string(in[0]->shape) + " x " + shape_to_string(in[1]->shape));
      }
      return Tensor::from_complex(linalg::cmatmul(in[0]->to_complex(), in[1]->to_complex()));
    }
    case OpKind::complex_solve_right: {
      need(2);
      const Shape& a = in[0]->shape;
      const Shape& b = in[1]->shape;
      if (!is_complex_matrix(a) || !is_complex_matrix(b) || a[0] != a[1] || b[1] != a[0]) {
        shape_error(op, "A " + shape_to_string(a) + ", B " + shape_to_string(b));
      }
      lu_out = linalg::lu_factor(in[0]->to_complex());
      return Tensor::from_complex(linalg::lu_solve(*lu_out, in[1]->to_complex(), linalg::Side::right));
    }
    case OpKind::magnitude_squared: {
      need(1);
      const Shape& s = in[0]->shape;
      if (s.empty() || s.back() != 2) shape_error(op, "expects trailing axis 2, got " + shape_to_string(s));
      Shape os(s.begin(), s.end() - 1);
      if (os.empty()) os = {1};
      Tensor out(os);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double re = in[0]->data[2 * i];
        const double im = in[0]->data[2 * i + 1];
        out.data[i] = re * re + im * im;
      }
      return out;
    }
    case OpKind::reshape: {
      need(1);
      if (element_count(at.shape) != in[0]->size()) {
        shape_error(op, shape_to_string(in[0]->shape) + " -> " + shape_to_string(at.shape));
      }
      return Tensor(at.shape, in[0]->data);
    }
    case OpKind::gather: {
      need(1);
      const Shape& s = in[0]->shape;
      if (at.axis >= s.size()) shape_error(op, "axis out of range");
      const AxisSplit sp = split_at(s, at.axis);
      for (std::size_t ix : at.indices) {
        if (ix >= sp.len) shape_error(op, "index " + std::to_string(ix) + " >= " + std::to_string(sp.len));
      }
      Shape os = s;
      os[at.axis] = at.indices.size();
      Tensor out(os);
      const std::size_t olen = at.indices.size();
      for (std::size_t o = 0; o < sp.outer; ++o) {
        for (std::size_t l = 0; l < olen; ++l) {
          std::memcpy(out.data.data() + (o * olen + l) * sp.inner,
                      in[0]->data.data() + (o * sp.len + at.indices[l]) * sp.inner,
                      sp.inner * sizeof(double));
        }
      }
      return out;
    }
    case OpKind::complex_pack: {
      need(2);
      same_shape();
      Shape os = in[0]->shape;
      os.push_back(2);
      Tensor out(os);
      for (std::size_t i = 0; i < in[0]->size(); ++i) {
        out.data[2 * i] = in[0]->data[i];
        out.data[2 * i + 1] = in[1]->data[i];
      }
      return out;
    }
    case OpKind::complex_mul: {
      need(2);
      same_shape();
      if (in[0]->shape.empty() || in[0]->shape.back() != 2) shape_error(op, "expects trailing axis 2");
      Tensor out(in[0]->shape);
      const double* a = in[0]->data.data();
      const double* b = in[1]->data.data();
      for (std::size_t i = 0; i < out.size() / 2; ++i) {
        const double ar = a[2 * i], ai = a[2 * i + 1], br = b[2 * i], bi = b[2 * i + 1];
        out.data[2 * i] = ar * br - ai * bi;
        out.data[2 * i + 1] = ar * bi + ai * br;
      }
      return out;
    }
    case OpKind::leaf:
    case OpKind::kCount:
      break;
  }
  throw DomainError("record: unknown op kind " + std::to_string(static_cast<int>(op)));
}

}  // namespace

// ---------------------------------------------------------------------------

NodeId Tape::parameter(Tensor value) {
  Node n;
  n.id = nodes_.size();
  n.value = std::move(value);
  n.requires_grad = true;
  n.trainable = true;
  nodes_.push_back(std::move(n));
  parameter_ids_.push_back(nodes_.back().id);
  return nodes_.back().id;
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.id = nodes_.size();
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

NodeId Tape::record(OpKind op, std::span<const NodeId> inputs, Attrs attrs) {
  if (op == OpKind::leaf || static_cast<int>(op) >= static_cast<int>(OpKind::kCount)) {
    throw DomainError("record: unknown op kind " + std::to_string(static_cast<int>(op)));
  }
  std::vector<const Tensor*> in;
  in.reserve(inputs.size());
  bool grad = false;
  for (NodeId id : inputs) {
    if (id >= nodes_.size()) throw DomainError("record: input id " + std::to_string(id) + " not on tape");
    in.push_back(&nodes_[id].value);
    grad = grad || nodes_[id].requires_grad;
  }
  Node n;
  n.value = forward_value(op, in, attrs, n.lu);
  n.id = nodes_.size();
  n.op = op;
  n.inputs.assign(inputs.begin(), inputs.end());
  n.attrs = std::move(attrs);
  n.requires_grad = grad;
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

const Node& Tape::node(NodeId id) const {
  if (id >= nodes_.size()) throw DomainError("tape: node " + std::to_string(id) + " not on tape");
  return nodes_[id];
}

std::vector<Tensor> Tape::backward(NodeId output) const {
  const Node& out = node(output);
  if (out.value.size() != 1) {
    throw DimensionError("backward: output must be scalar, got " + shape_to_string(out.shape()));
  }
  std::vector<Tensor> adj(nodes_.size());
  adj[output] = Tensor(out.shape(), {1.0});

  auto wants = [&](NodeId id) { return nodes_[id].requires_grad; };

  for (std::size_t i = output + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.op == OpKind::leaf || !n.requires_grad || adj[i].data.empty()) continue;
    const Tensor& g = adj[i];
    const auto& ins = n.inputs;
    auto val = [&](std::size_t k) -> const Tensor& { return nodes_[ins[k]].value; };

    switch (n.op) {
      case OpKind::add:
        if (wants(ins[0])) axpy_into(adj[ins[0]], g);
        if (wants(ins[1])) axpy_into(adj[ins[1]], g);
        break;
      case OpKind::sub:
        if (wants(ins[0])) axpy_into(adj[ins[0]], g);
        if (wants(ins[1])) axpy_into(adj[ins[1]], g, -1.0);
        break;
      case OpKind::mul:
        for (std::size_t k = 0; k < 2; ++k) {
          if (!wants(ins[k])) continue;
          Tensor d(g.shape);
          const Tensor& other = val(1 - k);
          for (std::size_t e = 0; e < d.size(); ++e) d.data[e] = g.data[e] * other.data[e];
          axpy_into(adj[ins[k]], d);
        }
        break;
      case OpKind::scale:
        axpy_into(adj[ins[0]], g, n.attrs.scalar);
        break;
      case OpKind::matmul: {
        const Tensor& a = val(0);
        const Tensor& b = val(1);
        const std::size_t q = a.shape[0], p = a.shape[1], cols = b.size() / p;
        if (wants(ins[0])) {
          Tensor& da = adj[ins[0]];
          if (da.data.empty()) da = Tensor(a.shape);
          kernels::gemm_nt(q, cols, p, g.data.data(), b.data.data(), da.data.data(), true);
        }
        if (wants(ins[1])) {
          Tensor& db = adj[ins[1]];
          if (db.data.empty()) db = Tensor(b.shape);
          kernels::gemm_tn(q, cols, p, a.data.data(), g.data.data(), db.data.data(), true);
        }
        break;
      }
      case OpKind::relu: {
        Tensor d(g.shape);
        kernels::active().relu_backward(d.size(), val(0).data.data(), g.data.data(), d.data.data());
        axpy_into(adj[ins[0]], d);
        break;
      }
      case OpKind::sum_axis:
      case OpKind::mean_axis: {
        const Shape& s = val(0).shape;
        const AxisSplit sp = split_at(s, n.attrs.axis);
        const double f = n.op == OpKind::mean_axis && sp.len > 0 ? 1.0 / static_cast<double>(sp.len) : 1.0;
        Tensor& da = adj[ins[0]];
        if (da.data.empty()) da = Tensor(s);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          const double* src = g.data.data() + o * sp.inner;
          for (std::size_t l = 0; l < sp.len; ++l) {
            double* dst = da.data.data() + (o * sp.len + l) * sp.inner;
            for (std::size_t e = 0; e < sp.inner; ++e) dst[e] += f * src[e];
          }
        }
        break;
      }
      case OpKind::broadcast: {
        const Shape& s = val(0).shape;
        Tensor& da = adj[ins[0]];
        if (da.data.empty()) da = Tensor(s);
        for_each_broadcast(s, n.attrs.shape,
                           [&](std::size_t o, std::size_t si) { da.data[si] += g.data[o]; });
        break;
      }
      case OpKind::concat: {
        const AxisSplit osp = split_at(n.shape(), n.attrs.axis);
        std::size_t offset = 0;
        for (NodeId id : ins) {
          const Shape& s = nodes_[id].value.shape;
          const AxisSplit sp = split_at(s, n.attrs.axis);
          if (wants(id)) {
            Tensor& da = adj[id];
            if (da.data.empty()) da = Tensor(s);
            for (std::size_t o = 0; o < sp.outer; ++o) {
              const double* src = g.data.data() + (o * osp.len + offset) * osp.inner;
              double* dst = da.data.data() + o * sp.len * sp.inner;
              for (std::size_t e = 0; e < sp.len * sp.inner; ++e) dst[e] += src[e];
            }
          }
          offset += sp.len;
        }
        break;
      }
      case OpKind::sin:
      case OpKind::cos:
      case OpKind::log:
      case OpKind::reciprocal:
      case OpKind::square: {
        const Tensor& x = val(0);
        Tensor d(g.shape);
        for (std::size_t e = 0; e < d.size(); ++e) {
          const double xv = x.data[e];
          double deriv = 0.0;
          switch (n.op) {
            case OpKind::sin: deriv = std::cos(xv); break;
            case OpKind::cos: deriv = -std::sin(xv); break;
            case OpKind::log: deriv = 1.0 / xv; break;
            case OpKind::reciprocal: deriv = -1.0 / (xv * xv); break;
            default: deriv = 2.0 * xv; break;
          }
          d.data[e] = g.data[e] * deriv;
        }
        axpy_into(adj[ins[0]], d);
        break;
      }
      case OpKind::complex_matmul: {
        const linalg::ComplexMatrix gz = g.to_complex();
        if (wants(ins[0])) {
          // A' = Z' B^H
          const linalg::ComplexMatrix b = val(1).to_complex();
          axpy_into(adj[ins[0]], Tensor::from_complex(linalg::cmatmul(gz, b.conj_transpose())));
        }
        if (wants(ins[1])) {
          // B' = A^H Z'
          const linalg::ComplexMatrix a = val(0).to_complex();
          axpy_into(adj[ins[1]], Tensor::from_complex(linalg::cmatmul_adjoint_left(a, gz)));
        }
        break;
      }
      case OpKind::complex_solve_right: {
        // X A = B:  B' = X' A^{-H},  A' = -X^H B'.
        const linalg::ComplexMatrix gb =
            linalg::lu_solve_adjoint(*n.lu, g.to_complex(), linalg::Side::right);
        if (wants(ins[1])) axpy_into(adj[ins[1]], Tensor::from_complex(gb));
        if (wants(ins[0])) {
          const linalg::ComplexMatrix x = n.value.to_complex();
          axpy_into(adj[ins[0]], Tensor::from_complex(linalg::cmatmul_adjoint_left(x, gb)), -1.0);
        }
        break;
      }
      case OpKind::magnitude_squared: {
        const Tensor& x = val(0);
        Tensor d(x.shape);
        for (std::size_t e = 0; e < g.size(); ++e) {
          d.data[2 * e] = 2.0 * x.data[2 * e] * g.data[e];
          d.data[2 * e + 1] = 2.0 * x.data[2 * e + 1] * g.data[e];
        }
        axpy_into(adj[ins[0]], d);
        break;
      }
      case OpKind::reshape: {
        Tensor d(val(0).shape, g.data);
        axpy_into(adj[ins[0]], d);
        break;
      }
      case OpKind::gather: {
        const Shape& s = val(0).shape;
        const AxisSplit sp = split_at(s, n.attrs.axis);
        const std::size_t olen = n.attrs.indices.size();
        Tensor& da = adj[ins[0]];
        if (da.data.empty()) da = Tensor(s);
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t l = 0; l < olen; ++l) {
            const double* src = g.data.data() + (o * olen + l) * sp.inner;
            double* dst = da.data.data() + (o * sp.len + n.attrs.indices[l]) * sp.inner;
            for (std::size_t e = 0; e < sp.inner; ++e) dst[e] += src[e];
          }
        }
        break;
      }
      case OpKind::complex_pack: {
        const std::size_t m = val(0).size();
        for (std::size_t k = 0; k < 2; ++k) {
          if (!wants(ins[k])) continue;
          Tensor d(val(k).shape);
          for (std::size_t e = 0; e < m; ++e) d.data[e] = g.data[2 * e + k];
          axpy_into(adj[ins[k]], d);
        }
        break;
      }
      case OpKind::complex_mul: {
        // A' = Z' conj(B), B' = Z' conj(A).
        for (std::size_t k = 0; k < 2; ++k) {
          if (!wants(ins[k])) continue;
          const Tensor& other = val(1 - k);
          Tensor d(g.shape);
          for (std::size_t e = 0; e < d.size() / 2; ++e) {
            const double gr = g.data[2 * e], gi = g.data[2 * e + 1];
            const double br = other.data[2 * e], bi = other.data[2 * e + 1];
            d.data[2 * e] = gr * br + gi * bi;
            d.data[2 * e + 1] = gi * br - gr * bi;
          }
          axpy_into(adj[ins[k]], d);
        }
        break;
      }
      case OpKind::leaf:
      case OpKind::kCount:
        break;
    }
  }

  std::vector<Tensor> grads;
  grads.reserve(parameter_ids_.size());
  for (NodeId id : parameter_ids_) {
    grads.push_back(adj[id].data.empty() ? Tensor(nodes_[id].value.shape) : std::move(adj[id]));
  }
  return grads;
}

// ---------------------------------------------------------------------------

namespace {
NodeId rec1(Tape& t, OpKind k, NodeId a, Attrs at = {}) {
  const NodeId ids[] = {a};
  return t.record(k, ids, std::move(at));
}
NodeId rec2(Tape& t, OpKind k, NodeId a, NodeId b) {
  const NodeId ids[] = {a, b};
  return t.record(k, ids);
}
}  // namespace

NodeId add(Tape& t, NodeId a, NodeId b) { return rec2(t, OpKind::add, a, b); }
NodeId sub(Tape& t, NodeId a, NodeId b) { return rec2(t, OpKind::sub, a, b); }
NodeId mul(Tape& t, NodeId a, NodeId b) { return rec2(t, OpKind::mul, a, b); }
NodeId scale(Tape& t, NodeId a, double s) {
  Attrs at;
  at.scalar = s;
  return rec1(t, OpKind::scale, a, std::move(at));
}
NodeId matmul(Tape& t, NodeId a, NodeId b) { return rec2(t, OpKind::matmul, a, b); }
NodeId relu(Tape& t, NodeId a) { return rec1(t, OpKind::relu, a); }
NodeId sum_axis(Tape& t, NodeId a, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return rec1(t, OpKind::sum_axis, a, std::move(at));
}
NodeId mean_axis(Tape& t, NodeId a, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return rec1(t, OpKind::mean_axis, a, std::move(at));
}
NodeId broadcast(Tape& t, NodeId a, Shape target) {
  Attrs at;
  at.shape = std::move(target);
  return rec1(t, OpKind::broadcast, a, std::move(at));
}
NodeId concat(Tape& t, std::span<const NodeId> parts, std::size_t axis) {
  Attrs at;
  at.axis = axis;
  return t.record(OpKind::concat, parts, std::move(at));
}
NodeId sin(Tape& t, NodeId a) { return rec1(t, OpKind::sin, a); }
NodeId cos(Tape& t, NodeId a) { return rec1(t, OpKind::cos, a); }
NodeId log(Tape& t, NodeId a) { return rec1(t, OpKind::log, a); }
NodeId reciprocal(Tape& t, NodeId a) { return rec1(t, OpKind::reciprocal, a); }
NodeId square(Tape& t, NodeId a) { return rec1(t, OpKind::square, a); }
NodeId complex_matmul(Tape& t, NodeId a, NodeId b) { return rec2(t, OpKind::complex_matmul, a, b); }
NodeId complex_solve_right(Tape& t, NodeId a, NodeId b) {
  return rec2(t, OpKind::complex_solve_right, a, b);
}
NodeId magnitude_squared(Tape& t, NodeId a) { return rec1(t, OpKind::magnitude_squared, a); }
NodeId reshape(Tape& t, NodeId a, Shape target) {
  Attrs at;
  at.shape = std::move(target);
  return rec1(t, OpKind::reshape, a, std::move(at));
}
NodeId gather(Tape& t, NodeId a, std::size_t axis, std::vector<std::size_t> indices) {
  Attrs at;
  at.axis = axis;
  at.indices = std::move(indices);
  return rec1(t, OpKind::gather, a, std::move(at));
}
NodeId complex_pack(Tape& t, NodeId re, NodeId im) { return rec2(t, OpKind::complex_pack, re, im); }
NodeId complex_mul(Tape& t, NodeId a, NodeId b) { return rec2(t, OpKind::complex_mul, a, b); }

// ---------------------------------------------------------------------------

AdamState make_adam_state(std::span<const Tensor> params, AdamConfig cfg) {
  AdamState s;
  s.config = cfg;
  for (const Tensor& p : params) {
    s.first_moment.emplace_back(p.shape);
    s.second_moment.emplace_back(p.shape);
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state,
               double lr, bool maximize) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " +
                         std::to_string(state.first_moment.size()) + " moments");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("adam_step: learning rate must be >= 0");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].shape != grads[k].shape || params[k].shape != state.first_moment[k].shape) {
      throw DimensionError("adam_step: parameter " + std::to_string(k) + " shape " +
                           shape_to_string(params[k].shape) + " vs grad " +
                           shape_to_string(grads[k].shape));
    }
    for (double g : grads[k].data) {
      if (!std::isfinite(g)) {
        throw NonFiniteError("adam_step: non-finite gradient in parameter " + std::to_string(k));
      }
    }
  }
  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const double sign = maximize ? -1.0 : 1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    double* p = params[k].data.data();
    double* m = state.first_moment[k].data.data();
    double* v = state.second_moment[k].data.data();
    const double* g = grads[k].data.data();
    for (std::size_t e = 0; e < params[k].size(); ++e) {
      const double ge = sign * g[e];
      m[e] = c.beta1 * m[e] + (1.0 - c.beta1) * ge;
      v[e] = c.beta2 * v[e] + (1.0 - c.beta2) * ge * ge;
      const double mhat = m[e] / bc1;
      const double vhat = v[e] / bc2;
      p[e] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------

std::pair<double, std::vector<Tensor>> value_and_grad(const TapeBuilder& fn,
                                                      std::span<const Tensor> point) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(point.size());
  for (const Tensor& p : point) ids.push_back(tape.parameter(p));
  const NodeId out = fn(tape, ids);
  return {tape.value(out).item(), tape.backward(out)};
}

namespace {
double evaluate(const TapeBuilder& fn, std::span<const Tensor> point) {
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(point.size());
  for (const Tensor& p : point) ids.push_back(tape.constant(p));
  return tape.value(fn(tape, ids)).item();
}
}  // namespace

GradcheckResult gradcheck(const TapeBuilder& fn, std::span<const Tensor> point, double step) {
  if (!(step > 0.0) || step > 1e-3) throw DomainError("gradcheck: step must be in (0, 1e-3]");
  const auto [f0, grads] = value_and_grad(fn, point);
  if (!std::isfinite(f0)) throw NonFiniteError("gradcheck: non-finite value at the base point");
  std::vector<Tensor> work(point.begin(), point.end());
  GradcheckResult res;
  for (std::size_t p = 0; p < work.size(); ++p) {
    for (std::size_t c = 0; c < work[p].size(); ++c) {
      const double orig = work[p].data[c];
      work[p].data[c] = orig + step;
      const double fp = evaluate(fn, work);
      work[p].data[c] = orig - step;
      const double fm = evaluate(fn, work);
      work[p].data[c] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NonFiniteError("gradcheck: non-finite evaluation at parameter " + std::to_string(p) +
                             ", coordinate " + std::to_string(c));
      }
      const double numeric = (fp - fm) / (2.0 * step);
      const double analytic = grads[p].data[c];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > res.max_relative_error || (p == 0 && c == 0)) {
        res = {rel, p, c, analytic, numeric};
      }
    }
  }
  return res;
}

}  // namespace riswsr::ad
