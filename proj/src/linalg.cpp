// SPDX-License-Identifier: Apache-2.0

#include "riswsr/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "riswsr/error.hpp"
#include "riswsr/kernels.hpp"

namespace riswsr::linalg {

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("ComplexMatrix: " + std::to_string(data_.size()) +
                         " entries do not fill a " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " matrix");
  }
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ComplexMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> diag) {
  ComplexMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

ComplexMatrix ComplexMatrix::transpose() const {
  ComplexMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

ComplexMatrix ComplexMatrix::conj_transpose() const {
  ComplexMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = std::conj((*this)(r, c));
  return t;
}

double ComplexMatrix::frobenius_norm() const {
  double s = 0.0;
  for (const cplx& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

double ComplexMatrix::max_abs() const {
  double m = 0.0;
  for (const cplx& z : data_) m = std::max(m, std::abs(z));
  return m;
}

bool ComplexMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](const cplx& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

std::string ComplexMatrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("matrix add: " + shape_string() + " vs " + other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) {
    throw DimensionError("matrix subtract: " + shape_string() + " vs " + other.shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
  for (cplx& z : data_) z *= s;
  return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

// ---------------------------------------------------------------------------

ComplexMatrix cmatmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("cmatmul: " + a.shape_string() + " * " + b.shape_string());
  }
  const auto& kt = kernels::active();
  ComplexMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx* ci = c.data() + i * c.cols();
    for (std::size_t p = 0; p < a.cols(); ++p) {
      kt.caxpy(b.cols(), a(i, p), b.data() + p * b.cols(), ci);
    }
  }
  return c;
}

ComplexMatrix cmatmul_adjoint_left(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("cmatmul_adjoint_left: " + a.shape_string() + "^H * " +
                         b.shape_string());
  }
  const auto& kt = kernels::active();
  ComplexMatrix c(a.cols(), b.cols());
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const cplx* bp = b.data() + p * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      kt.caxpy(b.cols(), std::conj(a(p, i)), bp, c.data() + i * c.cols());
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

ComplexMatrix LUFactorization::lower() const {
  const std::size_t n = order();
  ComplexMatrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) l(i, j) = lu(i, j);
    l(i, i) = 1.0;
  }
  return l;
}

ComplexMatrix LUFactorization::upper() const {
  const std::size_t n = order();
  ComplexMatrix u(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) u(i, j) = lu(i, j);
  return u;
}

ComplexMatrix LUFactorization::reconstruct() const {
  ComplexMatrix a = cmatmul(lower(), upper());
  // Undo the row exchanges in reverse order: A = P^T (L U).
  for (std::size_t k = order(); k-- > 0;) {
    if (pivots[k] != k) {
      std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(pivots[k]).begin());
    }
  }
  return a;
}

LUFactorization lu_factor(ComplexMatrix a) {
  if (!a.square()) throw DimensionError("lu_factor: non-square input " + a.shape_string());
  const std::size_t n = a.rows();
  const auto& kt = kernels::active();
  const double threshold = kSingularPivotTolerance * a.max_abs();

  LUFactorization f;
  f.pivots.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(a(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (!(best > threshold) || best == 0.0) {
      throw SingularError("lu_factor: pivot " + std::to_string(k) + " of " + std::to_string(n) +
                          " below threshold");
    }
    f.pivots[k] = p;
    if (p != k) {
      std::swap_ranges(a.row(k).begin(), a.row(k).end(), a.row(p).begin());
      f.sign = -f.sign;
    }
    const cplx inv_pivot = 1.0 / a(k, k);
    const cplx* row_k = a.data() + k * n + k + 1;
    for (std::size_t i = k + 1; i < n; ++i) {
      cplx& lik = a(i, k);
      if (lik == cplx{}) continue;
      lik *= inv_pivot;
      kt.caxpy(n - k - 1, -lik, row_k, a.data() + i * n + k + 1);
    }
  }
  f.lu = std::move(a);
  return f;
}

namespace {

void check_solve_shape(const LUFactorization& f, const ComplexMatrix& b, Side side,
                       const char* what) {
  const std::size_t n = f.order();
  const bool ok = side == Side::left ? b.rows() == n : b.cols() == n;
  if (!ok) {
    throw DimensionError(std::string(what) + ": factor order " + std::to_string(n) +
                         " vs right-hand side " + b.shape_string() +
                         (side == Side::left ? " (left)" : " (right)"));
  }
}

// A X = B in place on the rows of x.
void solve_left_inplace(const LUFactorization& f, ComplexMatrix& x) {
  const auto& kt = kernels::active();
  const std::size_t n = f.order();
  const std::size_t r = x.cols();
  const ComplexMatrix& lu = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    if (f.pivots[k] != k) {
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(f.pivots[k]).begin());
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    const cplx* xk = x.data() + k * r;
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx l = lu(i, k);
      if (l != cplx{}) kt.caxpy(r, -l, xk, x.data() + i * r);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    const cplx inv = 1.0 / lu(k, k);
    for (cplx& z : x.row(k)) z *= inv;
    const cplx* xk = x.data() + k * r;
    for (std::size_t i = 0; i < k; ++i) {
      const cplx u = lu(i, k);
      if (u != cplx{}) kt.caxpy(r, -u, xk, x.data() + i * r);
    }
  }
}

// A^H X = B in place. A^H = U^H L^H P.
void solve_left_adjoint_inplace(const LUFactorization& f, ComplexMatrix& x) {
  const auto& kt = kernels::active();
  const std::size_t n = f.order();
  const std::size_t r = x.cols();
  const ComplexMatrix& lu = f.lu;
  for (std::size_t k = 0; k < n; ++k) {
    const cplx inv = 1.0 / std::conj(lu(k, k));
    for (cplx& z : x.row(k)) z *= inv;
    const cplx* xk = x.data() + k * r;
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx u = std::conj(lu(k, i));
      if (u != cplx{}) kt.caxpy(r, -u, xk, x.data() + i * r);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    const cplx* xk = x.data() + k * r;
    for (std::size_t i = 0; i < k; ++i) {
      const cplx l = std::conj(lu(k, i));
      if (l != cplx{}) kt.caxpy(r, -l, xk, x.data() + i * r);
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    if (f.pivots[k] != k) {
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(f.pivots[k]).begin());
    }
  }
}

// X A = B in place on each row of x. With A = P^T L U: solve W U = B, then
// Z L = W, then X = Z P (column exchanges in reverse order).
void solve_right_inplace(const LUFactorization& f, ComplexMatrix& x) {
  const auto& kt = kernels::active();
  const std::size_t n = f.order();
  const ComplexMatrix& lu = f.lu;
  for (std::size_t row = 0; row < x.rows(); ++row) {
    cplx* t = x.data() + row * n;
    for (std::size_t i = 0; i < n; ++i) {
      t[i] /= lu(i, i);
      if (t[i] != cplx{}) kt.caxpy(n - i - 1, -t[i], lu.data() + i * n + i + 1, t + i + 1);
    }
    for (std::size_t i = n; i-- > 1;) {
      if (t[i] != cplx{}) kt.caxpy(i, -t[i], lu.data() + i * n, t);
    }
    for (std::size_t k = n; k-- > 0;) {
      if (f.pivots[k] != k) std::swap(t[k], t[f.pivots[k]]);
    }
  }
}

}  // namespace

ComplexMatrix lu_solve(const LUFactorization& f, const ComplexMatrix& b, Side side) {
  check_solve_shape(f, b, side, "lu_solve");
  ComplexMatrix x = b;
  if (side == Side::left) {
    solve_left_inplace(f, x);
  } else {
    solve_right_inplace(f, x);
  }
  return x;
}

ComplexMatrix lu_solve_adjoint(const LUFactorization& f, const ComplexMatrix& b, Side side) {
  check_solve_shape(f, b, side, "lu_solve_adjoint");
  if (side == Side::left) {
    ComplexMatrix x = b;
    solve_left_adjoint_inplace(f, x);
    return x;
  }
  // X A^H = B  <=>  A X^H = B^H.
  ComplexMatrix xh = b.conj_transpose();
  solve_left_inplace(f, xh);
  return xh.conj_transpose();
}

ComplexMatrix inverse(const ComplexMatrix& a) {
  const LUFactorization f = lu_factor(a);
  return lu_solve(f, ComplexMatrix::identity(a.rows()), Side::left);
}

// ---------------------------------------------------------------------------

ComplexMatrix pinv_left(const ComplexMatrix& h) {
  const std::size_t m = h.rows();
  const std::size_t n = h.cols();
  if (m < n) {
    throw DimensionError("pinv_left: expected rows >= cols, got " + h.shape_string());
  }
  // Householder QR: R overwrites the upper triangle of `a`; reflectors kept in `vs`.
  ComplexMatrix a = h;
  std::vector<std::vector<cplx>> vs(n);
  std::vector<double> rdiag(n);
  for (std::size_t k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += std::norm(a(i, k));
    const double xnorm = std::sqrt(norm2);
    std::vector<cplx>& v = vs[k];
    v.assign(m - k, cplx{});
    if (xnorm == 0.0) {
      rdiag[k] = 0.0;
      continue;
    }
    const cplx x0 = a(k, k);
    const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx{1.0};
    const cplx alpha = -phase * xnorm;
    for (std::size_t i = k; i < m; ++i) v[i - k] = a(i, k);
    v[0] -= alpha;
    double vnorm2 = 0.0;
    for (const cplx& z : v) vnorm2 += std::norm(z);
    const double vnorm = std::sqrt(vnorm2);
    for (cplx& z : v) z /= vnorm;
    // a[k:, k:] -= 2 v (v^H a[k:, k:])
    for (std::size_t j = k; j < n; ++j) {
      cplx dot{};
      for (std::size_t i = k; i < m; ++i) dot += std::conj(v[i - k]) * a(i, j);
      for (std::size_t i = k; i < m; ++i) a(i, j) -= 2.0 * v[i - k] * dot;
    }
    rdiag[k] = std::abs(a(k, k));
  }

  const double rmax = *std::max_element(rdiag.begin(), rdiag.end());
  const double tol = 1e-12 * rmax;
  std::size_t rank = 0;
  for (double d : rdiag) rank += (d > tol) ? 1 : 0;
  if (rank < n || rmax == 0.0) {
    throw RankError("pinv_left: " + h.shape_string() + " is rank-deficient (estimated rank " +
                        std::to_string(rank) + ")",
                    rank);
  }

  // Q^H restricted to its first n rows: apply the reflectors to I_m, keep rows 0..n-1.
  ComplexMatrix qh = ComplexMatrix::identity(m);
  for (std::size_t k = 0; k < n; ++k) {
    const std::vector<cplx>& v = vs[k];
    for (std::size_t j = 0; j < m; ++j) {
      cplx dot{};
      for (std::size_t i = k; i < m; ++i) dot += std::conj(v[i - k]) * qh(i, j);
      if (dot == cplx{}) continue;
      for (std::size_t i = k; i < m; ++i) qh(i, j) -= 2.0 * v[i - k] * dot;
    }
  }
  // Back substitution R X = (Q^H)[0:n, :].
  ComplexMatrix x(n, m);
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      cplx s = qh(i, j);
      for (std::size_t p = i + 1; p < n; ++p) s -= a(i, p) * x(p, j);
      x(i, j) = s / a(i, i);
    }
  }
  return x;
}

double spectral_norm(const ComplexMatrix& a, std::size_t iters) {
  if (!a.square()) throw DimensionError("spectral_norm: non-square input " + a.shape_string());
  if (iters == 0) throw DomainError("spectral_norm: iters must be >= 1");
  const std::size_t n = a.cols();
  if (n == 0 || a.max_abs() == 0.0) return 0.0;
  // Deterministic start vector with no special alignment to any basis.
  ComplexMatrix v(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    v(i, 0) = cplx{1.0 + 0.37 * std::cos(1.3 * static_cast<double>(i)),
                   0.21 * std::sin(0.7 * static_cast<double>(i) + 0.4)};
  }
  double sigma = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    const double vn = v.frobenius_norm();
    if (vn == 0.0) return 0.0;
    v *= 1.0 / vn;
    const ComplexMatrix w = cmatmul(a, v);
    sigma = w.frobenius_norm();
    v = cmatmul_adjoint_left(a, w);
  }
  return sigma;
}

double relative_error(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("relative_error: " + a.shape_string() + " vs " + b.shape_string());
  }
  const double denom = b.frobenius_norm();
  return (a - b).frobenius_norm() / (denom > 0.0 ? denom : 1.0);
}

}  // namespace riswsr::linalg
