// SPDX-License-Identifier: Apache-2.0
//
// Dense complex matrices in double precision: products, partial-pivoted LU
// with left/right/adjoint solves, the QR-based left pseudo-inverse, and a
// power-iteration spectral norm estimate.

#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace riswsr::linalg {

using cplx = std::complex<double>;

/// Row-major dense complex matrix. std::complex<double> is layout-compatible
/// with interleaved (re, im) double pairs, which the autodiff module relies on.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);
  ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(std::span<const cplx> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool square() const noexcept { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  cplx* data() noexcept { return data_.data(); }
  const cplx* data() const noexcept { return data_.data(); }
  std::span<cplx> entries() noexcept { return data_; }
  std::span<const cplx> entries() const noexcept { return data_; }
  std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  ComplexMatrix transpose() const;
  ComplexMatrix conj_transpose() const;

  double frobenius_norm() const;
  double max_abs() const;
  bool all_finite() const;

  /// "3x4"
  std::string shape_string() const;

  ComplexMatrix& operator+=(const ComplexMatrix& other);
  ComplexMatrix& operator-=(const ComplexMatrix& other);
  ComplexMatrix& operator*=(cplx s);

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(cplx s, ComplexMatrix a);

/// Packed L\U factors of P*A = L*U with unit-diagonal L.
/// pivots[k] is the row exchanged with row k at elimination step k.
struct LUFactorization {
  ComplexMatrix lu;
  std::vector<std::size_t> pivots;
  int sign = 1;

  std::size_t order() const noexcept { return lu.rows(); }
  ComplexMatrix lower() const;
  ComplexMatrix upper() const;
  /// P*A = L*U reconstructed as A.
  ComplexMatrix reconstruct() const;
};

enum class Side {
  left,   // A X = B
  right,  // X A = B
};

/// Relative pivot threshold below which lu_factor reports singularity.
inline constexpr double kSingularPivotTolerance = 1e-14;

ComplexMatrix cmatmul(const ComplexMatrix& a, const ComplexMatrix& b);

/// a^H * b without forming a^H.
ComplexMatrix cmatmul_adjoint_left(const ComplexMatrix& a, const ComplexMatrix& b);

LUFactorization lu_factor(ComplexMatrix a);

ComplexMatrix lu_solve(const LUFactorization& f, const ComplexMatrix& b, Side side);

/// Solves against A^H using the factors of A.
ComplexMatrix lu_solve_adjoint(const LUFactorization& f, const ComplexMatrix& b, Side side);

/// Explicit inverse through LU; used by oracles and tests only.
ComplexMatrix inverse(const ComplexMatrix& a);

/// Left pseudo-inverse (H^H H)^{-1} H^H of a tall full-column-rank matrix,
/// computed from a Householder QR factorization.
ComplexMatrix pinv_left(const ComplexMatrix& h);

/// Power-iteration estimate of the largest singular value.
double spectral_norm(const ComplexMatrix& a, std::size_t iters = 100);

/// ||a - b||_F / ||b||_F (absolute norm of a - b when b is zero).
double relative_error(const ComplexMatrix& a, const ComplexMatrix& b);

}  // namespace riswsr::linalg
