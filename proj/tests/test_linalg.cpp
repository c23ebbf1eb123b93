// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "riswsr/error.hpp"
#include "riswsr/linalg.hpp"
#include "riswsr/validation.hpp"

using namespace riswsr;
using linalg::ComplexMatrix;
using linalg::cplx;
using validation::random_matrix;

TEST(Cmatmul, MatchesTripleLoop) {
  std::mt19937_64 rng(1);
  const ComplexMatrix a = random_matrix(rng, 3, 3);
  const ComplexMatrix b = random_matrix(rng, 3, 3);
  const ComplexMatrix c = linalg::cmatmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      cplx ref{};
      for (std::size_t k = 0; k < 3; ++k) ref += a(i, k) * b(k, j);
      EXPECT_LT(std::abs(c(i, j) - ref), 1e-14);
    }
}

TEST(Cmatmul, AdjointLeft) {
  std::mt19937_64 rng(2);
  const ComplexMatrix a = random_matrix(rng, 5, 3);
  const ComplexMatrix b = random_matrix(rng, 5, 4);
  EXPECT_LT(linalg::relative_error(linalg::cmatmul_adjoint_left(a, b), linalg::cmatmul(a.conj_transpose(), b)),
            1e-14);
}

TEST(Cmatmul, RejectsMismatchedShapes) {
  EXPECT_THROW(linalg::cmatmul(ComplexMatrix(2, 3), ComplexMatrix(2, 3)), DimensionError);
}

TEST(Lu, ReconstructsDiagonallyDominant) {
  std::mt19937_64 rng(3);
  ComplexMatrix a = random_matrix(rng, 5, 5);
  for (std::size_t i = 0; i < 5; ++i) a(i, i) += 5.0;
  EXPECT_LT(linalg::relative_error(linalg::lu_factor(a).reconstruct(), a), 1e-12);
}

TEST(Lu, SingularThrows) {
  ComplexMatrix a(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 1.0;
  EXPECT_THROW(linalg::lu_factor(a), SingularError);
  EXPECT_THROW(linalg::lu_factor(ComplexMatrix(2, 3)), DimensionError);
}

TEST(Lu, RightSolveMatchesExplicitInverse) {
  std::mt19937_64 rng(4);
  ComplexMatrix s = random_matrix(rng, 4, 4, 0.3);
  std::vector<cplx> ph;
  for (int i = 0; i < 4; ++i) ph.push_back(std::polar(1.0, 0.5 + i));
  const ComplexMatrix a = ComplexMatrix::identity(4) - linalg::cmatmul(ComplexMatrix::diagonal(ph), s);
  const ComplexMatrix g = random_matrix(rng, 2, 4);
  const ComplexMatrix x = linalg::lu_solve(linalg::lu_factor(a), g, linalg::Side::right);
  EXPECT_LT(linalg::relative_error(x, linalg::cmatmul(g, linalg::inverse(a))), 1e-10);
}

TEST(Lu, AdjointSolve) {
  std::mt19937_64 rng(5);
  ComplexMatrix a = random_matrix(rng, 4, 4);
  for (std::size_t i = 0; i < 4; ++i) a(i, i) += 3.0;
  const auto f = linalg::lu_factor(a);
  const ComplexMatrix b = random_matrix(rng, 4, 2);
  const ComplexMatrix x = linalg::lu_solve_adjoint(f, b, linalg::Side::left);
  EXPECT_LT(linalg::relative_error(linalg::cmatmul(a.conj_transpose(), x), b), 1e-12);
  const ComplexMatrix br = random_matrix(rng, 2, 4);
  const ComplexMatrix xr = linalg::lu_solve_adjoint(f, br, linalg::Side::right);
  EXPECT_LT(linalg::relative_error(linalg::cmatmul(xr, a.conj_transpose()), br), 1e-12);
}

TEST(Pinv, LeftInverse) {
  std::mt19937_64 rng(6);
  const ComplexMatrix h = random_matrix(rng, 8, 3);
  EXPECT_LT(linalg::relative_error(linalg::cmatmul(linalg::pinv_left(h), h), ComplexMatrix::identity(3)), 1e-10);
}

TEST(Pinv, RankDeficientThrows) {
  ComplexMatrix h(4, 2);
  for (std::size_t r = 0; r < 4; ++r) h(r, 0) = h(r, 1) = cplx(1.0 + r, 0.5);
  EXPECT_THROW(linalg::pinv_left(h), RankError);
  EXPECT_THROW(linalg::pinv_left(ComplexMatrix(2, 3)), DimensionError);
}

TEST(SpectralNorm, MatchesGramEigenOracle) {
  // For a diagonal matrix the singular values are the moduli of the entries.
  const std::vector<cplx> d{{0.3, 0.4}, {-2.0, 0.0}, {0.0, 1.5}, {1.0, 1.0}, {0.1, 0.0}, {0.0, -0.2}};
  EXPECT_NEAR(linalg::spectral_norm(ComplexMatrix::diagonal(d)), 2.0, 0.02);
  std::mt19937_64 rng(7);
  const ComplexMatrix a = random_matrix(rng, 6, 6);
  // Oracle: largest eigenvalue of A^H A from many power steps on the Gram matrix.
  const ComplexMatrix gram = linalg::cmatmul(a.conj_transpose(), a);
  ComplexMatrix x(6, 1);
  for (std::size_t i = 0; i < 6; ++i) x(i, 0) = 1.0;
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    x = linalg::cmatmul(gram, x);
    lambda = x.frobenius_norm();
    x *= 1.0 / lambda;
  }
  EXPECT_NEAR(linalg::spectral_norm(a), std::sqrt(lambda), 0.01 * std::sqrt(lambda));
}

TEST(Matrix, AssociativityAndTranspose) {
  std::mt19937_64 rng(8);
  const ComplexMatrix a = random_matrix(rng, 3, 4);
  const ComplexMatrix b = random_matrix(rng, 4, 2);
  const ComplexMatrix c = random_matrix(rng, 2, 5);
  EXPECT_LT(linalg::relative_error(linalg::cmatmul(linalg::cmatmul(a, b), c),
                                   linalg::cmatmul(a, linalg::cmatmul(b, c))),
            1e-13);
  EXPECT_EQ(a.transpose().transpose(), a);
  EXPECT_EQ(a.conj_transpose()(1, 2), std::conj(a(2, 1)));
}
