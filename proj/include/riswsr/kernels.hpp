// SPDX-License-Identifier: Apache-2.0
//
// Inner-loop kernels with a scalar reference and SIMD variants.
//
// Every variant implements the same KernelTable. The active table is chosen
// once per process from the CPU feature flags; the environment variable
// RISWSR_KERNELS=scalar|avx2 overrides the choice. Variants agree with the
// scalar reference to rounding (FMA contraction and summation order differ),
// never bit-for-bit.

#pragma once

#include <complex>
#include <cstddef>

namespace riswsr::kernels {

using cplx = std::complex<double>;

struct KernelTable {
  const char* name;
  // y += a * x
  void (*daxpy)(std::size_t n, double a, const double* x, double* y);
  // sum_i x[i] * y[i]
  double (*ddot)(std::size_t n, const double* x, const double* y);
  // y += a * x, complex
  void (*caxpy)(std::size_t n, cplx a, const cplx* x, cplx* y);
  // sum_i x[i] * y[i], complex, no conjugation
  cplx (*cdotu)(std::size_t n, const cplx* x, const cplx* y);
  // y = max(x, 0); in-place allowed
  void (*relu)(std::size_t n, const double* x, double* y);
  // y[i] = (x[i] > 0) ? g[i] : 0
  void (*relu_backward)(std::size_t n, const double* x, const double* g, double* y);
};

const KernelTable& scalar_table();

/// AVX2+FMA table, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_table();

/// Table used by the library.
const KernelTable& active();

/// C[m x n] (+)= A[m x k] * B[k x n], all row-major.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);
/// C[m x k] (+)= A[m x n] * B[k x n]^T.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);
/// C[k x n] (+)= A[m x k]^T * B[m x n].
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);

}  // namespace riswsr::kernels
