// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace dmlink::kernels {

// Dense double-precision primitives used by the simulator hot loops.
// Matrices are row-major. Complex arrays are interleaved (re, im) pairs;
// `n` counts complex elements there, doubles everywhere else.
//
// GEMM conventions (all overwrite `c`):
//   gemm_nt: C[m x n] = A[m x k] * B[n x k]^T
//   gemm_nn: C[m x n] = A[m x k] * B[k x n]
//   gemm_tn: C[m x n] = A[p x m]^T * B[p x n]
struct KernelTable {
  const char* name;

  void (*scale)(double* out, double a, const double* x, std::size_t n);
  void (*axpby)(double* out, double a, const double* x, double b,
                const double* y, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);
  double (*sum_sq_diff)(const double* x, const double* y, std::size_t n);
  // out[i] += (a_re + i*a_im) * x[i] over n complex elements.
  void (*caxpy)(double* out, double a_re, double a_im, const double* x,
                std::size_t n);
  void (*gemm_nt)(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n);
  void (*gemm_nn)(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n);
  void (*gemm_tn)(double* c, const double* a, const double* b, std::size_t p,
                  std::size_t m, std::size_t n);
};

const KernelTable& scalar_table();

bool avx2_supported();
// Only valid to call through when avx2_supported() is true.
const KernelTable& avx2_table();

#if defined(__aarch64__)
const KernelTable& neon_table();
#endif

// Table selected once per process: best supported variant, unless the
// DMLINK_KERNELS environment variable ("scalar", "avx2", "neon", "auto")
// overrides the choice. An unsupported request falls back to scalar with a
// warning on stderr.
const KernelTable& active();

}  // namespace dmlink::kernels
