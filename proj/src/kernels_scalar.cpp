// SPDX-License-Identifier: Apache-2.0
//
// Reference implementations. Every SIMD variant is equivalence-tested
// against these, so keep them as plain as possible.

#include "dmlink/kernels.hpp"

#include <cstring>

namespace dmlink::kernels {
namespace {

void scale_scalar(double* out, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void axpby_scalar(double* out, double a, const double* x, double b,
                  const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_sq_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double sum_sq_diff_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    acc += d * d;
  }
  return acc;
}

void caxpy_scalar(double* out, double a_re, double a_im, const double* x,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[2 * i];
    const double xi = x[2 * i + 1];
    out[2 * i] += a_re * xr - a_im * xi;
    out[2 * i + 1] += a_re * xi + a_im * xr;
  }
}

void gemm_nt_scalar(double* c, const double* a, const double* b, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_scalar(a + i * k, b + j * k, k);
    }
  }
}

void gemm_nn_scalar(double* c, const double* a, const double* b, std::size_t m,
                    std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double ail = a[i * k + l];
      const double* brow = b + l * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += ail * brow[j];
    }
  }
}

void gemm_tn_scalar(double* c, const double* a, const double* b, std::size_t p,
                    std::size_t m, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t r = 0; r < p; ++r) {
    const double* arow = a + r * m;
    const double* brow = b + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ari = arow[i];
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += ari * brow[j];
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table = {
      "scalar",        scale_scalar,   axpby_scalar,
      dot_scalar,      sum_sq_scalar,  sum_sq_diff_scalar,
      caxpy_scalar,    gemm_nt_scalar, gemm_nn_scalar,
      gemm_tn_scalar,
  };
  return table;
}

}  // namespace dmlink::kernels
