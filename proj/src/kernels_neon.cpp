// SPDX-License-Identifier: Apache-2.0
//
// NEON variants for aarch64. Two doubles per vector, so the unroll factors
// are wider than in the AVX2 file to keep the FMA pipes busy.

#include "dmlink/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstring>

namespace dmlink::kernels {
namespace {

void scale_neon(double* out, double a, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

void axpby_neon(double* out, double a, const double* x, double b,
                const double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t by = vmulq_f64(vb, vld1q_f64(y + i));
    vst1q_f64(out + i, vfmaq_f64(by, va, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  for (; i + 2 <= n; i += 2) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_sq_neon(const double* x, std::size_t n) {
  return dot_neon(x, x, n);
}

double sum_sq_diff_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void caxpy_neon(double* out, double a_re, double a_im, const double* x,
                std::size_t n) {
  // One complex element per vector, lanes [re im].
  const float64x2_t vre = vdupq_n_f64(a_re);
  const double im_coef[2] = {-a_im, a_im};
  const float64x2_t vim = vld1q_f64(im_coef);
  for (std::size_t i = 0; i < n; ++i) {
    const float64x2_t vx = vld1q_f64(x + 2 * i);
    const float64x2_t vswap = vextq_f64(vx, vx, 1);  // [im re]
    float64x2_t vo = vld1q_f64(out + 2 * i);
    vo = vfmaq_f64(vo, vre, vx);
    vo = vfmaq_f64(vo, vim, vswap);
    vst1q_f64(out + 2 * i, vo);
  }
}

void gemm_nt_neon(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = dot_neon(arow, b + j * k, k);
    }
  }
}

inline void row_fmadd(double* crow, double coef, const double* brow,
                      std::size_t n) {
  const float64x2_t vc = vdupq_n_f64(coef);
  std::size_t j = 0;
  for (; j + 2 <= n; j += 2) {
    vst1q_f64(crow + j, vfmaq_f64(vld1q_f64(crow + j), vc, vld1q_f64(brow + j)));
  }
  for (; j < n; ++j) crow[j] += coef * brow[j];
}

void gemm_nn_neon(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      row_fmadd(crow, a[i * k + l], b + l * n, n);
    }
  }
}

void gemm_tn_neon(double* c, const double* a, const double* b, std::size_t p,
                  std::size_t m, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t r = 0; r < p; ++r) {
    const double* arow = a + r * m;
    const double* brow = b + r * n;
    for (std::size_t i = 0; i < m; ++i) {
      row_fmadd(c + i * n, arow[i], brow, n);
    }
  }
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table = {
      "neon",        scale_neon,   axpby_neon,
      dot_neon,      sum_sq_neon,  sum_sq_diff_neon,
      caxpy_neon,    gemm_nt_neon, gemm_nn_neon,
      gemm_tn_neon,
  };
  return table;
}

}  // namespace dmlink::kernels

#endif
