// SPDX-License-Identifier: Apache-2.0
//
// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma;
// callers must gate on avx2_supported() before dispatching here.

#include "dmlink/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cstring>

namespace dmlink::kernels {
namespace {

// Sum of the four lanes of a 256-bit accumulator.
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

void scale_avx2(double* out, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

void axpby_avx2(double* out, double a, const double* x, double b,
                const double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d by = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), by));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4),
                           _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_sq_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d v0 = _mm256_loadu_pd(x + i);
    const __m256d v1 = _mm256_loadu_pd(x + i + 4);
    acc0 = _mm256_fmadd_pd(v0, v0, acc0);
    acc1 = _mm256_fmadd_pd(v1, v1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double sum_sq_diff_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

void caxpy_avx2(double* out, double a_re, double a_im, const double* x,
                std::size_t n) {
  // Two complex elements per iteration, lanes [re0 im0 re1 im1].
  const __m256d vre = _mm256_set1_pd(a_re);
  const __m256d vim = _mm256_setr_pd(-a_im, a_im, -a_im, a_im);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d vx = _mm256_loadu_pd(x + 2 * i);
    const __m256d vswap = _mm256_permute_pd(vx, 0x5);  // [im0 re0 im1 re1]
    __m256d vo = _mm256_loadu_pd(out + 2 * i);
    vo = _mm256_fmadd_pd(vre, vx, vo);
    vo = _mm256_fmadd_pd(vim, vswap, vo);
    _mm256_storeu_pd(out + 2 * i, vo);
  }
  if (i < n) {
    const double xr = x[2 * i];
    const double xi = x[2 * i + 1];
    out[2 * i] += a_re * xr - a_im * xi;
    out[2 * i + 1] += a_re * xi + a_im * xr;
  }
}

void gemm_nt_avx2(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    std::size_t j = 0;
    // 1x4 blocks of C share the A-row loads.
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + (j + 0) * k;
      const double* b1 = b + (j + 1) * k;
      const double* b2 = b + (j + 2) * k;
      const double* b3 = b + (j + 3) * k;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      __m256d acc2 = _mm256_setzero_pd();
      __m256d acc3 = _mm256_setzero_pd();
      std::size_t l = 0;
      for (; l + 4 <= k; l += 4) {
        const __m256d va = _mm256_loadu_pd(arow + l);
        acc0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b0 + l), acc0);
        acc1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b1 + l), acc1);
        acc2 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b2 + l), acc2);
        acc3 = _mm256_fmadd_pd(va, _mm256_loadu_pd(b3 + l), acc3);
      }
      double s0 = hsum(acc0), s1 = hsum(acc1), s2 = hsum(acc2), s3 = hsum(acc3);
      for (; l < k; ++l) {
        const double av = arow[l];
        s0 += av * b0[l];
        s1 += av * b1[l];
        s2 += av * b2[l];
        s3 += av * b3[l];
      }
      double* crow = c + i * n + j;
      crow[0] = s0;
      crow[1] = s1;
      crow[2] = s2;
      crow[3] = s3;
    }
    for (; j < n; ++j) c[i * n + j] = dot_avx2(arow, b + j * k, k);
  }
}

// C-row accumulation shared by gemm_nn / gemm_tn: crow += coef * brow.
inline void row_fmadd(double* crow, double coef, const double* brow,
                      std::size_t n) {
  const __m256d vc = _mm256_set1_pd(coef);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    _mm256_storeu_pd(crow + j,
                     _mm256_fmadd_pd(vc, _mm256_loadu_pd(brow + j),
                                     _mm256_loadu_pd(crow + j)));
  }
  for (; j < n; ++j) crow[j] += coef * brow[j];
}

void gemm_nn_avx2(double* c, const double* a, const double* b, std::size_t m,
                  std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      row_fmadd(crow, a[i * k + l], b + l * n, n);
    }
  }
}

void gemm_tn_avx2(double* c, const double* a, const double* b, std::size_t p,
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

const KernelTable& avx2_table() {
  static const KernelTable table = {
      "avx2",        scale_avx2,   axpby_avx2,
      dot_avx2,      sum_sq_avx2,  sum_sq_diff_avx2,
      caxpy_avx2,    gemm_nt_avx2, gemm_nn_avx2,
      gemm_tn_avx2,
  };
  return table;
}

}  // namespace dmlink::kernels

#else

namespace dmlink::kernels {

// Built without AVX2 support: route to the reference table so the symbol
// still links. avx2_supported() reports false in this configuration.
const KernelTable& avx2_table() { return scalar_table(); }

}  // namespace dmlink::kernels

#endif
