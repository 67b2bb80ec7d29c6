// SPDX-License-Identifier: Apache-2.0

#include "dmlink/complex_matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "dmlink/kernels.hpp"

namespace dmlink {

ComplexMatrix ComplexMatrix::identity(int m) {
  ComplexMatrix out(m, m);
  for (int i = 0; i < m; ++i) out.at(i, i) = 1.0;
  return out;
}

bool ComplexMatrix::is_finite() const {
  const double* p = reals();
  for (std::size_t i = 0; i < real_count(); ++i) {
    if (!std::isfinite(p[i])) return false;
  }
  return true;
}

double ComplexMatrix::frobenius_sq() const {
  return kernels::active().sum_sq(reals(), real_count());
}

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions do not match");
  }
  const auto& kt = kernels::active();
  ComplexMatrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      const std::complex<double> c = a.at(i, j);
      kt.caxpy(out.row_reals(i), c.real(), c.imag(), b.row_reals(j), b.cols());
    }
  }
  return out;
}

ComplexMatrix adjoint_matmul(const ComplexMatrix& u, const ComplexMatrix& y) {
  if (u.rows() != y.rows()) {
    throw std::invalid_argument("adjoint_matmul: inner dimensions do not match");
  }
  const auto& kt = kernels::active();
  ComplexMatrix out(u.cols(), y.cols());
  for (int i = 0; i < u.cols(); ++i) {
    for (int j = 0; j < u.rows(); ++j) {
      const std::complex<double> c = std::conj(u.at(j, i));
      kt.caxpy(out.row_reals(i), c.real(), c.imag(), y.row_reals(j), y.cols());
    }
  }
  return out;
}

double mse_between(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("mse_between: shape mismatch");
  }
  if (a.size() == 0) return 0.0;
  return kernels::active().sum_sq_diff(a.reals(), b.reals(), a.real_count()) /
         static_cast<double>(a.size());
}

double row_mse(const ComplexMatrix& a, const ComplexMatrix& b, int i) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("row_mse: shape mismatch");
  }
  return kernels::active().sum_sq_diff(a.row_reals(i), b.row_reals(i),
                                       2 * static_cast<std::size_t>(a.cols())) /
         static_cast<double>(a.cols());
}

}  // namespace dmlink
