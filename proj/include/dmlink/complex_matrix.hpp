// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace dmlink {

// Row-major complex matrix. Rows double as the per-sub-channel signal
// vectors, and the storage can be viewed as interleaved (re, im) doubles
// for the kernel primitives.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {}

  static ComplexMatrix identity(int m);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  std::complex<double>& at(int i, int j) { return data_[idx(i, j)]; }
  const std::complex<double>& at(int i, int j) const { return data_[idx(i, j)]; }

  std::complex<double>* row(int i) { return data_.data() + idx(i, 0); }
  const std::complex<double>* row(int i) const { return data_.data() + idx(i, 0); }

  // Interleaved (re, im) views; 2 * cols() doubles per row.
  double* row_reals(int i) { return reinterpret_cast<double*>(row(i)); }
  const double* row_reals(int i) const {
    return reinterpret_cast<const double*>(row(i));
  }
  double* reals() { return reinterpret_cast<double*>(data_.data()); }
  const double* reals() const {
    return reinterpret_cast<const double*>(data_.data());
  }
  std::size_t real_count() const { return 2 * data_.size(); }

  bool is_finite() const;
  double frobenius_sq() const;

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * cols_ + j;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::complex<double>> data_;
};

// A block of transmit symbols: one row per sub-channel.
using SignalBlock = ComplexMatrix;

// A (rows x k) * (k x cols) product.
ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);

// U^H * y without forming the adjoint.
ComplexMatrix adjoint_matmul(const ComplexMatrix& u, const ComplexMatrix& y);

// Mean squared error per complex element (|.|^2 sums both parts).
double mse_between(const ComplexMatrix& a, const ComplexMatrix& b);
double row_mse(const ComplexMatrix& a, const ComplexMatrix& b, int i);

}  // namespace dmlink
