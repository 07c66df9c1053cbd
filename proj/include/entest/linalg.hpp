// Copyright 2026-present the entest project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENTEST_LINALG_HPP
#define ENTEST_LINALG_HPP

#include <cstddef>
#include <vector>

namespace entest::linalg {

/// Dense row-major matrix with value semantics. Sized for the p-in-the-
/// hundreds regime this library targets; no sparsity, no blocking.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct EigenSystem {
  std::vector<double> values;  // nonincreasing, clamped at zero
  Matrix vectors;              // column j is the eigenvector for values[j]
};

/// Cyclic Jacobi eigensolver for a symmetric PSD matrix. Off-diagonal
/// tolerance 1e-12 * ||A||_F, 100-sweep cap. Eigenvalues in [-1e-10*lmax, 0)
/// are clamped to zero; anything more negative is a data error. Asymmetry
/// beyond 1e-10 (relative to the largest entry) is a domain error.
EigenSystem sym_eigen(const Matrix& a);

/// Eigenvalues only; roughly twice as fast as sym_eigen.
std::vector<double> sym_eigenvalues(const Matrix& a);

/// Lower Cholesky factor of a positive-definite matrix.
Matrix cholesky(const Matrix& a);

/// Solves A x = b given the lower factor from cholesky().
std::vector<double> cholesky_solve(const Matrix& l, const double* b);

}  // namespace entest::linalg

#endif  // ENTEST_LINALG_HPP
