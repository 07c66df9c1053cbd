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

#include "entest/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "entest/errors.hpp"
#include "entest/kernels.hpp"

namespace entest::linalg {

namespace {

void check_square_symmetric(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) {
    throw std::domain_error("matrix must be square and nonempty");
  }
  double amax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) amax = std::max(amax, std::fabs(a(i, j)));
  }
  const double tol = 1e-10 * std::max(1.0, amax);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::fabs(a(i, j) - a(j, i)) > tol) {
        throw std::domain_error("matrix is not symmetric within tolerance");
      }
    }
  }
}

double frobenius(const Matrix& a) {
  return std::sqrt(kernels::sumsq(a.data(), a.rows() * a.cols()));
}

double off_diag_frobenius(const Matrix& a) {
  const std::size_t n = a.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) acc += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(acc);
}

// Cyclic Jacobi on a working copy; vt (rows = eigenvectors) optional.
void jacobi(Matrix& a, Matrix* vt) {
  const std::size_t n = a.rows();
  const double target = 1e-12 * frobenius(a);
  for (int sweep = 0; sweep < 100; ++sweep) {
    if (off_diag_frobenius(a) <= target) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // rows p and q mix contiguously; columns follow by symmetry
        kernels::rotate(a.row(q), a.row(p), c, s, n);
        const std::size_t nn = n;
        double* dp = a.row(p);
        double* dq = a.row(q);
        dp[p] = app - t * apq;
        dq[q] = aqq + t * apq;
        dp[q] = 0.0;
        dq[p] = 0.0;
        for (std::size_t r = 0; r < nn; ++r) {
          if (r == p || r == q) continue;
          a(r, p) = dp[r];
          a(r, q) = dq[r];
        }
        if (vt != nullptr) kernels::rotate(vt->row(q), vt->row(p), c, s, n);
      }
    }
  }
}

std::vector<double> clamp_and_check(std::vector<double>& vals) {
  double lmax = 0.0;
  for (const double v : vals) lmax = std::max(lmax, v);
  const double floor = -1e-10 * std::max(lmax, 1e-300);
  for (double& v : vals) {
    if (v < floor) {
      throw DataError("matrix has a negative eigenvalue beyond tolerance (" +
                      std::to_string(v) + " vs largest " + std::to_string(lmax) +
                      ")");
    }
    if (v < 0.0) v = 0.0;
  }
  return vals;
}

}  // namespace

EigenSystem sym_eigen(const Matrix& a) {
  check_square_symmetric(a);
  const std::size_t n = a.rows();
  Matrix work = a;
  // symmetrize so the rotations see one consistent value per pair
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (work(i, j) + work(j, i));
      work(i, j) = m;
      work(j, i) = m;
    }
  }
  Matrix vt = Matrix::identity(n);
  jacobi(work, &vt);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return work(i, i) > work(j, j);
  });

  EigenSystem out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = work(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = vt(order[k], r);
  }
  clamp_and_check(out.values);
  return out;
}

std::vector<double> sym_eigenvalues(const Matrix& a) {
  check_square_symmetric(a);
  const std::size_t n = a.rows();
  Matrix work = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (work(i, j) + work(j, i));
      work(i, j) = m;
      work(j, i) = m;
    }
  }
  jacobi(work, nullptr);
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = work(i, i);
  std::sort(vals.begin(), vals.end(), std::greater<double>());
  clamp_and_check(vals);
  return vals;
}

Matrix cholesky(const Matrix& a) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) {
    throw std::domain_error("cholesky: matrix must be square");
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j) - kernels::dot(l.row(i), l.row(j), j);
      if (i == j) {
        if (!(s > 0.0)) {
          throw DataError("cholesky: matrix is not positive definite");
        }
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

std::vector<double> cholesky_solve(const Matrix& l, const double* b) {
  const std::size_t n = l.rows();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = (b[i] - kernels::dot(l.row(i), y.data(), i)) / l(i, i);
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = y[k];
    for (std::size_t i = k + 1; i < n; ++i) s -= l(i, k) * y[i];
    y[k] = s / l(k, k);
  }
  return y;
}

}  // namespace entest::linalg
