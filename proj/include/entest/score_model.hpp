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

#ifndef ENTEST_SCORE_MODEL_HPP
#define ENTEST_SCORE_MODEL_HPP

#include <cstddef>
#include <vector>

#include "entest/linalg.hpp"

namespace entest::score {

/// Gaussian score model S ~ N_p(sqrt(n) Sigma beta, Sigma): the object every
/// linear and quadratic base test consumes. Immutable after construction.
struct ScoreModel {
  std::vector<double> s;
  linalg::Matrix sigma;
  std::size_t n = 0;
  double sigma_diag_max = 0.0;  // scale reference for degeneracy checks

  std::size_t dim() const { return s.size(); }

  /// validate_psd additionally runs an eigendecomposition to reject
  /// covariances with negative eigenvalues beyond -1e-10*lmax; meant for
  /// user-supplied (S, Sigma, n) triples, not for covariances built here.
  static ScoreModel from_parts(std::vector<double> s, linalg::Matrix sigma,
                               std::size_t n, bool validate_psd = false);
};

/// True coefficient vector under a simulated alternative.
struct SignalSpec {
  std::vector<double> beta;

  double strength() const;                // ||beta||_2
  std::vector<double> direction() const;  // beta/||beta||; empty when null
};

/// Covariate-residualized design prepared once per (G, Z) pair. Scoring a
/// response is then O(np), which is what lets the simulation harness run
/// millions of replicates against a fixed genotype panel.
class RegressionDesign {
 public:
  /// g is the n x p design (centered internally), z the n x q covariate
  /// matrix (q = 0 allowed); an intercept column is always included.
  static RegressionDesign prepare(const linalg::Matrix& g, const linalg::Matrix& z);

  ScoreModel score_for(const std::vector<double>& y) const;

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }
  const linalg::Matrix& sigma() const { return sigma_; }

 private:
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::size_t q_ = 0;          // covariate count excluding intercept
  linalg::Matrix basis_;       // orthonormal [1, Z] basis, rows contiguous
  linalg::Matrix gt_;          // residualized design, p x n (variants as rows)
  linalg::Matrix sigma_;
  double sigma_diag_max_ = 0.0;
};

/// One-shot form of the above.
ScoreModel from_regression(const std::vector<double>& y, const linalg::Matrix& g,
                           const linalg::Matrix& z);

/// Unit-diagonal matrix with constant off-diagonal rho;
/// valid for -1/(p-1) <= rho <= 1.
linalg::Matrix exchangeable_sigma(std::size_t p, double rho);

/// w^T S / sqrt(w^T Sigma w); standard normal under the null. Throws
/// DegenerateDrawError when the denominator is at numerical-noise scale.
double linear_stat(const ScoreModel& model, const double* w);

/// cos^2 of the angle between Lambda^{1/2} U^T w and Lambda^{1/2} U^T w_beta:
/// the efficiency of the linear test along w relative to the oracle along
/// w_beta.
double relative_efficiency(const linalg::Matrix& sigma,
                           const std::vector<double>& w,
                           const std::vector<double>& w_beta);

/// Full eigensystem of a dense symmetric PSD matrix (cyclic Jacobi).
linalg::EigenSystem eigen(const linalg::Matrix& sigma);

}  // namespace entest::score

#endif  // ENTEST_SCORE_MODEL_HPP
