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

#include "entest/score_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "entest/errors.hpp"
#include "entest/kernels.hpp"

namespace entest::score {

namespace {

double diag_max(const linalg::Matrix& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) v = std::max(v, m(i, i));
  return v;
}

}  // namespace

ScoreModel ScoreModel::from_parts(std::vector<double> s, linalg::Matrix sigma,
                                  std::size_t n, bool validate_psd) {
  if (s.size() != sigma.rows() || sigma.rows() != sigma.cols()) {
    throw DataError("score vector and covariance dimensions disagree");
  }
  if (n == 0) throw DataError("sample size must be positive");
  if (validate_psd) {
    linalg::sym_eigenvalues(sigma);  // throws on asymmetry / indefiniteness
  }
  ScoreModel m;
  m.sigma_diag_max = diag_max(sigma);
  m.s = std::move(s);
  m.sigma = std::move(sigma);
  m.n = n;
  return m;
}

double SignalSpec::strength() const {
  return std::sqrt(kernels::sumsq(beta.data(), beta.size()));
}

std::vector<double> SignalSpec::direction() const {
  const double norm = strength();
  if (norm == 0.0) return {};
  std::vector<double> d(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) d[i] = beta[i] / norm;
  return d;
}

RegressionDesign RegressionDesign::prepare(const linalg::Matrix& g,
                                           const linalg::Matrix& z) {
  const std::size_t n = g.rows();
  const std::size_t p = g.cols();
  const std::size_t q = z.cols();
  if (p == 0 || n == 0) throw DataError("empty design matrix");
  if (q > 0 && z.rows() != n) {
    throw DataError("covariate row count does not match design");
  }
  if (n <= q + 1) {
    throw ConfigError("need n > q + 1 (" + std::to_string(n) + " samples, " +
                      std::to_string(q) + " covariates)");
  }

  RegressionDesign d;
  d.n_ = n;
  d.p_ = p;
  d.q_ = q;

  // Orthonormal basis of [intercept, Z] by modified Gram-Schmidt.
  d.basis_ = linalg::Matrix(q + 1, n);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t j = 0; j < n; ++j) d.basis_(0, j) = inv_sqrt_n;
  for (std::size_t k = 0; k < q; ++k) {
    double* row = d.basis_.row(k + 1);
    for (std::size_t j = 0; j < n; ++j) row[j] = z(j, k);
    const double before = std::sqrt(kernels::sumsq(row, n));
    for (std::size_t m = 0; m <= k; ++m) {
      const double c = kernels::dot(row, d.basis_.row(m), n);
      kernels::axpy(-c, d.basis_.row(m), row, n);
    }
    const double after = std::sqrt(kernels::sumsq(row, n));
    if (!(after > 1e-10 * std::max(before, 1.0))) {
      throw ConfigError("covariate matrix is rank deficient (column " +
                        std::to_string(k + 1) + ")");
    }
    const double inv = 1.0 / after;
    for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
  }

  // Residualize the design columns against the basis; variants kept as rows.
  d.gt_ = linalg::Matrix(p, n);
  for (std::size_t v = 0; v < p; ++v) {
    double* row = d.gt_.row(v);
    for (std::size_t j = 0; j < n; ++j) row[j] = g(j, v);
    for (std::size_t m = 0; m <= q; ++m) {
      const double c = kernels::dot(row, d.basis_.row(m), n);
      kernels::axpy(-c, d.basis_.row(m), row, n);
    }
  }

  d.sigma_ = linalg::Matrix(p, p);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      const double v = kernels::dot(d.gt_.row(a), d.gt_.row(b), n) * inv_n;
      d.sigma_(a, b) = v;
      d.sigma_(b, a) = v;
    }
  }
  d.sigma_diag_max_ = diag_max(d.sigma_);
  return d;
}

ScoreModel RegressionDesign::score_for(const std::vector<double>& y) const {
  if (y.size() != n_) throw DataError("response length does not match design");
  std::vector<double> resid = y;
  for (std::size_t m = 0; m <= q_; ++m) {
    const double c = kernels::dot(resid.data(), basis_.row(m), n_);
    kernels::axpy(-c, basis_.row(m), resid.data(), n_);
  }
  const double rss = kernels::sumsq(resid.data(), n_);
  const double y_scale = std::max(1.0, kernels::sumsq(y.data(), n_));
  if (!(rss > 1e-24 * y_scale)) {
    throw DataError("degenerate data: residual variance is zero");
  }
  const double dof = static_cast<double>(n_ - q_ - 1);
  const double sigma_hat2 = rss / dof;
  const double scale = 1.0 / (std::sqrt(sigma_hat2) * std::sqrt(static_cast<double>(n_)));

  ScoreModel m;
  m.s.resize(p_);
  for (std::size_t v = 0; v < p_; ++v) {
    m.s[v] = kernels::dot(gt_.row(v), resid.data(), n_) * scale;
  }
  m.sigma = sigma_;
  m.n = n_;
  m.sigma_diag_max = sigma_diag_max_;
  return m;
}

ScoreModel from_regression(const std::vector<double>& y, const linalg::Matrix& g,
                           const linalg::Matrix& z) {
  return RegressionDesign::prepare(g, z).score_for(y);
}

linalg::Matrix exchangeable_sigma(std::size_t p, double rho) {
  if (p == 0) throw std::domain_error("exchangeable_sigma: p must be >= 1");
  if (p >= 2) {
    const double lo = -1.0 / static_cast<double>(p - 1);
    if (!(rho >= lo - 1e-15 && rho <= 1.0)) {
      throw std::domain_error("exchangeable correlation must lie in [-1/(p-1), 1]");
    }
  }
  linalg::Matrix m(p, p, rho);
  for (std::size_t i = 0; i < p; ++i) m(i, i) = 1.0;
  return m;
}

double linear_stat(const ScoreModel& model, const double* w) {
  const std::size_t p = model.dim();
  const double denom2 = kernels::quad_form(model.sigma.data(), w, p);
  if (!(denom2 > 1e-12 * std::max(model.sigma_diag_max, 1e-300))) {
    throw DegenerateDrawError("direction lies in the null space of Sigma");
  }
  return kernels::dot(w, model.s.data(), p) / std::sqrt(denom2);
}

double relative_efficiency(const linalg::Matrix& sigma,
                           const std::vector<double>& w,
                           const std::vector<double>& w_beta) {
  const std::size_t p = sigma.rows();
  if (w.size() != p || w_beta.size() != p) {
    throw std::domain_error("direction length does not match Sigma");
  }
  const linalg::EigenSystem es = linalg::sym_eigen(sigma);
  std::vector<double> a(p), b(p);
  for (std::size_t k = 0; k < p; ++k) {
    double ua = 0.0;
    double ub = 0.0;
    for (std::size_t r = 0; r < p; ++r) {
      ua += es.vectors(r, k) * w[r];
      ub += es.vectors(r, k) * w_beta[r];
    }
    const double rt = std::sqrt(es.values[k]);
    a[k] = rt * ua;
    b[k] = rt * ub;
  }
  const double na = kernels::sumsq(a.data(), p);
  const double nb = kernels::sumsq(b.data(), p);
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw DegenerateDrawError("transformed direction vanished");
  }
  const double c = kernels::dot(a.data(), b.data(), p);
  return (c * c) / (na * nb);
}

linalg::EigenSystem eigen(const linalg::Matrix& sigma) {
  return linalg::sym_eigen(sigma);
}

}  // namespace entest::score
