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

#include "entest/base_tests.hpp"

#include <cmath>
#include <stdexcept>

#include "entest/errors.hpp"
#include "entest/kernels.hpp"

namespace entest::base {

namespace {

void check_direction(const score::ScoreModel& model, const double* w) {
  const std::size_t p = model.dim();
  bool any = false;
  for (std::size_t j = 0; j < p; ++j) {
    if (w[j] < 0.0) throw std::domain_error("direction must be nonnegative");
    if (w[j] > 0.0) any = true;
  }
  if (!any) throw std::domain_error("direction must have a positive entry");
}

// diag(w) Sigma diag(w)
linalg::Matrix weighted_sigma(const linalg::Matrix& sigma, const double* w) {
  const std::size_t p = sigma.rows();
  linalg::Matrix m(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) m(i, j) = w[i] * sigma(i, j) * w[j];
  }
  return m;
}

}  // namespace

BaseResult burden(const score::ScoreModel& model, const double* w) {
  check_direction(model, w);
  BaseResult r;
  r.null_kind = NullKind::kTwoSidedNormal;
  r.statistic = score::linear_stat(model, w);
  r.p_value = dist::two_sided_normal_p(r.statistic);
  return r;
}

BaseResult skat(const score::ScoreModel& model, const double* w) {
  check_direction(model, w);
  const std::size_t p = model.dim();
  BaseResult r;
  r.null_kind = NullKind::kMixture;
  r.statistic = kernels::weighted_sumsq(w, model.s.data(), p);
  std::vector<double> mu = linalg::sym_eigenvalues(weighted_sigma(model.sigma, w));
  if (!(mu.front() > 1e-12 * std::max(model.sigma_diag_max, 1e-300))) {
    throw DegenerateDrawError("weighted covariance vanished for this direction");
  }
  r.null_mixture = dist::MixtureSpec::from(std::move(mu));
  const dist::MixtureResult mr = dist::mixture_sf(r.statistic, r.null_mixture);
  r.p_value = mr.p;
  r.mixture_method = mr.method;
  return r;
}

BaseResult morst(const score::ScoreModel& model, const double* w, double theta) {
  check_direction(model, w);
  if (!(theta >= 0.0) || !std::isfinite(theta)) {
    throw std::domain_error("morst: theta must be finite and >= 0");
  }
  const std::size_t p = model.dim();
  const linalg::EigenSystem es = linalg::sym_eigen(weighted_sigma(model.sigma, w));
  if (!(es.values.front() > 1e-12 * std::max(model.sigma_diag_max, 1e-300))) {
    throw DegenerateDrawError("weighted covariance vanished for this direction");
  }

  BaseResult r;
  r.null_kind = NullKind::kMixture;
  // statistic via the eigenbasis of W Sigma W: v^T Q diag(1/(1+theta mu)) Q^T v
  double stat = 0.0;
  std::vector<double> null_ev;
  null_ev.reserve(p);
  for (std::size_t k = 0; k < p; ++k) {
    double proj = 0.0;
    for (std::size_t rr = 0; rr < p; ++rr) {
      proj += es.vectors(rr, k) * (w[rr] * model.s[rr]);
    }
    const double mu = es.values[k];
    stat += proj * proj / (1.0 + theta * mu);
    null_ev.push_back(mu / (1.0 + theta * mu));
  }
  r.statistic = stat;
  r.null_mixture = dist::MixtureSpec::from(std::move(null_ev));
  const dist::MixtureResult mr = dist::mixture_sf(r.statistic, r.null_mixture);
  r.p_value = mr.p;
  r.mixture_method = mr.method;
  return r;
}

double morst_default_theta(const std::vector<double>& mu) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const double m : mu) {
    if (m > 0.0) {
      sum += m;
      ++count;
    }
  }
  if (count == 0 || sum <= 0.0) return 0.0;
  return static_cast<double>(count) / sum;
}

BaseResult subset_chisq(const std::vector<double>& z, const linalg::Matrix& omega,
                        const std::vector<std::uint32_t>& idx) {
  const std::size_t p = z.size();
  const std::size_t s = idx.size();
  if (s == 0) throw std::domain_error("subset must be nonempty");
  if (omega.rows() != p || omega.cols() != p) {
    throw DataError("correlation matrix does not match score vector");
  }
  for (const std::uint32_t j : idx) {
    if (j >= p) throw std::domain_error("subset index out of range");
  }

  linalg::Matrix sub(s, s);
  std::vector<double> zs(s);
  for (std::size_t a = 0; a < s; ++a) {
    zs[a] = z[idx[a]];
    for (std::size_t b = 0; b < s; ++b) sub(a, b) = omega(idx[a], idx[b]);
  }
  const linalg::EigenSystem es = linalg::sym_eigen(sub);
  const double lmax = es.values.front();
  const double lmin = es.values.back();
  if (!(lmin > 0.0) || lmax / lmin > 1e8) {
    throw DegenerateDrawError("subset correlation matrix is ill-conditioned");
  }

  BaseResult r;
  r.null_kind = NullKind::kChiSquared;
  r.df = static_cast<int>(s);
  double stat = 0.0;
  for (std::size_t k = 0; k < s; ++k) {
    double proj = 0.0;
    for (std::size_t a = 0; a < s; ++a) proj += es.vectors(a, k) * zs[a];
    stat += proj * proj / es.values[k];
  }
  r.statistic = stat;
  r.p_value = dist::chisq_sf(stat, r.df);
  return r;
}

}  // namespace entest::base
