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

#ifndef ENTEST_DIST_HPP
#define ENTEST_DIST_HPP

#include <vector>

namespace entest::dist {

/// Downstream log/tan transforms need probabilities strictly inside (0, 1];
/// every tail function clamps its return value with this floor.
constexpr double kProbFloor = 1e-320;

double clamp_probability(double p);

/// Weighted chi-squared mixture sum_j lambda_j * chisq_j(1): the null law of
/// quadratic-form statistics. Eigenvalues are kept in nonincreasing order.
struct MixtureSpec {
  std::vector<double> eigenvalues;

  /// Validates (all >= 0, at least one > 0), sorts nonincreasing.
  static MixtureSpec from(std::vector<double> evs);
};

enum class MixtureMethod { kIntegration, kTailApproximation };

struct MixtureResult {
  double p = 1.0;
  MixtureMethod method = MixtureMethod::kIntegration;
};

/// P(N(0,1) > x) via the complementary error function. Extended-precision
/// intermediate keeps the relative error well under 1e-13 across +-38.
double normal_sf(double x);

/// 2 * normal_sf(|t|), in (0, 1].
double two_sided_normal_p(double t);

/// Inverse standard normal CDF (Wichura AS241 rational approximations).
double normal_quantile(double p);

/// Upper tail of chi-squared with df degrees of freedom.
double chisq_sf(double x, int df);

/// Regularized upper incomplete gamma Q(a, x), a > 0, x >= 0.
double gamma_q(double a, double x);

/// Upper tail of the eigenvalue mixture. Oscillatory-integral evaluation with
/// adaptive truncation down to tail probabilities around 1e-8, a
/// Lugannani-Rice saddlepoint approximation beyond that, and a three-cumulant
/// scaled chi-squared fallback if both fail.
MixtureResult mixture_sf(double x, const MixtureSpec& spec);

/// P(Cauchy > t) = 1/2 - arctan(t)/pi, evaluated without cancellation in
/// either tail.
double cauchy_sf(double t);

}  // namespace entest::dist

#endif  // ENTEST_DIST_HPP
