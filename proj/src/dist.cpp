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

#include "entest/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "entest/errors.hpp"
#include "entest/kernels.hpp"

namespace entest::dist {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw std::domain_error(std::string(what) + " must be finite");
  }
}

}  // namespace

double clamp_probability(double p) {
  if (!(p > kProbFloor)) return kProbFloor;
  if (p > 1.0) return 1.0;
  return p;
}

double normal_sf(double x) {
  require_finite(x, "normal_sf argument");
  // The 80-bit intermediate absorbs both the argument-rounding error of
  // x/sqrt(2) (which alone would cost ~x^2 * eps relative) and the subnormal
  // squeeze below 1e-308.
  const long double v =
      0.5L * erfcl(static_cast<long double>(x) *
                   0.7071067811865475244008443621048490393L);
  return clamp_probability(static_cast<double>(v));
}

double two_sided_normal_p(double t) {
  require_finite(t, "two_sided_normal_p argument");
  const double p = 2.0 * normal_sf(std::fabs(t));
  return p > 1.0 ? 1.0 : clamp_probability(p);
}

// ---------------------------------------------------------------------------
// Regularized incomplete gamma
// ---------------------------------------------------------------------------

namespace {

// Series for P(a,x), used when x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 10000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  const double logpre = a * std::log(x) - x - std::lgamma(a);
  return sum * std::exp(logpre);
}

// Modified Lentz continued fraction for Q(a,x), used when x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  const double logpre = a * std::log(x) - x - std::lgamma(a);
  if (logpre < -700.0) return std::exp(logpre + std::log(h));
  return std::exp(logpre) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::domain_error("gamma_q: shape must be positive and finite");
  }
  if (!(x >= 0.0)) throw std::domain_error("gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return clamp_probability(1.0 - gamma_p_series(a, x));
  return clamp_probability(gamma_q_cf(a, x));
}

double chisq_sf(double x, int df) {
  if (df < 1) throw std::domain_error("chisq_sf: df must be >= 1");
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw std::domain_error("chisq_sf: x must be finite and >= 0");
  }
  if (x == 0.0) return 1.0;
  if (df == 1) return two_sided_normal_p(std::sqrt(x));
  const double m = 0.5 * x;
  if (df % 2 == 0 && df <= 60 && m < 690.0) {
    // closed-form Poisson sum, exact for even df
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < df / 2; ++k) {
      term *= m / k;
      sum += term;
    }
    return clamp_probability(std::exp(-m) * sum);
  }
  return gamma_q(0.5 * df, m);
}

// ---------------------------------------------------------------------------
// Inverse normal CDF (AS241 PPND16)
// ---------------------------------------------------------------------------

namespace {

double rat_eval(const double* a, const double* b, int n, double x) {
  double u = a[n - 1];
  for (int i = n - 1; i > 0; --i) u = x * u + a[i - 1];
  double v = b[n - 1];
  for (int i = n - 1; i > 0; --i) v = x * v + b[i - 1];
  return u / v;
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("normal_quantile: p must be in (0,1)");
  }
  const double dp = p - 0.5;
  if (std::fabs(dp) <= 0.425) {
    static const double a[8] = {3.387132872796366608,  133.14166789178437745,
                                1971.5909503065514427, 13731.693765509461125,
                                45921.953931549871457, 67265.770927008700853,
                                33430.575583588128105, 2509.0809287301226727};
    static const double b[8] = {1.0,
                                42.313330701600911252,
                                687.1870074920579083,
                                5394.1960214247511077,
                                21213.794301586595867,
                                39307.89580009271061,
                                28729.085735721942674,
                                5226.495278852854561};
    return dp * rat_eval(a, b, 8, 0.180625 - dp * dp);
  }
  const double q = dp < 0.0 ? p : 1.0 - p;
  const double r = std::sqrt(-std::log(q));
  double z;
  if (r <= 5.0) {
    static const double a[8] = {
        1.42343711074968357734,   4.6303378461565452959,
        5.7694972214606914055,    3.64784832476320460504,
        1.27045825245236838258,   0.24178072517745061177,
        0.0227238449892691845833, 7.7454501427834140764e-4};
    static const double b[8] = {1.0,
                                2.05319162663775882187,
                                1.6763848301838038494,
                                0.68976733498510000455,
                                0.14810397642748007459,
                                0.0151986665636164571966,
                                5.475938084995344946e-4,
                                1.05075007164441684324e-9};
    z = rat_eval(a, b, 8, r - 1.6);
  } else {
    static const double a[8] = {
        6.6579046435011037772,     5.4637849111641143699,
        1.7848265399172913358,     0.29656057182850489123,
        0.026532189526576123093,   0.0012426609473880784386,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static const double b[8] = {1.0,
                                0.59983220655588793769,
                                0.13692988092273580531,
                                0.0148753612908506148525,
                                7.868691311456132591e-4,
                                1.8463183175100546818e-5,
                                1.4215117583164458887e-7,
                                2.04426310338993978564e-15};
    z = rat_eval(a, b, 8, r - 5.0);
  }
  return dp < 0.0 ? -z : z;
}

double cauchy_sf(double t) {
  require_finite(t, "cauchy_sf argument");
  // atan(1/t)/pi is the exact reflection of 1/2 - atan(t)/pi and degrades
  // gracefully into the 1/(pi t) asymptote, so neither tail cancels.
  if (t > 1.0) return clamp_probability(std::atan(1.0 / t) / kPi);
  if (t < -1.0) return clamp_probability(1.0 - std::atan(-1.0 / t) / kPi);
  return clamp_probability(0.5 - std::atan(t) / kPi);
}

// ---------------------------------------------------------------------------
// Chi-squared mixtures
// ---------------------------------------------------------------------------

MixtureSpec MixtureSpec::from(std::vector<double> evs) {
  if (evs.empty()) throw std::domain_error("mixture needs >= 1 eigenvalue");
  double top = 0.0;
  for (const double v : evs) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::domain_error("mixture eigenvalues must be finite and >= 0");
    }
    top = std::max(top, v);
  }
  if (top == 0.0) throw std::domain_error("mixture needs a positive eigenvalue");
  std::sort(evs.begin(), evs.end(), std::greater<double>());
  return MixtureSpec{std::move(evs)};
}

namespace {

// Imhof-style inversion: P(Q > x) = 1/2 + (1/pi) Int_0^inf sin(theta(u)) /
// (u rho(u)) du with theta(u) = (sum_j atan(l_j u) - x u)/2 and
// rho(u) = prod_j (1 + l_j^2 u^2)^{1/4}.
struct ImhofIntegrand {
  const double* lambda;
  std::size_t m;
  double x;
  double lambda_sum;

  void phase(double u, double* theta, double* logrho) const {
    double at = 0.0;
    double lg = 0.0;
    kernels::imhof_terms(u, lambda, m, &at, &lg);
    *theta = 0.5 * at - 0.5 * x * u;
    *logrho = 0.25 * lg;
  }

  double theta_only(double u) const {
    double th, lr;
    phase(u, &th, &lr);
    return th;
  }

  // d theta / du, strictly decreasing on u > 0 with limit -x/2.
  double theta_prime(double u) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double t = lambda[j] * u;
      acc += lambda[j] / (1.0 + t * t);
    }
    return 0.5 * acc - 0.5 * x;
  }

  double operator()(double u) const {
    if (u == 0.0) return 0.5 * (lambda_sum - x);
    double th, lr;
    phase(u, &th, &lr);
    return std::sin(th) * std::exp(-lr) / u;
  }
};

// 7/15 Gauss-Kronrod nodes/weights on [-1, 1].
const double kKronrodNode[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
const double kKronrodWt[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
const double kGaussWt[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

void gk15(const ImhofIntegrand& f, double a, double b, double* result,
          double* err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = kKronrodWt[7] * fc;
  double gauss = kGaussWt[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double f1 = f(c - h * kKronrodNode[i]);
    const double f2 = f(c + h * kKronrodNode[i]);
    kron += kKronrodWt[i] * (f1 + f2);
    if (i % 2 == 1) gauss += kGaussWt[i / 2] * (f1 + f2);
  }
  *result = kron * h;
  *err = std::fabs((kron - gauss) * h);
}

struct AdaptiveState {
  double total = 0.0;
  double err = 0.0;
  int panels = 0;
};

void adaptive_gk(const ImhofIntegrand& f, double a, double b, double tol,
                 int depth, AdaptiveState* st) {
  double r, e;
  gk15(f, a, b, &r, &e);
  if (e <= tol || depth >= 48 || st->panels > 6000) {
    st->total += r;
    st->err += e;
    ++st->panels;
    return;
  }
  const double c = 0.5 * (a + b);
  adaptive_gk(f, a, c, 0.5 * tol, depth + 1, st);
  adaptive_gk(f, c, b, 0.5 * tol, depth + 1, st);
}

// 15-point Gauss-Legendre for single-sign lobes between phase zeros.
const double kGlNode[8] = {
    0.000000000000000000, 0.201194093997434522, 0.394151347077563370,
    0.570972172608538848, 0.724417731360170047, 0.848206583410427216,
    0.937273392400705904, 0.987992518020485428};
const double kGlWt[8] = {
    0.202578241925561273, 0.198431485327111576, 0.186161000015562211,
    0.166269205816993934, 0.139570677926154314, 0.107159220467171935,
    0.070366047488108125, 0.030753241996117268};

double gl15(const ImhofIntegrand& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = kGlWt[0] * f(c);
  for (int i = 1; i < 8; ++i) {
    acc += kGlWt[i] * (f(c - h * kGlNode[i]) + f(c + h * kGlNode[i]));
  }
  return acc * h;
}

// Solve theta(u) = target on a bracket where theta is strictly decreasing.
// Newton with bisection safeguard; a phase tolerance of 1e-9 rad only
// redistributes mass between adjacent lobes, it does not move the total.
double solve_phase(const ImhofIntegrand& f, double lo, double hi, double target) {
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 64; ++it) {
    const double g = f.theta_only(x) - target;
    if (std::fabs(g) < 1e-9) return x;
    if (g > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double slope = f.theta_prime(x);
    double nx = slope < 0.0 ? x - g / slope : 0.5 * (lo + hi);
    if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
    if (std::fabs(nx - x) <= 1e-15 * hi) return nx;
    x = nx;
  }
  return x;
}

// Integral of the oscillatory remainder as an alternating series of lobes,
// Euler-accelerated so no explicit truncation bound is needed.
bool euler_tail(const ImhofIntegrand& f, double* u_prev, double* theta_prev,
                double eps, double* out) {
  constexpr int kMax = 56;
  double lobes[kMax];
  double u = *u_prev;
  double target = *theta_prev;
  for (int j = 0; j < kMax; ++j) {
    target -= kPi;
    const double lobe_lo = u;
    double step = kPi / std::fabs(f.theta_prime(u));
    double hi = u + step;
    while (f.theta_only(hi) > target) {
      u = hi;
      hi += step;
      step *= 1.5;
    }
    const double z = solve_phase(f, u, hi, target);
    lobes[j] = gl15(f, lobe_lo, z);
    u = z;
  }
  *u_prev = u;
  *theta_prev = target;
  // iterated averaging of partial sums
  double s[kMax];
  double run = 0.0;
  for (int j = 0; j < kMax; ++j) {
    run += lobes[j];
    s[j] = run;
  }
  int len = kMax;
  double prev_top = s[kMax - 1];
  double top = prev_top;
  while (len > 1) {
    for (int j = 0; j + 1 < len; ++j) s[j] = 0.5 * (s[j] + s[j + 1]);
    --len;
    prev_top = top;
    top = s[len - 1];
    if (std::fabs(top - prev_top) < 0.25 * eps && len < kMax - 4) break;
  }
  *out = top;
  return std::fabs(top - prev_top) <= eps;
}

// Full oscillatory evaluation; sets *ok=false when the error budget could
// not be met.
double imhof_integral(double x, const double* lambda, std::size_t m,
                      double lambda_sum, double eps, bool* ok) {
  *ok = true;
  const ImhofIntegrand f{lambda, m, x, lambda_sum};

  // Locate the first sin(theta) zero at or beyond the phase turning point.
  double u_start;
  double theta_start;
  const double dtheta0 = 0.5 * (lambda_sum - x);
  if (dtheta0 <= 0.0) {
    // phase strictly decreasing from 0: first zero at theta = -pi
    double hi = kPi / std::fabs(dtheta0 - 1e-3 * x - 1e-300);
    while (f.theta_only(hi) > -kPi) hi *= 2.0;
    u_start = solve_phase(f, 0.0, hi, -kPi);
    theta_start = -kPi;
  } else {
    // climb to the turning point, then descend to the next multiple of pi
    double t_hi = 1.0 / (x + 1e-300);
    while (f.theta_prime(t_hi) > 0.0) t_hi *= 2.0;
    double t_lo = 0.0;
    for (int it = 0; it < 120; ++it) {
      const double mid = 0.5 * (t_lo + t_hi);
      if (f.theta_prime(mid) > 0.0) {
        t_lo = mid;
      } else {
        t_hi = mid;
      }
    }
    const double u_turn = t_hi;
    const double theta_top = f.theta_only(u_turn);
    theta_start = std::floor(theta_top / kPi) * kPi;
    double hi = u_turn + kPi / (0.5 * x);
    while (f.theta_only(hi) > theta_start) hi = u_turn + (hi - u_turn) * 2.0;
    u_start = solve_phase(f, u_turn, hi, theta_start);
  }

  // Non-oscillatory (single phase reversal) head.
  AdaptiveState head;
  adaptive_gk(f, 0.0, u_start, 0.45 * eps, 0, &head);
  double total = head.total;
  double err = head.err;

  // Alternating lobes, direct summation while they still shrink fast.
  double u = u_start;
  double theta = theta_start;
  double prev_mag = std::numeric_limits<double>::infinity();
  bool converged = false;
  for (int k = 0; k < 32; ++k) {
    const double target = theta - kPi;
    const double lobe_lo = u;
    double step = kPi / std::fabs(f.theta_prime(u));
    double hi = u + step;
    while (f.theta_only(hi) > target) {
      u = hi;
      hi += step;
      step *= 1.5;
    }
    const double z = solve_phase(f, u, hi, target);
    const double lobe = gl15(f, lobe_lo, z);
    total += lobe;
    u = z;
    theta = target;
    const double mag = std::fabs(lobe);
    if (mag <= 0.3 * eps && mag <= prev_mag) {
      err += mag;  // alternating-series remainder bound
      converged = true;
      break;
    }
    prev_mag = mag;
  }
  if (!converged) {
    double tail = 0.0;
    if (euler_tail(f, &u, &theta, 0.3 * eps, &tail)) {
      total += tail;
    } else {
      *ok = false;
    }
  }
  if (err > 4.0 * eps) *ok = false;
  return total;
}

// Lugannani-Rice saddlepoint tail. *ok=false near the mean (w ~ 0) or if the
// root search fails.
double lr_tail(double x, const double* lambda, std::size_t m, double lambda_sum,
               bool* ok) {
  *ok = false;
  const double lmax = lambda[0];
  const auto kprime = [&](double t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += lambda[j] / (1.0 - 2.0 * t * lambda[j]);
    return acc;
  };
  // bracket the root of K'(t) = x; K' is increasing on (-inf, 1/(2 lmax))
  double lo, hi;
  if (x >= lambda_sum) {
    lo = 0.0;
    hi = 0.5 / lmax * (1.0 - 1e-14);
    if (kprime(hi) < x) return 0.0;  // beyond representable: deep tail anyway
  } else {
    hi = 0.0;
    lo = -0.5 / lmax;
    while (kprime(lo) > x) lo *= 2.0;
  }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double g = kprime(t) - x;
    if (g > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    // Newton step, clipped to the bracket
    double kpp = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double d = 1.0 - 2.0 * t * lambda[j];
      kpp += 2.0 * lambda[j] * lambda[j] / (d * d);
    }
    double tn = t - g / kpp;
    if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
    if (std::fabs(tn - t) <= 1e-15 * (std::fabs(t) + 1e-300)) {
      t = tn;
      break;
    }
    t = tn;
  }
  double kval = 0.0;
  double kpp = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double q = -2.0 * t * lambda[j];
    kval += -0.5 * std::log1p(q);
    const double d = 1.0 + q;
    kpp += 2.0 * lambda[j] * lambda[j] / (d * d);
  }
  const double w2 = 2.0 * (t * x - kval);
  if (w2 <= 0.0) return 0.0;
  const double w = (t >= 0.0 ? 1.0 : -1.0) * std::sqrt(w2);
  const double u = t * std::sqrt(kpp);
  if (std::fabs(w) < 1e-5 || u == 0.0) return 0.0;
  *ok = true;
  return normal_sf(w + std::log(u / w) / w);
}

// Three-cumulant scaled chi-squared fallback.
double moment_match_tail(double x, const double* lambda, std::size_t m) {
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const double l = lambda[j];
    c1 += l;
    c2 += l * l;
    c3 += l * l * l;
  }
  const double scale = c3 / c2;
  const double df = c2 * c2 * c2 / (c3 * c3);
  const double shift = c1 - scale * df;
  const double y = (x - shift) / scale;
  if (y <= 0.0) return 1.0;
  return gamma_q(0.5 * df, 0.5 * y);
}

bool all_equal(const double* lambda, std::size_t m) {
  for (std::size_t j = 1; j < m; ++j) {
    if (std::fabs(lambda[j] - lambda[0]) > 1e-12 * lambda[0]) return false;
  }
  return true;
}

}  // namespace

MixtureResult mixture_sf(double x, const MixtureSpec& spec) {
  if (!(x >= 0.0) || !std::isfinite(x)) {
    throw std::domain_error("mixture_sf: x must be finite and >= 0");
  }
  if (spec.eigenvalues.empty()) {
    throw std::domain_error("mixture_sf: empty eigenvalue list");
  }
  const double lmax = spec.eigenvalues.front();
  if (!(lmax > 0.0)) {
    throw std::domain_error("mixture_sf: all eigenvalues are zero");
  }
  // Eigenvalues below 1e-12*lmax are numerical noise from rank-deficient
  // covariances and only destabilize the integrand.
  std::size_t m = spec.eigenvalues.size();
  while (m > 1 && spec.eigenvalues[m - 1] < 1e-12 * lmax) --m;
  const double* lambda = spec.eigenvalues.data();
  if (x == 0.0) return {1.0, MixtureMethod::kIntegration};

  double lambda_sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) lambda_sum += lambda[j];

  bool spa_ok = false;
  const double p_spa = lr_tail(x, lambda, m, lambda_sum, &spa_ok);
  if (spa_ok && p_spa < 5e-9) {
    // Oscillatory inversion would lose this to cancellation against 1/2.
    if (m == 1 || all_equal(lambda, m)) {
      return {gamma_q(0.5 * static_cast<double>(m), 0.5 * x / lambda[0]),
              MixtureMethod::kTailApproximation};
    }
    return {clamp_probability(p_spa), MixtureMethod::kTailApproximation};
  }

  const double est = spa_ok ? std::max(p_spa, 1e-8) : 0.25;
  const double eps = std::clamp(est * 1e-7, 1e-15, 1e-9);
  bool ok = false;
  const double integral = imhof_integral(x, lambda, m, lambda_sum, eps, &ok);
  if (ok) {
    const double p = 0.5 + integral / kPi;
    if (p > -1e-9 && p < 1.0 + 1e-9) {
      return {clamp_probability(p), MixtureMethod::kIntegration};
    }
  }
  if (spa_ok && p_spa > 0.0) {
    return {clamp_probability(p_spa), MixtureMethod::kTailApproximation};
  }
  const double p_mm = moment_match_tail(x, lambda, m);
  if (p_mm > 0.0 && p_mm <= 1.0) {
    return {clamp_probability(p_mm), MixtureMethod::kTailApproximation};
  }
  throw NumericalError(
      "mixture_sf failed to converge (x=" + std::to_string(x) +
      ", m=" + std::to_string(m) + ", lmax=" + std::to_string(lmax) + ")");
}

}  // namespace entest::dist
