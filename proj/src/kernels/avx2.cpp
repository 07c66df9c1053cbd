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

// AVX2 + FMA backend. This translation unit is compiled with -mavx2 -mfma;
// nothing here may run before avx2::available() has been checked.

#include "entest/kernels.hpp"

#if defined(__x86_64__)

#include <immintrin.h>

#include <cmath>

namespace entest::kernels::avx2 {

bool available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_hadd_pd(lo, lo));
}

// ---- vector atan / log1p -------------------------------------------------
//
// atan: arguments here are nonnegative (lambda*u with lambda, u >= 0).
// Reciprocal reduction maps to [0,1]; a 17-entry table of atan(k/16) plus a
// degree-9 odd Taylor polynomial on |r| <= 1/32 covers the rest. Truncation
// error < 3e-18, total error a few ulps.

alignas(32) const double kAtanTab[17] = {
    0.0,
    0.062418809995957348474,
    0.124354994546761435031,
    0.185347949995694764886,
    0.244978663126864154172,
    0.302884868374971405561,
    0.358770670270572220396,
    0.4124104415973873069,
    0.463647609000806116214,
    0.512389460310737706667,
    0.558599315343562435972,
    0.602287346134964181682,
    0.643501108793284386803,
    0.682316554874748078256,
    0.718829999621624505417,
    0.753151280962194389525,
    0.785398163397448309616,
};

const double kPiOver2 = 1.5707963267948966;

inline __m256d atan_nonneg(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d big = _mm256_cmp_pd(x, one, _CMP_GT_OQ);
  // t in [0, 1]
  const __m256d t = _mm256_blendv_pd(x, _mm256_div_pd(one, x), big);
  // nearest table node k = round(16 t)
  const __m256d kf = _mm256_round_pd(_mm256_mul_pd(t, _mm256_set1_pd(16.0)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  const __m128i k32 = _mm256_cvtpd_epi32(kf);
  const __m256i k64 = _mm256_cvtepi32_epi64(k32);
  const __m256d base = _mm256_i64gather_pd(kAtanTab, k64, 8);
  const __m256d node = _mm256_mul_pd(kf, _mm256_set1_pd(0.0625));
  // r = (t - k/16) / (1 + t*k/16), |r| <= 1/32
  const __m256d r = _mm256_div_pd(_mm256_sub_pd(t, node),
                                  _mm256_fmadd_pd(t, node, one));
  const __m256d r2 = _mm256_mul_pd(r, r);
  // r - r^3/3 + r^5/5 - r^7/7 + r^9/9
  __m256d p = _mm256_set1_pd(1.0 / 9.0);
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-1.0 / 7.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-1.0 / 3.0));
  const __m256d poly = _mm256_fmadd_pd(_mm256_mul_pd(r2, r), p, r);
  const __m256d a = _mm256_add_pd(base, poly);
  return _mm256_blendv_pd(a, _mm256_sub_pd(_mm256_set1_pd(kPiOver2), a), big);
}

// log(m) for m in [2^-1/2, 2^1/2) via 2 atanh((m-1)/(m+1)); |r| <= 0.1716,
// odd polynomial through r^19, truncation ~4e-17 relative.
inline __m256d log_core(__m256d m) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d r =
      _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d r2 = _mm256_mul_pd(r, r);
  __m256d p = _mm256_set1_pd(2.0 / 19.0);
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 17.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 15.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 13.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 11.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 9.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 7.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 5.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0 / 3.0));
  p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.0));
  return _mm256_mul_pd(r, p);
}

const double kLn2Hi = 6.93147180369123816490e-01;  // fdlibm split
const double kLn2Lo = 1.90821492927058770002e-10;
const double kSqrt2 = 1.4142135623730951;

// log1p(y) for y >= 0. Exact-sum compensation keeps small y accurate.
inline __m256d log1p_nonneg(__m256d y) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d u = _mm256_add_pd(one, y);
  // err = (1 + y) - u, exact (Fast2Sum with the larger operand first)
  const __m256d y_ge_1 = _mm256_cmp_pd(y, one, _CMP_GE_OQ);
  const __m256d err_small = _mm256_sub_pd(y, _mm256_sub_pd(u, one));
  const __m256d err_big = _mm256_sub_pd(one, _mm256_sub_pd(u, y));
  const __m256d err = _mm256_blendv_pd(err_small, err_big, y_ge_1);

  // decompose u = 2^e * m with m in [2^-1/2, 2^1/2)
  __m256i bits = _mm256_castpd_si256(u);
  __m256i expo = _mm256_srli_epi64(bits, 52);
  expo = _mm256_sub_epi64(expo, _mm256_set1_epi64x(1023));
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFll);
  const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000ll);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));
  const __m256d m_hi = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrt2), _CMP_GE_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), m_hi);
  expo = _mm256_sub_epi64(
      expo, _mm256_castpd_si256(_mm256_and_pd(
                m_hi, _mm256_castsi256_pd(_mm256_set1_epi64x(-1)))));
  // int64 -> double (values are tiny; via scalar-free trick with magic const)
  const __m256d magic = _mm256_set1_pd(0x0018000000000000p0);  // 2^52 + 2^51
  const __m256d ef = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_add_epi64(expo, _mm256_castpd_si256(magic))),
      magic);

  __m256d res = _mm256_fmadd_pd(ef, _mm256_set1_pd(kLn2Lo), log_core(m));
  res = _mm256_add_pd(res, _mm256_div_pd(err, u));
  return _mm256_fmadd_pd(ef, _mm256_set1_pd(kLn2Hi), res);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i];
  return acc;
}

double sumsq(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i] * a[i];
  return acc;
}

double weighted_sumsq(const double* w, const double* s, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(s + i));
    acc0 = _mm256_fmadd_pd(v, v, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) {
    const double v = w[i] * s[i];
    acc += v * v;
  }
  return acc;
}

double quad_form(const double* a, const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * dot(a + i * n, x, n);
  return acc;
}

void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = dot(a + i * cols, x, cols);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void abs_scale(const double* x, double scale, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(scale);
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7FFFFFFFFFFFFFFFll));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_and_pd(_mm256_loadu_pd(x + i), mask), sv));
  }
  for (; i < n; ++i) out[i] = std::fabs(x[i]) * scale;
}

void rotate(double* x, double* y, double c, double s, std::size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(x + i, _mm256_fmadd_pd(cv, xv, _mm256_mul_pd(sv, yv)));
    _mm256_storeu_pd(y + i, _mm256_fmsub_pd(cv, yv, _mm256_mul_pd(sv, xv)));
  }
  for (; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi + s * yi;
    y[i] = c * yi - s * xi;
  }
}

void imhof_terms(double u, const double* lambda, std::size_t n,
                 double* atan_sum, double* log1p_sum) {
  const __m256d uv = _mm256_set1_pd(u);
  const __m256d qcap = _mm256_set1_pd(4e306);
  __m256d at = _mm256_setzero_pd();
  __m256d lg = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_mul_pd(_mm256_loadu_pd(lambda + i), uv);
    at = _mm256_add_pd(at, atan_nonneg(t));
    lg = _mm256_add_pd(lg, log1p_nonneg(_mm256_min_pd(_mm256_mul_pd(t, t), qcap)));
  }
  double at_s = hsum(at);
  double lg_s = hsum(lg);
  for (; i < n; ++i) {
    const double t = lambda[i] * u;
    at_s += std::atan(t);
    double q = t * t;
    if (q > 4e306) q = 4e306;
    lg_s += std::log1p(q);
  }
  *atan_sum = at_s;
  *log1p_sum = lg_s;
}

}  // namespace entest::kernels::avx2

#endif  // __x86_64__
