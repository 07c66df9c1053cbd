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

#ifndef ENTEST_KERNELS_HPP
#define ENTEST_KERNELS_HPP

#include <cstddef>

// Data-parallel inner loops used by the statistical layers. Every kernel has
// a scalar reference implementation and (on x86-64) an AVX2+FMA variant; the
// dispatched function pointers below are bound once at startup to the best
// backend the CPU supports. Setting ENTEST_SIMD=scalar (or =avx2) in the
// environment forces a backend. Backends may differ in the last few ulps
// (different summation trees, FMA contraction); the equivalence tests pin the
// allowed divergence.

namespace entest::kernels {

using DotFn = double (*)(const double* a, const double* b, std::size_t n);
using SumFn = double (*)(const double* a, std::size_t n);
using SumsqFn = double (*)(const double* a, std::size_t n);
using WeightedSumsqFn = double (*)(const double* w, const double* s, std::size_t n);
using QuadFormFn = double (*)(const double* a, const double* x, std::size_t n);
using MatvecFn = void (*)(const double* a, const double* x, double* y,
                          std::size_t rows, std::size_t cols);
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
using AbsScaleFn = void (*)(const double* x, double scale, double* out, std::size_t n);
using RotateFn = void (*)(double* x, double* y, double c, double s, std::size_t n);
using ImhofTermsFn = void (*)(double u, const double* lambda, std::size_t n,
                              double* atan_sum, double* log1p_sum);

extern DotFn dot;                      // sum a[i]*b[i]
extern SumFn sum;                      // sum a[i]
extern SumsqFn sumsq;                  // sum a[i]^2
extern WeightedSumsqFn weighted_sumsq; // sum (w[i]*s[i])^2
extern QuadFormFn quad_form;           // x^T A x, A symmetric row-major n x n
extern MatvecFn matvec;                // y = A x, A row-major rows x cols
extern AxpyFn axpy;                    // y += alpha * x
extern AbsScaleFn abs_scale;           // out[i] = |x[i]| * scale
extern RotateFn rotate;                // {x,y} <- {c*x + s*y, c*y - s*x}
extern ImhofTermsFn imhof_terms;       // sums of atan(l*u) and log1p((l*u)^2)

/// Name of the backend the dispatch table is bound to ("avx2" or "scalar").
const char* active_backend();

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
double weighted_sumsq(const double* w, const double* s, std::size_t n);
double quad_form(const double* a, const double* x, std::size_t n);
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void abs_scale(const double* x, double scale, double* out, std::size_t n);
void rotate(double* x, double* y, double c, double s, std::size_t n);
void imhof_terms(double u, const double* lambda, std::size_t n,
                 double* atan_sum, double* log1p_sum);
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
bool available();  // CPU supports AVX2 and FMA
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sumsq(const double* a, std::size_t n);
double weighted_sumsq(const double* w, const double* s, std::size_t n);
double quad_form(const double* a, const double* x, std::size_t n);
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void abs_scale(const double* x, double scale, double* out, std::size_t n);
void rotate(double* x, double* y, double c, double s, std::size_t n);
void imhof_terms(double u, const double* lambda, std::size_t n,
                 double* atan_sum, double* log1p_sum);
}  // namespace avx2
#endif

}  // namespace entest::kernels

#endif  // ENTEST_KERNELS_HPP
