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

#include "entest/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace entest::kernels {

namespace {

bool use_avx2() {
#if defined(__x86_64__)
  const char* force = std::getenv("ENTEST_SIMD");
  if (force != nullptr) {
    if (std::strcmp(force, "scalar") == 0) return false;
    if (std::strcmp(force, "avx2") == 0) return avx2::available();
  }
  return avx2::available();
#else
  return false;
#endif
}

const bool kUseAvx2 = use_avx2();

}  // namespace

const char* active_backend() { return kUseAvx2 ? "avx2" : "scalar"; }

#if defined(__x86_64__)
#define ENTEST_BIND(name) kUseAvx2 ? avx2::name : scalar::name
#else
#define ENTEST_BIND(name) scalar::name
#endif

DotFn dot = ENTEST_BIND(dot);
SumFn sum = ENTEST_BIND(sum);
SumsqFn sumsq = ENTEST_BIND(sumsq);
WeightedSumsqFn weighted_sumsq = ENTEST_BIND(weighted_sumsq);
QuadFormFn quad_form = ENTEST_BIND(quad_form);
MatvecFn matvec = ENTEST_BIND(matvec);
AxpyFn axpy = ENTEST_BIND(axpy);
AbsScaleFn abs_scale = ENTEST_BIND(abs_scale);
RotateFn rotate = ENTEST_BIND(rotate);
ImhofTermsFn imhof_terms = ENTEST_BIND(imhof_terms);

#undef ENTEST_BIND

}  // namespace entest::kernels
