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

#include "entest/acat.hpp"

#include <cmath>
#include <stdexcept>

#include "entest/dist.hpp"

namespace entest::acat {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

double transform_p(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("transform_p: p must lie strictly in (0,1)");
  }
  if (p < 1e-8) {
    // cot(pi p); the floor keeps sums of up to ~1e8 transformed values
    // representable.
    const double q = p < 3.3e-300 ? 3.3e-300 : p;
    return 1.0 / std::tan(kPi * q);
  }
  if (p > 1.0 - 1e-8) return -1.0 / ((1.0 - p) * kPi);
  return std::tan((0.5 - p) * kPi);
}

void RunningCombine::add(double p) {
  const double v = transform_p(p);
  const double t = sum_ + v;
  if (std::fabs(sum_) >= std::fabs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
  ++count_;
}

Combined RunningCombine::current() const {
  if (count_ == 0) {
    throw std::domain_error("combine: need at least one p-value");
  }
  Combined out;
  out.statistic = (sum_ + comp_) / static_cast<double>(count_);
  out.p_value = dist::cauchy_sf(out.statistic);
  return out;
}

Combined combine(const double* p_values, std::size_t n) {
  if (n == 0) throw std::domain_error("combine: need at least one p-value");
  RunningCombine rc;
  for (std::size_t i = 0; i < n; ++i) rc.add(p_values[i]);
  return rc.current();
}

Combined combine(const std::vector<double>& p_values) {
  return combine(p_values.data(), p_values.size());
}

}  // namespace entest::acat
