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

#include "entest/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "entest/errors.hpp"
#include "entest/kernels.hpp"

namespace entest::sampling {

WeightLaw WeightLaw::auxiliary(std::vector<double> a) {
  WeightLaw law;
  law.kind = Kind::kAuxiliaryWeightedSphere;
  law.aux = std::move(a);
  return law;
}

namespace {

void check_law(std::size_t p, const WeightLaw& law) {
  if (p == 0) throw std::domain_error("direction dimension must be >= 1");
  if (law.kind == WeightLaw::Kind::kAuxiliaryWeightedSphere) {
    if (law.aux.size() != p) {
      throw ConfigError("auxiliary weight law needs one positive entry per "
                        "coordinate (got " + std::to_string(law.aux.size()) +
                        " for p=" + std::to_string(p) + ")");
    }
    for (const double a : law.aux) {
      if (!(a > 0.0) || !std::isfinite(a)) {
        throw ConfigError("auxiliary weights must be finite and > 0");
      }
    }
  }
}

}  // namespace

void sample_positive_direction(std::size_t p, const WeightLaw& law,
                               rng::Philox& stream, double* w) {
  if (p == 1) {
    w[0] = 1.0;
    return;
  }
  const bool aux = law.kind == WeightLaw::Kind::kAuxiliaryWeightedSphere;
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::size_t j = 0;
    while (j + 2 <= p) {
      stream.next_normal_pair(&w[j], &w[j + 1]);
      j += 2;
    }
    if (j < p) w[j] = stream.next_normal();
    if (aux) {
      for (std::size_t k = 0; k < p; ++k) w[k] *= law.aux[k];
    }
    const double nrm2 = kernels::sumsq(w, p);
    if (nrm2 > 0.0 && std::isfinite(nrm2)) {
      kernels::abs_scale(w, 1.0 / std::sqrt(nrm2), w, p);
      return;
    }
  }
  throw DegenerateDrawError("direction draw degenerate after 100 attempts");
}

std::vector<double> sample_positive_direction(std::size_t p, const WeightLaw& law,
                                              const rng::SeedSpec& seed,
                                              std::uint64_t i) {
  check_law(p, law);
  std::vector<double> w(p);
  rng::Philox stream = rng::stream_for(seed, i);
  sample_positive_direction(p, law, stream, w.data());
  return w;
}

void sample_subset(std::size_t p, std::size_t s, rng::Philox& stream,
                   std::vector<std::uint32_t>* out) {
  // Partial Fisher-Yates over 0..p-1; sorted so downstream submatrix
  // extraction is canonical.
  out->resize(p);
  std::iota(out->begin(), out->end(), 0u);
  for (std::size_t k = 0; k < s; ++k) {
    const std::size_t j = k + stream.next_below(p - k);
    std::swap((*out)[k], (*out)[j]);
  }
  out->resize(s);
  std::sort(out->begin(), out->end());
}

std::vector<std::uint32_t> sample_subset(std::size_t p, std::size_t s,
                                         const rng::SeedSpec& seed,
                                         std::uint64_t i) {
  if (s < 1 || s > p) {
    throw std::domain_error("subset size must satisfy 1 <= s <= p");
  }
  std::vector<std::uint32_t> idx;
  rng::Philox stream = rng::stream_for(seed, i);
  sample_subset(p, s, stream, &idx);
  return idx;
}

}  // namespace entest::sampling
