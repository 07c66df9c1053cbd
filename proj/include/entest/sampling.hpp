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

#ifndef ENTEST_SAMPLING_HPP
#define ENTEST_SAMPLING_HPP

#include <cstdint>
#include <vector>

#include "entest/rng.hpp"

namespace entest::sampling {

/// How the random direction for a base test is drawn. The uniform law puts
/// mass evenly on the unit sphere restricted to the nonnegative orthant; the
/// auxiliary law scales coordinate j of the underlying Gaussian by aux[j]
/// before taking absolute values and normalizing, so E[w_j]/E[w_k] equals
/// aux[j]/aux[k].
struct WeightLaw {
  enum class Kind { kUniformPositiveSphere, kAuxiliaryWeightedSphere };
  Kind kind = Kind::kUniformPositiveSphere;
  std::vector<double> aux;  // required (length p, all > 0) for the aux law

  static WeightLaw uniform() { return WeightLaw{}; }
  static WeightLaw auxiliary(std::vector<double> a);
};

/// Unit vector with nonnegative entries, drawn from `law` on the stream for
/// base-test index i. Throws DegenerateDrawError after 100 all-zero draws.
std::vector<double> sample_positive_direction(std::size_t p, const WeightLaw& law,
                                              const rng::SeedSpec& seed,
                                              std::uint64_t i);

/// Same, writing into a caller-provided buffer (hot path).
void sample_positive_direction(std::size_t p, const WeightLaw& law,
                               rng::Philox& stream, double* w);

/// s distinct indices in [0, p), uniform without replacement, sorted.
std::vector<std::uint32_t> sample_subset(std::size_t p, std::size_t s,
                                         const rng::SeedSpec& seed,
                                         std::uint64_t i);

void sample_subset(std::size_t p, std::size_t s, rng::Philox& stream,
                   std::vector<std::uint32_t>* out);

}  // namespace entest::sampling

#endif  // ENTEST_SAMPLING_HPP
