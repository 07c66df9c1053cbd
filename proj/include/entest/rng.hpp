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

#ifndef ENTEST_RNG_HPP
#define ENTEST_RNG_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace entest::rng {

// Philox4x64-10 counter-based generator (Salmon et al., SC'11). The stream
// for a given (master_seed, label, index) is a pure function of those three
// values, so draws are reproducible for any worker count and any evaluation
// order. Output matches the reference Philox4x64-10 test vectors.

struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::string stream_label;
};

/// FNV-1a 64-bit hash, used to fold stream labels into Philox keys and to
/// fingerprint configs and calibration tables.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

class Philox {
 public:
  Philox(std::uint64_t key0, std::uint64_t key1, std::uint64_t ctr2,
         std::uint64_t ctr3)
      : key0_(key0), key1_(key1) {
    ctr_[0] = 0;
    ctr_[1] = 0;
    ctr_[2] = ctr2;
    ctr_[3] = ctr3;
  }

  std::uint64_t next_u64() {
    if (have_ == 0) {
      fill_block();
      have_ = 4;
    }
    return out_[4 - have_--];
  }

  /// Uniform double in (0, 1): 53 random bits shifted off the center of the
  /// unit interval so 0 and 1 are unreachable.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  /// Uniform integer in [0, bound) by rejection; bound >= 1.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  /// Standard normal pair via Box-Muller (fixed consumption of two uniforms).
  void next_normal_pair(double* z0, double* z1);

  double next_normal() {
    if (have_normal_) {
      have_normal_ = false;
      return spare_normal_;
    }
    double a = 0.0;
    double b = 0.0;
    next_normal_pair(&a, &b);
    spare_normal_ = b;
    have_normal_ = true;
    return a;
  }

 private:
  void fill_block();

  std::uint64_t key0_;
  std::uint64_t key1_;
  std::uint64_t ctr_[4];
  std::uint64_t out_[4] = {0, 0, 0, 0};
  int have_ = 0;
  double spare_normal_ = 0.0;
  bool have_normal_ = false;
};

/// Deterministic per-index stream: key = (master_seed, fnv1a(label)),
/// counter block = (0, 0, index, label-salt). Distinct (seed, label, index)
/// triples give statistically independent streams.
Philox stream_for(const SeedSpec& seed, std::uint64_t index);

}  // namespace entest::rng

#endif  // ENTEST_RNG_HPP
