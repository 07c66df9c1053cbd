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

#include "entest/rng.hpp"

#include <cmath>

namespace entest::rng {

namespace {

constexpr std::uint64_t kPhiloxM0 = 0xD2E7470EE14C6C93ull;
constexpr std::uint64_t kPhiloxM1 = 0xCA5A826395121157ull;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t* hi,
                    std::uint64_t* lo) {
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  *hi = static_cast<std::uint64_t>(prod >> 64);
  *lo = static_cast<std::uint64_t>(prod);
}

inline void philox_round(std::uint64_t c[4], std::uint64_t k0,
                         std::uint64_t k1) {
  std::uint64_t hi0, lo0, hi1, lo1;
  mulhilo(kPhiloxM0, c[0], &hi0, &lo0);
  mulhilo(kPhiloxM1, c[2], &hi1, &lo1);
  const std::uint64_t r0 = hi1 ^ c[1] ^ k0;
  const std::uint64_t r1 = lo1;
  const std::uint64_t r2 = hi0 ^ c[3] ^ k1;
  const std::uint64_t r3 = lo0;
  c[0] = r0;
  c[1] = r1;
  c[2] = r2;
  c[3] = r3;
}

}  // namespace

void Philox::fill_block() {
  out_[0] = ctr_[0];
  out_[1] = ctr_[1];
  out_[2] = ctr_[2];
  out_[3] = ctr_[3];
  std::uint64_t k0 = key0_;
  std::uint64_t k1 = key1_;
  philox_round(out_, k0, k1);
  for (int r = 1; r < 10; ++r) {
    k0 += kWeyl0;
    k1 += kWeyl1;
    philox_round(out_, k0, k1);
  }
  // 256-bit counter increment
  if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
}

void Philox::next_normal_pair(double* z0, double* z1) {
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 6.283185307179586477 * u2;
  *z0 = radius * std::cos(angle);
  *z1 = radius * std::sin(angle);
}

Philox stream_for(const SeedSpec& seed, std::uint64_t index) {
  const std::uint64_t label_hash = fnv1a64(seed.stream_label);
  return Philox(seed.master_seed, label_hash, index,
                label_hash ^ 0x5851F42D4C957F2Dull);
}

}  // namespace entest::rng
