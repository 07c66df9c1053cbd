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

#ifndef ENTEST_ENSEMBLE_HPP
#define ENTEST_ENSEMBLE_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "entest/acat.hpp"
#include "entest/base_tests.hpp"
#include "entest/linalg.hpp"
#include "entest/rng.hpp"
#include "entest/sampling.hpp"
#include "entest/score_model.hpp"

namespace entest::ensemble {

struct EnsembleConfig {
  rng::SeedSpec seed;
  std::int64_t B_max = 1000;
  std::int64_t block = 100;
  std::int64_t min_B = 300;
  double stability_tol = 0.05;      // max |delta log10 p_en| over last blocks
  double futility_margin = 100.0;   // stop if p_en > margin * target_alpha
  double supersig_margin = 1e-3;    // stop if p_en < margin * target_alpha
  std::optional<double> target_alpha;  // absent: no futility/supersig stops
  sampling::WeightLaw law;
  std::optional<std::size_t> subset_size;  // subset tests; default floor(sqrt(p))
  int threads = 1;

  /// Clamps min_B and block into [1, B_max] and checks the margins.
  EnsembleConfig normalized() const;
};

enum class StopReason { kStable, kFutility, kSuperSignificant, kBMax };
const char* to_string(StopReason r);

struct TestResult {
  double p_value = 1.0;
  double statistic = 0.0;
  std::int64_t B_used = 0;
  StopReason stop_reason = StopReason::kBMax;
  std::vector<std::pair<std::int64_t, double>> path;  // (B, p_en) per block
  std::vector<double> base_p;  // every base p-value actually combined
};

/// Deterministic-per-index source of base-test p-values.
using BasePGenerator = std::function<double(std::uint64_t)>;

/// Evaluates base tests in blocks, recombining after each block, and stops on
/// (in order of precedence) super-significance, futility, stability, or
/// B_max. Block evaluations may run on cfg.threads workers; results are
/// identical for any worker count.
TestResult run_adaptive(const BasePGenerator& gen, const EnsembleConfig& cfg);

/// Per-direction ridge parameter from the eigenvalues of W Sigma W.
using ThetaRule = std::function<double(const std::vector<double>&)>;

TestResult en_burden(const score::ScoreModel& model, const EnsembleConfig& cfg);
TestResult en_skat(const score::ScoreModel& model, const EnsembleConfig& cfg);
TestResult en_morst(const score::ScoreModel& model, const EnsembleConfig& cfg,
                    const ThetaRule& theta_rule = nullptr);
TestResult en_subset_chisq(const std::vector<double>& z,
                           const linalg::Matrix& omega,
                           const EnsembleConfig& cfg);

// ---------------------------------------------------------------------------
// Prepared arms: fixed random components, reusable across many datasets
// ---------------------------------------------------------------------------

/// Piecewise-cubic interpolation of log tail probability against the
/// statistic, built from exact mixture_sf evaluations on a fixed grid.
/// Queries beyond the grid fall back to the exact routine.
class MixtureTailTable {
 public:
  MixtureTailTable() = default;
  explicit MixtureTailTable(const dist::MixtureSpec& spec, int nodes = 128);
  double sf(double x) const;
  bool empty() const { return x_.empty(); }

 private:
  dist::MixtureSpec spec_;
  double du_ = 1.0;            // uniform grid step in u = sqrt(x)
  std::vector<double> x_;      // u-grid nodes
  std::vector<double> logp_;
  std::vector<double> slope_;  // dlogp/du at nodes
};

enum class Family { kBurden, kSkat, kMorst, kSubsetChisq };
const char* to_string(Family f);

/// An ensemble test with its random components (directions or subsets) and
/// their null laws frozen at build time. Evaluating a dataset is then cheap
/// (O(p) or O(p^2) per base test, tabulated mixture tails), which is what the
/// simulation harness leans on for 10^5..10^6-replicate experiments. The
/// frozen components are exactly the draws the one-shot en_* functions would
/// make with the same seed.
class PreparedArm {
 public:
  static PreparedArm build(Family family, const linalg::Matrix& sigma,
                           const EnsembleConfig& cfg,
                           const ThetaRule& theta_rule = nullptr,
                           bool tail_tables = true);

  /// Combined p-value over the first b base tests (no early stopping);
  /// s is the score (or z) vector matching the Sigma the arm was built on.
  acat::Combined evaluate(const double* s, std::int64_t b) const;

  /// Base p-value for a single index (exact null, tabulated tail).
  double base_p(const double* s, std::int64_t i) const;

  std::int64_t size() const { return static_cast<std::int64_t>(dirs_.size()); }
  Family family() const { return family_; }

 private:
  struct Direction {
    std::vector<double> w;            // direction (burden/skat/morst)
    double denom = 1.0;               // burden: sqrt(w^T Sigma w)
    double theta = 0.0;               // morst
    linalg::Matrix chol;              // morst: factor of I + theta W Sigma W
    std::vector<std::uint32_t> idx;   // subset family
    linalg::Matrix sub_chol;          // subset: factor of Omega_J
    int df = 0;
    dist::MixtureSpec mixture;        // skat/morst null
    MixtureTailTable table;
  };

  Family family_ = Family::kBurden;
  std::size_t p_ = 0;
  std::vector<Direction> dirs_;
};

}  // namespace entest::ensemble

#endif  // ENTEST_ENSEMBLE_HPP
