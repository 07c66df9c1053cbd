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

#ifndef ENTEST_SIMHARNESS_HPP
#define ENTEST_SIMHARNESS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "entest/ensemble.hpp"
#include "entest/linalg.hpp"
#include "entest/rng.hpp"

namespace entest::sim {

// ---------------------------------------------------------------------------
// Synthetic data generators
// ---------------------------------------------------------------------------

/// Stand-in for sequenced genotypes: binomial(2, MAF_j) allele counts,
/// correlated across variants through a Gaussian copula, columns centered.
struct GenotypeSpec {
  std::size_t n = 0;
  std::size_t p = 0;
  enum class MafLaw { kUniform, kLogUniform };
  MafLaw maf_law = MafLaw::kUniform;
  double maf_lo = 0.01;
  double maf_hi = 0.5;
  enum class Correlation { kIndependent, kExchangeable, kAutoregressive, kBlock };
  Correlation correlation = Correlation::kIndependent;
  double rho = 0.0;
  std::vector<std::size_t> block_sizes;
};

struct GenotypePanel {
  linalg::Matrix g;           // n x p centered allele counts
  std::vector<double> mafs;   // the drawn MAF spectrum
};

GenotypePanel gen_genotypes(const GenotypeSpec& spec, rng::Philox& stream);

/// Beta-density auxiliary weights a_j = MAF^(c1-1) (1-MAF)^(c2-1) / B(c1,c2);
/// c1=c2=1 means no prior information.
std::vector<double> beta_weights(const std::vector<double>& mafs, double c1,
                                 double c2);

enum class EffectLaw { kConstant, kMafLog };  // |b_j| = b0, or b0 |log10 MAF_j|
enum class SignLaw { kSame, kRandom };

struct SignalLaw {
  double proportion = 0.2;  // fraction of nonzero coefficients
  EffectLaw effect = EffectLaw::kConstant;
  SignLaw sign = SignLaw::kSame;
};

/// Coefficient vector with round(proportion*p) nonzero entries on a uniform
/// random support.
std::vector<double> effect_vector(const SignalLaw& law, double beta0,
                                  const std::vector<double>& mafs,
                                  rng::Philox& stream);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentSpec {
  enum class Kind { kType1, kPower, kPath, kVariability };
  Kind kind = Kind::kType1;
  std::uint64_t seed = 1;
  std::size_t replicates = 1000;
  std::vector<double> alphas{0.05};
  std::vector<std::string> tests{"en-burden"};
  std::vector<std::string> weights{"flat"};  // "flat" | "beta:c1,c2"

  enum class Source { kGenotypes, kDirect, kSparseNormal };
  Source source = Source::kDirect;

  // genotype models
  GenotypeSpec genotypes;
  bool covariates = true;     // the two-covariate response model
  std::size_t panels = 1;     // independent genotype panels

  // direct score models: S ~ N(sqrt(n) Sigma beta, Sigma)
  std::size_t direct_p = 50;
  double direct_rho = 0.0;    // exchangeable Sigma
  std::vector<std::size_t> n_grid{10000};

  // sparse normal models: Z ~ N(mu, I)
  std::size_t sparse_p = 100;
  std::vector<std::size_t> m_grid{1};  // signal counts
  double mu0 = 1.0;

  // signals (power/variability kinds)
  SignalLaw signal;
  std::vector<double> beta0_grid;  // genotype power grids
  double strength = 0.0;           // direct-model ||beta||
  std::size_t alternatives = 0;    // variability: number of random w_beta

  struct AutoTune {
    std::string test = "en-subset-chisq";
    std::string weights = "flat";
    double target = 0.6;
    double alpha = 0.05;
    std::size_t replicates = 400;
  };
  std::optional<AutoTune> auto_tune;

  ensemble::EnsembleConfig ens;  // seed field is derived from `seed`
  int tail_table_nodes = 128;
  std::size_t mc_critical_replicates = 100000;
  int threads = 0;  // 0: parallel::default_threads()

  static ExperimentSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct ExperimentTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  nlohmann::json meta;

  /// Writes <prefix>.tsv and <prefix>.meta.json.
  void write(const std::string& prefix) const;
  std::string tsv() const;
};

ExperimentTable run_type1(const ExperimentSpec& spec);
ExperimentTable run_power(const ExperimentSpec& spec);
ExperimentTable run_path(const ExperimentSpec& spec);
ExperimentTable run_variability(const ExperimentSpec& spec);
ExperimentTable run(const ExperimentSpec& spec);

}  // namespace entest::sim

#endif  // ENTEST_SIMHARNESS_HPP
