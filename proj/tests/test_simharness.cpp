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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "entest/errors.hpp"
#include "entest/rng.hpp"
#include "entest/simharness.hpp"

using namespace entest;

TEST_CASE("gen_genotypes: binomial moments, centering, performance") {
  sim::GenotypeSpec spec;
  spec.n = 4000;
  spec.p = 30;
  spec.maf_lo = spec.maf_hi = 0.5;
  spec.correlation = sim::GenotypeSpec::Correlation::kIndependent;
  rng::Philox stream = rng::stream_for({11, "g"}, 0);
  const auto panel = sim::gen_genotypes(spec, stream);
  REQUIRE(panel.g.rows() == 4000);
  REQUIRE(panel.g.cols() == 30);
  for (std::size_t j = 0; j < 30; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < 4000; ++i) mean += panel.g(i, j);
    mean /= 4000;
    CHECK(std::fabs(mean) < 1e-12);  // centered exactly
    for (std::size_t i = 0; i < 4000; ++i) {
      var += panel.g(i, j) * panel.g(i, j);
    }
    var /= 4000;
    // binomial(2, 1/2) variance = 0.5; 3 MC SEs
    const double se = 0.5 * std::sqrt(2.0 / 4000.0);
    CHECK(std::fabs(var - 0.5) < 3.0 * se);
  }

  // n=1e4, p=100 under one second
  sim::GenotypeSpec big;
  big.n = 10000;
  big.p = 100;
  big.maf_law = sim::GenotypeSpec::MafLaw::kLogUniform;
  big.maf_lo = 0.001;
  big.maf_hi = 0.05;
  big.correlation = sim::GenotypeSpec::Correlation::kExchangeable;
  big.rho = 0.3;
  rng::Philox s2 = rng::stream_for({12, "g"}, 0);
  const auto t0 = std::chrono::steady_clock::now();
  const auto bp = sim::gen_genotypes(big, s2);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs < 1.0);
  CHECK(bp.mafs.size() == 100);
  for (const double m : bp.mafs) {
    CHECK(m >= 0.001);
    CHECK(m <= 0.05);
  }
}

TEST_CASE("gen_genotypes exchangeable copula induces the right correlation") {
  // compare genotype-count correlations against an independent oracle that
  // simulates the identical copula with the standard library generator
  sim::GenotypeSpec spec;
  spec.n = 60000;
  spec.p = 2;
  spec.maf_lo = spec.maf_hi = 0.3;
  spec.correlation = sim::GenotypeSpec::Correlation::kExchangeable;
  spec.rho = 0.5;
  rng::Philox stream = rng::stream_for({13, "g"}, 0);
  const auto panel = sim::gen_genotypes(spec, stream);
  auto corr_of = [](const linalg::Matrix& g) {
    const std::size_t n = g.rows();
    double c = 0.0, v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c += g(i, 0) * g(i, 1);
      v0 += g(i, 0) * g(i, 0);
      v1 += g(i, 1) * g(i, 1);
    }
    return c / std::sqrt(v0 * v1);
  };
  const double got = corr_of(panel.g);

  std::mt19937_64 gen(5150);
  std::normal_distribution<double> nd;
  const double m = 0.3;
  const double q0 = (1 - m) * (1 - m);
  const double t0 = dist::normal_quantile(q0);
  const double t1 = dist::normal_quantile(q0 + 2 * m * (1 - m));
  const std::size_t n = 200000;
  std::vector<double> a(n), b(n);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = nd(gen);
    const double x0 = std::sqrt(0.5) * f + std::sqrt(0.5) * nd(gen);
    const double x1 = std::sqrt(0.5) * f + std::sqrt(0.5) * nd(gen);
    a[i] = x0 > t1 ? 2.0 : (x0 > t0 ? 1.0 : 0.0);
    b[i] = x1 > t1 ? 2.0 : (x1 > t0 ? 1.0 : 0.0);
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double c = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  const double want = c / std::sqrt(va * vb);
  // both are correlation estimates; combined SE ~ sqrt(1/60000 + 1/200000)
  CHECK(std::fabs(got - want) < 3.0 * std::sqrt(1.0 / 60000 + 1.0 / 200000));
}

TEST_CASE("beta_weights: flat case, frozen density value, boundary") {
  const std::vector<double> mafs = {0.1, 0.25, 0.4};
  const auto flat = sim::beta_weights(mafs, 1.0, 1.0);
  for (const double v : flat) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  // 25 * 0.99^24, frozen from a 60-digit evaluation
  const auto w = sim::beta_weights({0.01}, 1.0, 25.0);
  CHECK(w[0] == doctest::Approx(19.641953520180474).epsilon(1e-10));
  CHECK_THROWS_AS(sim::beta_weights({0.0}, 1.0, 25.0), std::domain_error);
  CHECK_THROWS_AS(sim::beta_weights({1.0}, 1.0, 25.0), std::domain_error);
}

TEST_CASE("effect_vector: support size, laws, signs") {
  std::vector<double> mafs(100);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ud(0.001, 0.05);
  for (double& m : mafs) m = ud(gen);

  sim::SignalLaw law;
  law.proportion = 0.2;
  law.effect = sim::EffectLaw::kConstant;
  law.sign = sim::SignLaw::kSame;
  rng::Philox stream = rng::stream_for({21, "fx"}, 0);
  const auto beta = sim::effect_vector(law, 0.3, mafs, stream);
  int nonzero = 0;
  for (const double b : beta) {
    if (b != 0.0) {
      ++nonzero;
      CHECK(b == doctest::Approx(0.3).epsilon(1e-12));  // same sign, constant
    }
  }
  CHECK(nonzero == 20);

  law.effect = sim::EffectLaw::kMafLog;
  law.sign = sim::SignLaw::kRandom;
  rng::Philox s2 = rng::stream_for({21, "fx"}, 1);
  const auto beta2 = sim::effect_vector(law, 0.1, mafs, s2);
  bool saw_negative = false;
  for (std::size_t j = 0; j < beta2.size(); ++j) {
    if (beta2[j] != 0.0) {
      CHECK(std::fabs(beta2[j]) ==
            doctest::Approx(0.1 * std::fabs(std::log10(mafs[j]))).epsilon(1e-12));
      saw_negative = saw_negative || beta2[j] < 0.0;
    }
  }
  CHECK(saw_negative);
}

TEST_CASE("experiment spec: JSON round trip and validation errors") {
  nlohmann::json j = {
      {"kind", "type1"},
      {"seed", 99},
      {"replicates", 20000},
      {"alphas", {0.05, 0.01}},
      {"tests", {"en-burden", "burden"}},
      {"weights", {"flat"}},
      {"model",
       {{"source", "genotypes"}, {"n", 500}, {"p", 16},
        {"maf_law", "log-uniform"}, {"maf_lo", 0.01}, {"maf_hi", 0.2},
        {"correlation", "exchangeable"}, {"rho", 0.3}, {"panels", 2}}},
      {"ensemble", {{"B_max", 50}, {"block", 50}, {"min_B", 50}}}};
  const auto spec = sim::ExperimentSpec::from_json(j);
  CHECK(spec.kind == sim::ExperimentSpec::Kind::kType1);
  CHECK(spec.panels == 2);
  CHECK(spec.genotypes.p == 16);
  const auto round = sim::ExperimentSpec::from_json(spec.to_json());
  CHECK(round.to_json().dump() == spec.to_json().dump());

  nlohmann::json bad = j;
  bad["alphas"] = {2.0};
  CHECK_THROWS_AS(sim::ExperimentSpec::from_json(bad), ConfigError);
  bad = j;
  bad["model"]["correlation"] = "nope";
  CHECK_THROWS_AS(sim::ExperimentSpec::from_json(bad), ConfigError);
  bad = j;
  bad.erase("kind");
  CHECK_THROWS_AS(sim::ExperimentSpec::from_json(bad), ConfigError);
}

TEST_CASE("run_type1: exact tests sit at nominal level; reruns reproduce") {
  sim::ExperimentSpec spec;
  spec.kind = sim::ExperimentSpec::Kind::kType1;
  spec.seed = 321;
  spec.replicates = 40000;
  spec.alphas = {0.05, 0.01};
  spec.tests = {"burden", "chisq"};
  spec.weights = {"flat"};
  spec.source = sim::ExperimentSpec::Source::kDirect;
  spec.direct_p = 10;
  spec.direct_rho = 0.3;
  spec.threads = 2;

  const auto table = sim::run_type1(spec);
  REQUIRE(table.rows.size() == 4);
  for (const auto& row : table.rows) {
    const double alpha = std::stod(row[2]);
    const double est = std::stod(row[3]);
    const double se = std::sqrt(alpha * (1 - alpha) / spec.replicates);
    CHECK(std::fabs(est - alpha) < 3.0 * se);
  }
  const auto again = sim::run_type1(spec);
  CHECK(again.tsv() == table.tsv());  // bit-for-bit reproducible

  sim::ExperimentSpec bad = spec;
  bad.alphas = {1e-4};
  bad.replicates = 1000;
  CHECK_THROWS_AS(sim::run_type1(bad), ConfigError);
}

TEST_CASE("run_type1 on a small genotype pipeline stays near nominal") {
  sim::ExperimentSpec spec;
  spec.kind = sim::ExperimentSpec::Kind::kType1;
  spec.seed = 8;
  spec.replicates = 20000;
  spec.alphas = {0.01};
  spec.tests = {"en-burden"};
  spec.weights = {"flat"};
  spec.source = sim::ExperimentSpec::Source::kGenotypes;
  spec.genotypes.n = 400;
  spec.genotypes.p = 24;
  spec.genotypes.maf_law = sim::GenotypeSpec::MafLaw::kUniform;
  spec.genotypes.maf_lo = 0.05;
  spec.genotypes.maf_hi = 0.4;
  spec.genotypes.correlation = sim::GenotypeSpec::Correlation::kExchangeable;
  spec.genotypes.rho = 0.3;
  spec.covariates = true;
  spec.panels = 2;
  spec.ens.B_max = 60;
  spec.ens.block = 60;
  spec.ens.min_B = 60;
  spec.threads = 2;

  const auto table = sim::run_type1(spec);
  const double est = std::stod(table.rows[0][3]);
  // the Cauchy combination runs mildly inflated at alpha = 1e-2 (paper-
  // consistent); accept [0.8e-2, 1.6e-2]
  CHECK(est > 0.008);
  CHECK(est < 0.016);
}

TEST_CASE("run_path: futility stops dominate null screens") {
  sim::ExperimentSpec spec;
  spec.kind = sim::ExperimentSpec::Kind::kPath;
  spec.seed = 77;
  spec.replicates = 100;
  spec.tests = {"en-burden"};
  spec.source = sim::ExperimentSpec::Source::kDirect;
  spec.direct_p = 20;
  spec.direct_rho = 0.1;
  spec.strength = 0.0;  // null
  spec.ens.B_max = 1000;
  spec.ens.block = 100;
  spec.ens.min_B = 300;
  spec.ens.target_alpha = 1e-8;
  spec.threads = 2;

  const auto table = sim::run_path(spec);
  int futility = 0;
  std::set<std::string> reps_seen;
  for (const auto& row : table.rows) {
    if (reps_seen.insert(row[0]).second && row[4] == "futility") ++futility;
  }
  CHECK(futility >= 95);

  // strong-signal replicates stop super-significant at the first check
  sim::ExperimentSpec sig = spec;
  sig.strength = 3.0;
  sig.n_grid = {10000};
  sig.replicates = 100;
  const auto table2 = sim::run_path(sig);
  int supersig_first = 0;
  for (const auto& row : table2.rows) {
    if (row[1] == "100" && row[4] == "super-significant") ++supersig_first;
  }
  CHECK(supersig_first >= 95);
}

TEST_CASE("run_variability: ensemble mean power above the single base test") {
  sim::ExperimentSpec spec;
  spec.kind = sim::ExperimentSpec::Kind::kVariability;
  spec.seed = 5;
  spec.replicates = 60;   // inner replicates per alternative
  spec.alternatives = 40;
  spec.alphas = {1e-4};
  spec.source = sim::ExperimentSpec::Source::kDirect;
  spec.direct_p = 50;
  spec.direct_rho = -0.018;
  spec.strength = 0.3;
  spec.n_grid = {4000};
  spec.ens.B_max = 200;
  spec.threads = 2;

  const auto table = sim::run_variability(spec);
  REQUIRE(table.rows.size() == 40);
  double base_mean = 0.0, en_mean = 0.0;
  for (const auto& row : table.rows) {
    base_mean += std::stod(row[1]);
    en_mean += std::stod(row[2]);
  }
  CHECK(en_mean > base_mean);
}

TEST_CASE("run_power: auto-tune hits the target and power is monotone") {
  sim::ExperimentSpec spec;
  spec.kind = sim::ExperimentSpec::Kind::kPower;
  spec.seed = 13;
  spec.replicates = 600;
  spec.alphas = {0.05};
  spec.tests = {"en-subset-chisq", "chisq"};
  spec.weights = {"flat"};
  spec.source = sim::ExperimentSpec::Source::kSparseNormal;
  spec.sparse_p = 36;
  spec.m_grid = {2, 6};
  spec.mu0 = 1.2;
  spec.ens.B_max = 150;
  spec.ens.subset_size = 6;
  spec.mc_critical_replicates = 20000;
  sim::ExperimentSpec::AutoTune tune;
  tune.test = "en-subset-chisq";
  tune.target = 0.6;
  tune.alpha = 0.05;
  tune.replicates = 300;
  spec.auto_tune = tune;
  spec.threads = 2;

  const auto table = sim::run_power(spec);
  // rows: grid x tests x alphas
  REQUIRE(table.rows.size() == 4);
  for (const auto& row : table.rows) {
    if (row[2] == "en-subset-chisq") {
      const double power = std::stod(row[6]);
      CHECK(power > 0.4);
      CHECK(power < 0.8);
      CHECK(row[5] == "mc");
    }
  }
  CHECK(table.meta.contains("tuned_effects"));
}
