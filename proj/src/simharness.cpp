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

#include "entest/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "entest/dist.hpp"
#include "entest/errors.hpp"
#include "entest/io.hpp"
#include "entest/kernels.hpp"
#include "entest/parallel.hpp"
#include "entest/reference_tests.hpp"
#include "entest/sampling.hpp"
#include "entest/score_model.hpp"

namespace entest::sim {

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

GenotypePanel gen_genotypes(const GenotypeSpec& spec, rng::Philox& stream) {
  const std::size_t n = spec.n;
  const std::size_t p = spec.p;
  if (n == 0 || p == 0) throw ConfigError("genotype spec needs n >= 1, p >= 1");
  if (!(spec.maf_lo > 0.0 && spec.maf_hi <= 0.5 && spec.maf_lo <= spec.maf_hi)) {
    throw ConfigError("MAF range must satisfy 0 < lo <= hi <= 0.5");
  }

  GenotypePanel panel;
  panel.mafs.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double u = stream.next_unit();
    if (spec.maf_law == GenotypeSpec::MafLaw::kUniform) {
      panel.mafs[j] = spec.maf_lo + u * (spec.maf_hi - spec.maf_lo);
    } else {
      panel.mafs[j] =
          std::exp(std::log(spec.maf_lo) +
                   u * (std::log(spec.maf_hi) - std::log(spec.maf_lo)));
    }
  }

  // Latent Gaussian factor for the copula.
  linalg::Matrix latent_chol;
  const bool needs_chol =
      spec.correlation == GenotypeSpec::Correlation::kExchangeable ||
      spec.correlation == GenotypeSpec::Correlation::kBlock;
  if (needs_chol) {
    linalg::Matrix c(p, p, 0.0);
    if (spec.correlation == GenotypeSpec::Correlation::kExchangeable) {
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) c(i, j) = i == j ? 1.0 : spec.rho;
      }
    } else {
      std::size_t at = 0;
      for (const std::size_t bs : spec.block_sizes) {
        for (std::size_t i = at; i < at + bs && i < p; ++i) {
          for (std::size_t j = at; j < at + bs && j < p; ++j) {
            c(i, j) = i == j ? 1.0 : spec.rho;
          }
        }
        at += bs;
      }
      for (std::size_t i = at; i < p; ++i) c(i, i) = 1.0;
    }
    try {
      latent_chol = linalg::cholesky(c);
    } catch (const DataError&) {
      throw ConfigError("latent correlation matrix is not positive definite");
    }
  }
  if (spec.correlation == GenotypeSpec::Correlation::kAutoregressive &&
      !(std::fabs(spec.rho) < 1.0)) {
    throw ConfigError("autoregressive correlation needs |rho| < 1");
  }

  // Per-column binomial(2, maf) thresholds on the latent scale.
  std::vector<double> t0(p), t1(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double m = panel.mafs[j];
    const double q0 = (1.0 - m) * (1.0 - m);
    t0[j] = dist::normal_quantile(q0);
    t1[j] = dist::normal_quantile(std::min(1.0 - 1e-16, q0 + 2.0 * m * (1.0 - m)));
  }

  panel.g = linalg::Matrix(n, p);
  std::vector<double> z(p), x(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) z[j] = stream.next_normal();
    switch (spec.correlation) {
      case GenotypeSpec::Correlation::kIndependent:
        x = z;
        break;
      case GenotypeSpec::Correlation::kAutoregressive: {
        const double a = spec.rho;
        const double b = std::sqrt(1.0 - a * a);
        x[0] = z[0];
        for (std::size_t j = 1; j < p; ++j) x[j] = a * x[j - 1] + b * z[j];
        break;
      }
      default:
        for (std::size_t j = 0; j < p; ++j) {
          x[j] = kernels::dot(latent_chol.row(j), z.data(), j + 1);
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
      panel.g(i, j) = x[j] > t1[j] ? 2.0 : (x[j] > t0[j] ? 1.0 : 0.0);
    }
  }
  // center columns
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += panel.g(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) panel.g(i, j) -= mean;
  }
  return panel;
}

std::vector<double> beta_weights(const std::vector<double>& mafs, double c1,
                                 double c2) {
  if (!(c1 > 0.0 && c2 > 0.0)) {
    throw std::domain_error("beta weights need c1, c2 > 0");
  }
  const double log_beta =
      std::lgamma(c1) + std::lgamma(c2) - std::lgamma(c1 + c2);
  std::vector<double> a(mafs.size());
  for (std::size_t j = 0; j < mafs.size(); ++j) {
    const double m = mafs[j];
    if (!(m > 0.0 && m < 1.0)) {
      throw std::domain_error("MAF must lie strictly in (0,1)");
    }
    a[j] = std::exp((c1 - 1.0) * std::log(m) + (c2 - 1.0) * std::log1p(-m) -
                    log_beta);
  }
  return a;
}

std::vector<double> effect_vector(const SignalLaw& law, double beta0,
                                  const std::vector<double>& mafs,
                                  rng::Philox& stream) {
  const std::size_t p = mafs.size();
  const std::size_t k = static_cast<std::size_t>(
      std::lround(law.proportion * static_cast<double>(p)));
  std::vector<double> beta(p, 0.0);
  if (k == 0) return beta;
  std::vector<std::uint32_t> support;
  sampling::sample_subset(p, std::min(k, p), stream, &support);
  for (const std::uint32_t j : support) {
    double mag = beta0;
    if (law.effect == EffectLaw::kMafLog) {
      mag = beta0 * std::fabs(std::log10(mafs[j]));
    }
    double sign = 1.0;
    if (law.sign == SignLaw::kRandom) {
      sign = (stream.next_u64() & 1u) ? 1.0 : -1.0;
    }
    beta[j] = sign * mag;
  }
  return beta;
}

// ---------------------------------------------------------------------------
// Spec <-> JSON
// ---------------------------------------------------------------------------

namespace {

ExperimentSpec::Kind kind_from_string(const std::string& s) {
  if (s == "type1") return ExperimentSpec::Kind::kType1;
  if (s == "power") return ExperimentSpec::Kind::kPower;
  if (s == "path") return ExperimentSpec::Kind::kPath;
  if (s == "variability") return ExperimentSpec::Kind::kVariability;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

std::string kind_to_string(ExperimentSpec::Kind k) {
  switch (k) {
    case ExperimentSpec::Kind::kType1: return "type1";
    case ExperimentSpec::Kind::kPower: return "power";
    case ExperimentSpec::Kind::kPath: return "path";
    case ExperimentSpec::Kind::kVariability: return "variability";
  }
  return "?";
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  if (!j.contains("kind")) throw ConfigError("experiment spec needs 'kind'");
  s.kind = kind_from_string(j.at("kind").get<std::string>());
  s.seed = get_or<std::uint64_t>(j, "seed", 1);
  s.replicates = get_or<std::size_t>(j, "replicates", 1000);
  s.alphas = get_or<std::vector<double>>(j, "alphas", {0.05});
  s.tests = get_or<std::vector<std::string>>(j, "tests", {"en-burden"});
  s.weights = get_or<std::vector<std::string>>(j, "weights", {"flat"});
  s.threads = get_or<int>(j, "threads", 0);
  s.tail_table_nodes = get_or<int>(j, "tail_table_nodes", 128);
  s.mc_critical_replicates =
      get_or<std::size_t>(j, "mc_critical_replicates", 100000);

  if (s.replicates < 100) throw ConfigError("replication count must be >= 100");
  for (const double a : s.alphas) {
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie in (0,1)");
  }

  const nlohmann::json model = j.value("model", nlohmann::json::object());
  const std::string source = get_or<std::string>(model, "source", "direct");
  if (source == "genotypes") {
    s.source = Source::kGenotypes;
    s.genotypes.n = get_or<std::size_t>(model, "n", 2000);
    s.genotypes.p = get_or<std::size_t>(model, "p", 100);
    const std::string ml = get_or<std::string>(model, "maf_law", "uniform");
    if (ml == "uniform") {
      s.genotypes.maf_law = GenotypeSpec::MafLaw::kUniform;
    } else if (ml == "log-uniform") {
      s.genotypes.maf_law = GenotypeSpec::MafLaw::kLogUniform;
    } else {
      throw ConfigError("unknown maf_law '" + ml + "'");
    }
    s.genotypes.maf_lo = get_or<double>(model, "maf_lo", 0.01);
    s.genotypes.maf_hi = get_or<double>(model, "maf_hi", 0.5);
    const std::string corr = get_or<std::string>(model, "correlation", "independent");
    if (corr == "independent") {
      s.genotypes.correlation = GenotypeSpec::Correlation::kIndependent;
    } else if (corr == "exchangeable") {
      s.genotypes.correlation = GenotypeSpec::Correlation::kExchangeable;
    } else if (corr == "autoregressive") {
      s.genotypes.correlation = GenotypeSpec::Correlation::kAutoregressive;
    } else if (corr == "block") {
      s.genotypes.correlation = GenotypeSpec::Correlation::kBlock;
    } else {
      throw ConfigError("unknown correlation '" + corr + "'");
    }
    s.genotypes.rho = get_or<double>(model, "rho", 0.0);
    s.genotypes.block_sizes =
        get_or<std::vector<std::size_t>>(model, "block_sizes", {});
    s.covariates = get_or<bool>(model, "covariates", true);
    s.panels = get_or<std::size_t>(model, "panels", 1);
    if (s.panels < 1 || s.panels > s.replicates) {
      throw ConfigError("panels must lie in [1, replicates]");
    }
  } else if (source == "direct") {
    s.source = Source::kDirect;
    s.direct_p = get_or<std::size_t>(model, "p", 50);
    s.direct_rho = get_or<double>(model, "rho", 0.0);
    s.n_grid = get_or<std::vector<std::size_t>>(model, "n_grid", {10000});
  } else if (source == "sparse-normal") {
    s.source = Source::kSparseNormal;
    s.sparse_p = get_or<std::size_t>(model, "p", 100);
  } else {
    throw ConfigError("unknown model source '" + source + "'");
  }

  const nlohmann::json sig = j.value("signal", nlohmann::json::object());
  s.signal.proportion = get_or<double>(sig, "proportion", 0.2);
  const std::string el = get_or<std::string>(sig, "effect_law", "constant");
  if (el == "constant") {
    s.signal.effect = EffectLaw::kConstant;
  } else if (el == "maf-log") {
    s.signal.effect = EffectLaw::kMafLog;
  } else {
    throw ConfigError("unknown effect_law '" + el + "'");
  }
  const std::string sl = get_or<std::string>(sig, "sign_law", "same");
  if (sl == "same") {
    s.signal.sign = SignLaw::kSame;
  } else if (sl == "random") {
    s.signal.sign = SignLaw::kRandom;
  } else {
    throw ConfigError("unknown sign_law '" + sl + "'");
  }
  s.beta0_grid = get_or<std::vector<double>>(sig, "beta0_grid", {});
  s.strength = get_or<double>(sig, "strength", 0.0);
  s.alternatives = get_or<std::size_t>(sig, "alternatives", 0);
  s.m_grid = get_or<std::vector<std::size_t>>(sig, "m_grid", {1});
  s.mu0 = get_or<double>(sig, "mu0", 1.0);
  if (sig.contains("auto_tune")) {
    const nlohmann::json at = sig.at("auto_tune");
    ExperimentSpec::AutoTune t;
    t.test = get_or<std::string>(at, "test", "en-subset-chisq");
    t.weights = get_or<std::string>(at, "weights", "flat");
    t.target = get_or<double>(at, "target", 0.6);
    t.alpha = get_or<double>(at, "alpha", 0.05);
    t.replicates = get_or<std::size_t>(at, "replicates", 400);
    s.auto_tune = t;
  }

  const nlohmann::json ens = j.value("ensemble", nlohmann::json::object());
  s.ens.B_max = get_or<std::int64_t>(ens, "B_max", 300);
  s.ens.block = get_or<std::int64_t>(ens, "block", 100);
  s.ens.min_B = get_or<std::int64_t>(ens, "min_B", 300);
  s.ens.stability_tol = get_or<double>(ens, "stability_tol", 0.05);
  s.ens.futility_margin = get_or<double>(ens, "futility_margin", 100.0);
  s.ens.supersig_margin = get_or<double>(ens, "supersig_margin", 1e-3);
  if (ens.contains("target_alpha")) {
    s.ens.target_alpha = ens.at("target_alpha").get<double>();
  }
  if (ens.contains("subset_size")) {
    s.ens.subset_size = ens.at("subset_size").get<std::size_t>();
  }
  return s;
}

nlohmann::json ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_to_string(kind);
  j["seed"] = seed;
  j["replicates"] = replicates;
  j["alphas"] = alphas;
  j["tests"] = tests;
  j["weights"] = weights;
  j["threads"] = threads;
  j["tail_table_nodes"] = tail_table_nodes;
  j["mc_critical_replicates"] = mc_critical_replicates;

  nlohmann::json model;
  switch (source) {
    case Source::kGenotypes: {
      model["source"] = "genotypes";
      model["n"] = genotypes.n;
      model["p"] = genotypes.p;
      model["maf_law"] =
          genotypes.maf_law == GenotypeSpec::MafLaw::kUniform ? "uniform"
                                                              : "log-uniform";
      model["maf_lo"] = genotypes.maf_lo;
      model["maf_hi"] = genotypes.maf_hi;
      const char* corr = "independent";
      if (genotypes.correlation == GenotypeSpec::Correlation::kExchangeable)
        corr = "exchangeable";
      else if (genotypes.correlation == GenotypeSpec::Correlation::kAutoregressive)
        corr = "autoregressive";
      else if (genotypes.correlation == GenotypeSpec::Correlation::kBlock)
        corr = "block";
      model["correlation"] = corr;
      model["rho"] = genotypes.rho;
      if (!genotypes.block_sizes.empty()) model["block_sizes"] = genotypes.block_sizes;
      model["covariates"] = covariates;
      model["panels"] = panels;
      break;
    }
    case Source::kDirect:
      model["source"] = "direct";
      model["p"] = direct_p;
      model["rho"] = direct_rho;
      model["n_grid"] = n_grid;
      break;
    case Source::kSparseNormal:
      model["source"] = "sparse-normal";
      model["p"] = sparse_p;
      break;
  }
  j["model"] = model;

  nlohmann::json sig;
  sig["proportion"] = signal.proportion;
  sig["effect_law"] = signal.effect == EffectLaw::kConstant ? "constant" : "maf-log";
  sig["sign_law"] = signal.sign == SignLaw::kSame ? "same" : "random";
  if (!beta0_grid.empty()) sig["beta0_grid"] = beta0_grid;
  sig["strength"] = strength;
  if (alternatives > 0) sig["alternatives"] = alternatives;
  sig["m_grid"] = m_grid;
  sig["mu0"] = mu0;
  if (auto_tune) {
    sig["auto_tune"] = {{"test", auto_tune->test},
                        {"weights", auto_tune->weights},
                        {"target", auto_tune->target},
                        {"alpha", auto_tune->alpha},
                        {"replicates", auto_tune->replicates}};
  }
  j["signal"] = sig;

  nlohmann::json ens;
  ens["B_max"] = this->ens.B_max;
  ens["block"] = this->ens.block;
  ens["min_B"] = this->ens.min_B;
  ens["stability_tol"] = this->ens.stability_tol;
  ens["futility_margin"] = this->ens.futility_margin;
  ens["supersig_margin"] = this->ens.supersig_margin;
  if (this->ens.target_alpha) ens["target_alpha"] = *this->ens.target_alpha;
  if (this->ens.subset_size) ens["subset_size"] = *this->ens.subset_size;
  j["ensemble"] = ens;
  return j;
}

// ---------------------------------------------------------------------------
// Table output
// ---------------------------------------------------------------------------

std::string ExperimentTable::tsv() const {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out += columns[c];
    out += c + 1 == columns.size() ? '\n' : '\t';
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      out += c + 1 == row.size() ? '\n' : '\t';
    }
  }
  return out;
}

void ExperimentTable::write(const std::string& prefix) const {
  {
    std::ofstream out(prefix + ".tsv");
    out << tsv();
    if (!out) throw DataError("failed to write " + prefix + ".tsv");
  }
  std::ofstream out(prefix + ".meta.json");
  out << meta.dump(2) << "\n";
  if (!out) throw DataError("failed to write " + prefix + ".meta.json");
}

// ---------------------------------------------------------------------------
// Test arms
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

bool is_ensemble_test(const std::string& t) {
  return t == "en-burden" || t == "en-skat" || t == "en-morst" ||
         t == "en-subset-chisq";
}

bool is_weighted_test(const std::string& t) {
  return t == "en-burden" || t == "en-skat" || t == "en-morst" ||
         t == "burden" || t == "skat" || t == "morst";
}

// Tests that consume the standardized vector and the correlation matrix.
bool is_z_test(const std::string& t) {
  return t == "chisq" || t == "hc" || t == "bj" || t == "en-subset-chisq";
}

std::vector<double> parse_weight_scheme(const std::string& scheme,
                                        const std::vector<double>& mafs,
                                        std::size_t p) {
  if (scheme == "flat") return std::vector<double>(p, 1.0);
  if (scheme.rfind("beta:", 0) == 0) {
    double c1 = 0.0, c2 = 0.0;
    if (std::sscanf(scheme.c_str(), "beta:%lf,%lf", &c1, &c2) != 2) {
      throw ConfigError("weight scheme '" + scheme + "' is not beta:c1,c2");
    }
    if (mafs.empty()) {
      throw ConfigError("beta weights need MAFs (genotype models only)");
    }
    return beta_weights(mafs, c1, c2);
  }
  throw ConfigError("unknown weight scheme '" + scheme + "'");
}

// One test x weight-scheme arm bound to a panel's covariance structure.
struct TestArm {
  std::string test;
  std::string scheme;
  bool ensemble_arm = false;
  bool z_input = false;  // consumes standardized scores + correlation

  ensemble::PreparedArm prepared;  // ensembles
  std::int64_t b_eval = 0;

  // originals
  std::vector<double> w;  // normalized fixed weights
  double burden_denom = 1.0;
  dist::MixtureSpec mixture;
  ensemble::MixtureTailTable table;
  linalg::Matrix morst_chol;
  linalg::Matrix omega_chol;  // full chisq
  int df = 0;
  reference::CalibrationCache* calib = nullptr;

  double p_value(const double* s, const double* z) const;
};

double TestArm::p_value(const double* s, const double* z) const {
  const double* v = z_input ? z : s;
  if (ensemble_arm) return prepared.evaluate(v, b_eval).p_value;
  const std::size_t p = w.size();
  if (test == "burden") {
    return dist::two_sided_normal_p(kernels::dot(w.data(), v, p) / burden_denom);
  }
  if (test == "skat") {
    return table.sf(kernels::weighted_sumsq(w.data(), v, p));
  }
  if (test == "morst") {
    std::vector<double> y(p);
    for (std::size_t j = 0; j < p; ++j) y[j] = w[j] * v[j];
    double stat = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      const double t =
          (y[j] - kernels::dot(morst_chol.row(j), y.data(), j)) / morst_chol(j, j);
      y[j] = t;
      stat += t * t;
    }
    return table.sf(stat);
  }
  if (test == "chisq") {
    const std::size_t m = static_cast<std::size_t>(df);
    std::vector<double> y(v, v + m);
    double stat = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double t =
          (y[j] - kernels::dot(omega_chol.row(j), y.data(), j)) / omega_chol(j, j);
      y[j] = t;
      stat += t * t;
    }
    return dist::chisq_sf(stat, df);
  }
  if (test == "hc") {
    std::vector<double> zz(v, v + df);
    return calib->table_for("hc", zz.size()).p_value(reference::hc_statistic(zz));
  }
  if (test == "bj") {
    std::vector<double> zz(v, v + df);
    return calib->table_for("bj", zz.size()).p_value(reference::bj_statistic(zz));
  }
  throw ConfigError("unknown test '" + test + "'");
}

// A fixed dataset structure: covariance, score machinery, standardization.
struct PanelContext {
  std::size_t p = 0;
  linalg::Matrix sigma;        // covariance the weighted tests see
  linalg::Matrix corr;         // correlation for z-tests
  std::vector<double> inv_sd;  // 1/sqrt(diag sigma), 0 for dead variants
  std::vector<double> mafs;    // genotype models

  // genotype machinery
  std::optional<score::RegressionDesign> design;
  linalg::Matrix g;     // centered allele counts (for signal injection)
  linalg::Matrix zcov;  // n x 2 covariates (optional)
  std::size_t n = 0;

  // direct models
  linalg::Matrix sigma_chol;

  void standardize(const double* s, double* z) const {
    for (std::size_t j = 0; j < p; ++j) z[j] = s[j] * inv_sd[j];
  }
};

PanelContext make_genotype_panel(const ExperimentSpec& spec, std::size_t panel_idx) {
  PanelContext ctx;
  rng::Philox gstream =
      rng::stream_for({spec.seed, "panel-genotypes"}, panel_idx);
  GenotypePanel panel = gen_genotypes(spec.genotypes, gstream);
  ctx.p = spec.genotypes.p;
  ctx.n = spec.genotypes.n;
  ctx.mafs = std::move(panel.mafs);
  ctx.g = std::move(panel.g);

  if (spec.covariates) {
    rng::Philox cstream =
        rng::stream_for({spec.seed, "panel-covariates"}, panel_idx);
    ctx.zcov = linalg::Matrix(ctx.n, 2);
    for (std::size_t i = 0; i < ctx.n; ++i) {
      ctx.zcov(i, 0) = cstream.next_normal();
      ctx.zcov(i, 1) = (cstream.next_u64() & 1u) ? 0.5 : -0.5;
    }
  } else {
    ctx.zcov = linalg::Matrix(ctx.n, 0);
  }
  ctx.design = score::RegressionDesign::prepare(ctx.g, ctx.zcov);
  ctx.sigma = ctx.design->sigma();
  return ctx;
}

PanelContext make_direct_panel(const ExperimentSpec& spec) {
  PanelContext ctx;
  ctx.p = spec.direct_p;
  ctx.n = 1;  // n enters through the mean scaling per grid point
  ctx.sigma = score::exchangeable_sigma(spec.direct_p, spec.direct_rho);
  ctx.sigma_chol = linalg::cholesky(ctx.sigma);
  return ctx;
}

PanelContext make_sparse_panel(const ExperimentSpec& spec) {
  PanelContext ctx;
  ctx.p = spec.sparse_p;
  ctx.n = 1;
  ctx.sigma = linalg::Matrix::identity(spec.sparse_p);
  ctx.sigma_chol = linalg::Matrix::identity(spec.sparse_p);
  return ctx;
}

void finish_panel_standardization(PanelContext& ctx) {
  const std::size_t p = ctx.p;
  ctx.inv_sd.assign(p, 0.0);
  double dmax = 0.0;
  for (std::size_t j = 0; j < p; ++j) dmax = std::max(dmax, ctx.sigma(j, j));
  const double floor = 1e-12 * std::max(dmax, 1e-300);
  for (std::size_t j = 0; j < p; ++j) {
    if (ctx.sigma(j, j) > floor) ctx.inv_sd[j] = 1.0 / std::sqrt(ctx.sigma(j, j));
  }
  ctx.corr = linalg::Matrix(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      ctx.corr(i, j) = i == j ? 1.0 : ctx.sigma(i, j) * ctx.inv_sd[i] * ctx.inv_sd[j];
    }
  }
}

ensemble::Family family_for(const std::string& test) {
  if (test == "en-burden") return ensemble::Family::kBurden;
  if (test == "en-skat") return ensemble::Family::kSkat;
  if (test == "en-morst") return ensemble::Family::kMorst;
  return ensemble::Family::kSubsetChisq;
}

TestArm build_arm(const ExperimentSpec& spec, const PanelContext& ctx,
                  const std::string& test, const std::string& scheme,
                  std::size_t panel_idx, reference::CalibrationCache* calib,
                  int threads) {
  TestArm arm;
  arm.test = test;
  arm.scheme = scheme;
  arm.z_input = is_z_test(test);
  arm.ensemble_arm = is_ensemble_test(test);
  arm.calib = calib;
  const std::size_t p = ctx.p;

  if (arm.ensemble_arm) {
    ensemble::EnsembleConfig cfg = spec.ens;
    cfg.seed = rng::SeedSpec{
        spec.seed, "arm:" + test + ":" + scheme + ":" + std::to_string(panel_idx)};
    cfg.threads = threads;
    if (is_weighted_test(test) && scheme != "flat") {
      cfg.law = sampling::WeightLaw::auxiliary(
          parse_weight_scheme(scheme, ctx.mafs, p));
    } else {
      cfg.law = sampling::WeightLaw::uniform();
    }
    const linalg::Matrix& basis = arm.z_input ? ctx.corr : ctx.sigma;
    arm.prepared = ensemble::PreparedArm::build(family_for(test), basis, cfg,
                                                nullptr, true);
    arm.b_eval = cfg.B_max;
    return arm;
  }

  if (test == "burden" || test == "skat" || test == "morst") {
    std::vector<double> a = parse_weight_scheme(scheme, ctx.mafs, p);
    const double norm = std::sqrt(kernels::sumsq(a.data(), a.size()));
    arm.w.resize(p);
    for (std::size_t j = 0; j < p; ++j) arm.w[j] = a[j] / norm;
    linalg::Matrix m(p, p);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) {
        m(i, j) = arm.w[i] * ctx.sigma(i, j) * arm.w[j];
      }
    }
    if (test == "burden") {
      const double den2 = kernels::quad_form(ctx.sigma.data(), arm.w.data(), p);
      if (!(den2 > 0.0)) throw DataError("burden weights are degenerate");
      arm.burden_denom = std::sqrt(den2);
      return arm;
    }
    std::vector<double> mu = linalg::sym_eigenvalues(m);
    if (test == "skat") {
      arm.mixture = dist::MixtureSpec::from(std::move(mu));
    } else {
      const double theta = base::morst_default_theta(mu);
      std::vector<double> ev(p);
      for (std::size_t k = 0; k < p; ++k) ev[k] = mu[k] / (1.0 + theta * mu[k]);
      arm.mixture = dist::MixtureSpec::from(std::move(ev));
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) m(i, j) *= theta;
        m(i, i) += 1.0;
      }
      arm.morst_chol = linalg::cholesky(m);
    }
    arm.table = ensemble::MixtureTailTable(arm.mixture, spec.tail_table_nodes);
    return arm;
  }

  if (test == "chisq") {
    arm.df = static_cast<int>(p);
    try {
      arm.omega_chol = linalg::cholesky(ctx.corr);
    } catch (const DataError&) {
      throw DataError("full chisq: correlation matrix is singular");
    }
    return arm;
  }
  if (test == "hc" || test == "bj") {
    arm.df = static_cast<int>(p);
    if (calib == nullptr) throw ConfigError("hc/bj need a calibration cache");
    calib->table_for(test, p);  // build eagerly, before parallel sections
    return arm;
  }
  throw ConfigError("unknown test '" + test + "'");
}

// Draw the score vector (and standardized copy) for one replicate.
struct ReplicateDraw {
  std::vector<double> s;
  std::vector<double> z;
};

// Null or alternative draw, dispatching on source. For direct models the
// alternative mean is sqrt(n)*strength*Sigma w_beta with w_beta uniform on
// the positive sphere; for sparse models mu has m entries equal to mu0.
void draw_replicate(const ExperimentSpec& spec, const PanelContext& ctx,
                    std::uint64_t rep, bool with_signal, double beta0,
                    std::size_t n_direct, std::size_t m_sparse,
                    ReplicateDraw* out) {
  const std::size_t p = ctx.p;
  out->s.resize(p);
  out->z.resize(p);
  rng::Philox stream = rng::stream_for({spec.seed, "replicate"}, rep);

  switch (spec.source) {
    case ExperimentSpec::Source::kGenotypes: {
      const std::size_t n = ctx.n;
      std::vector<double> beta;
      if (with_signal) {
        beta = effect_vector(spec.signal, beta0, ctx.mafs, stream);
      }
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        double v = stream.next_normal();
        if (ctx.zcov.cols() == 2) {
          v += 0.5 * ctx.zcov(i, 0) + 0.5 * ctx.zcov(i, 1);
        }
        y[i] = v;
      }
      if (with_signal) {
        for (std::size_t j = 0; j < p; ++j) {
          if (beta[j] != 0.0) {
            for (std::size_t i = 0; i < n; ++i) y[i] += ctx.g(i, j) * beta[j];
          }
        }
      }
      const score::ScoreModel m = ctx.design->score_for(y);
      out->s = m.s;
      break;
    }
    case ExperimentSpec::Source::kDirect: {
      std::vector<double> noise(p);
      for (std::size_t j = 0; j < p; ++j) noise[j] = stream.next_normal();
      for (std::size_t j = 0; j < p; ++j) {
        out->s[j] = kernels::dot(ctx.sigma_chol.row(j), noise.data(), j + 1);
      }
      if (with_signal && spec.strength > 0.0) {
        std::vector<double> wb(p);
        sampling::sample_positive_direction(p, sampling::WeightLaw::uniform(),
                                            stream, wb.data());
        const double scale =
            std::sqrt(static_cast<double>(n_direct)) * spec.strength;
        std::vector<double> mean(p);
        kernels::matvec(ctx.sigma.data(), wb.data(), mean.data(), p, p);
        for (std::size_t j = 0; j < p; ++j) out->s[j] += scale * mean[j];
      }
      break;
    }
    case ExperimentSpec::Source::kSparseNormal: {
      for (std::size_t j = 0; j < p; ++j) out->s[j] = stream.next_normal();
      if (with_signal && m_sparse > 0) {
        std::vector<std::uint32_t> support;
        sampling::sample_subset(p, m_sparse, stream, &support);
        for (const std::uint32_t j : support) out->s[j] += beta0;
      }
      break;
    }
  }
  ctx.standardize(out->s.data(), out->z.data());
}

}  // namespace

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

namespace {

nlohmann::json base_meta(const ExperimentSpec& spec) {
  nlohmann::json meta;
  meta["spec"] = spec.to_json();
  meta["spec_hash"] = io::hash_hex(spec.to_json().dump());
  meta["seed"] = spec.seed;
  return meta;
}

int spec_threads(const ExperimentSpec& spec) {
  return spec.threads > 0 ? spec.threads : parallel::default_threads();
}

struct ArmSet {
  std::vector<TestArm> arms;
  std::vector<std::string> labels_test;
  std::vector<std::string> labels_weights;
};

ArmSet build_arms(const ExperimentSpec& spec, const PanelContext& ctx,
                  std::size_t panel_idx, reference::CalibrationCache* calib,
                  int threads) {
  ArmSet set;
  for (const std::string& test : spec.tests) {
    const bool weighted = is_weighted_test(test);
    const std::vector<std::string> schemes =
        weighted ? spec.weights : std::vector<std::string>{"flat"};
    for (const std::string& scheme : schemes) {
      set.arms.push_back(
          build_arm(spec, ctx, test, scheme, panel_idx, calib, threads));
      set.labels_test.push_back(test);
      set.labels_weights.push_back(weighted ? scheme : "-");
    }
  }
  return set;
}

}  // namespace

ExperimentTable run_type1(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentSpec::Kind::kType1) {
    throw ConfigError("run_type1 requires kind=type1");
  }
  double min_alpha = 1.0;
  for (const double a : spec.alphas) min_alpha = std::min(min_alpha, a);
  if (static_cast<double>(spec.replicates) * min_alpha < 100.0) {
    throw ConfigError(
        "replication underrun: need replicates * min(alpha) >= 100 expected "
        "exceedances");
  }

  const auto t_start = std::chrono::steady_clock::now();
  const int threads = spec_threads(spec);
  const std::size_t panels =
      spec.source == ExperimentSpec::Source::kGenotypes ? spec.panels : 1;
  reference::CalibrationCache calib("", 1000000, spec.seed ^ 0x9e3779b9u, threads);

  std::vector<std::vector<std::atomic<std::uint64_t>>> counts;  // arm x alpha
  std::size_t arm_count = 0;
  std::vector<std::string> label_test, label_weights;

  for (std::size_t panel = 0; panel < panels; ++panel) {
    PanelContext ctx;
    switch (spec.source) {
      case ExperimentSpec::Source::kGenotypes:
        ctx = make_genotype_panel(spec, panel);
        break;
      case ExperimentSpec::Source::kDirect:
        ctx = make_direct_panel(spec);
        break;
      case ExperimentSpec::Source::kSparseNormal:
        ctx = make_sparse_panel(spec);
        break;
    }
    finish_panel_standardization(ctx);
    ArmSet set = build_arms(spec, ctx, panel, &calib, threads);
    if (panel == 0) {
      arm_count = set.arms.size();
      label_test = set.labels_test;
      label_weights = set.labels_weights;
      counts = std::vector<std::vector<std::atomic<std::uint64_t>>>(arm_count);
      for (auto& per_arm : counts) {
        per_arm = std::vector<std::atomic<std::uint64_t>>(spec.alphas.size());
        for (auto& c : per_arm) c.store(0);
      }
    }

    const std::size_t lo = panel * spec.replicates / panels;
    const std::size_t hi = (panel + 1) * spec.replicates / panels;
    parallel::parallel_for(lo, hi, threads, [&](std::size_t rep) {
      ReplicateDraw draw;
      draw_replicate(spec, ctx, rep, false, 0.0, 0, 0, &draw);
      for (std::size_t a = 0; a < set.arms.size(); ++a) {
        const double pv = set.arms[a].p_value(draw.s.data(), draw.z.data());
        for (std::size_t k = 0; k < spec.alphas.size(); ++k) {
          if (pv <= spec.alphas[k]) counts[a][k].fetch_add(1);
        }
      }
    });
  }

  ExperimentTable table;
  table.columns = {"test", "weights", "alpha", "estimate", "mc_se",
                   "rejections", "replicates"};
  for (std::size_t a = 0; a < arm_count; ++a) {
    for (std::size_t k = 0; k < spec.alphas.size(); ++k) {
      const double est = static_cast<double>(counts[a][k].load()) /
                         static_cast<double>(spec.replicates);
      const double se =
          std::sqrt(std::max(est, 1.0 / spec.replicates) * (1.0 - est) /
                    static_cast<double>(spec.replicates));
      table.rows.push_back({label_test[a], label_weights[a], fmt(spec.alphas[k]),
                            fmt(est), fmt(se),
                            std::to_string(counts[a][k].load()),
                            std::to_string(spec.replicates)});
    }
  }
  table.meta = base_meta(spec);
  table.meta["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return table;
}

namespace {

// Empirical alpha-quantile threshold of the null p_en distribution for an
// ensemble arm (Monte Carlo critical value); exact tests use alpha itself.
double mc_critical_value(const ExperimentSpec& spec, const PanelContext& ctx,
                         const TestArm& arm, double alpha, int threads) {
  const std::size_t n = spec.mc_critical_replicates;
  std::vector<double> pv(n);
  parallel::parallel_for(0, n, threads, [&](std::size_t r) {
    ReplicateDraw draw;
    rng::Philox stream = rng::stream_for({spec.seed, "mc-null"}, r);
    const std::size_t p = ctx.p;
    draw.s.resize(p);
    draw.z.resize(p);
    switch (spec.source) {
      case ExperimentSpec::Source::kGenotypes: {
        std::vector<double> y(ctx.n);
        for (std::size_t i = 0; i < ctx.n; ++i) {
          double v = stream.next_normal();
          if (ctx.zcov.cols() == 2) {
            v += 0.5 * ctx.zcov(i, 0) + 0.5 * ctx.zcov(i, 1);
          }
          y[i] = v;
        }
        draw.s = ctx.design->score_for(y).s;
        break;
      }
      case ExperimentSpec::Source::kDirect: {
        std::vector<double> noise(p);
        for (std::size_t j = 0; j < p; ++j) noise[j] = stream.next_normal();
        for (std::size_t j = 0; j < p; ++j) {
          draw.s[j] = kernels::dot(ctx.sigma_chol.row(j), noise.data(), j + 1);
        }
        break;
      }
      case ExperimentSpec::Source::kSparseNormal:
        for (std::size_t j = 0; j < p; ++j) draw.s[j] = stream.next_normal();
        break;
    }
    ctx.standardize(draw.s.data(), draw.z.data());
    pv[r] = arm.p_value(draw.s.data(), draw.z.data());
  });
  std::sort(pv.begin(), pv.end());
  const std::size_t k = static_cast<std::size_t>(
      std::floor(alpha * static_cast<double>(n + 1)));
  if (k == 0) return pv.front() * 0.5;
  return pv[k - 1];
}

struct PowerPoint {
  double beta0 = 0.0;        // genotype effect size
  std::size_t n_direct = 0;  // direct sample size
  std::size_t m_sparse = 0;  // sparse signal count
  std::string label;
  std::string value;
};

double measure_power(const ExperimentSpec& spec, const PanelContext& ctx,
                     const TestArm& arm, const PowerPoint& pt, double threshold,
                     std::size_t replicates, const char* stream_tag,
                     int threads) {
  std::atomic<std::uint64_t> hits{0};
  // distinct replicate streams per measurement context
  const std::uint64_t offset = rng::fnv1a64(stream_tag) << 20;
  parallel::parallel_for(0, replicates, threads, [&](std::size_t r) {
    ReplicateDraw draw;
    draw_replicate(spec, ctx, offset + r, true, pt.beta0, pt.n_direct,
                   pt.m_sparse, &draw);
    if (arm.p_value(draw.s.data(), draw.z.data()) <= threshold) {
      hits.fetch_add(1);
    }
  });
  return static_cast<double>(hits.load()) / static_cast<double>(replicates);
}

}  // namespace

ExperimentTable run_power(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentSpec::Kind::kPower) {
    throw ConfigError("run_power requires kind=power");
  }
  const auto t_start = std::chrono::steady_clock::now();
  const int threads = spec_threads(spec);
  reference::CalibrationCache calib("", 1000000, spec.seed ^ 0x9e3779b9u, threads);

  PanelContext ctx;
  switch (spec.source) {
    case ExperimentSpec::Source::kGenotypes:
      ctx = make_genotype_panel(spec, 0);
      break;
    case ExperimentSpec::Source::kDirect:
      ctx = make_direct_panel(spec);
      break;
    case ExperimentSpec::Source::kSparseNormal:
      ctx = make_sparse_panel(spec);
      break;
  }
  finish_panel_standardization(ctx);
  ArmSet set = build_arms(spec, ctx, 0, &calib, threads);

  // Monte Carlo critical values for ensemble arms at loose alphas; analytic
  // thresholds elsewhere.
  std::vector<std::vector<double>> thresholds(set.arms.size());
  std::vector<std::vector<std::string>> threshold_kind(set.arms.size());
  for (std::size_t a = 0; a < set.arms.size(); ++a) {
    thresholds[a].resize(spec.alphas.size());
    threshold_kind[a].resize(spec.alphas.size());
    for (std::size_t k = 0; k < spec.alphas.size(); ++k) {
      const double alpha = spec.alphas[k];
      if (set.arms[a].ensemble_arm && alpha >= 0.01) {
        thresholds[a][k] = mc_critical_value(spec, ctx, set.arms[a], alpha, threads);
        threshold_kind[a][k] = "mc";
      } else {
        thresholds[a][k] = alpha;
        threshold_kind[a][k] = "analytic";
      }
    }
  }

  // Grid of experimental conditions.
  std::vector<PowerPoint> grid;
  switch (spec.source) {
    case ExperimentSpec::Source::kGenotypes:
      for (const double b : spec.beta0_grid) {
        grid.push_back({b, 0, 0, "beta0", fmt(b)});
      }
      break;
    case ExperimentSpec::Source::kDirect:
      for (const std::size_t n : spec.n_grid) {
        grid.push_back({0.0, n, 0, "n", std::to_string(n)});
      }
      break;
    case ExperimentSpec::Source::kSparseNormal:
      for (const std::size_t m : spec.m_grid) {
        grid.push_back({spec.mu0, 0, m, "m", std::to_string(m)});
      }
      break;
  }
  if (grid.empty()) throw ConfigError("power experiment needs a nonempty grid");

  nlohmann::json tuned = nlohmann::json::array();
  if (spec.auto_tune) {
    // Bisect the effect scale until the reference arm hits the target power.
    const ExperimentSpec::AutoTune& at = *spec.auto_tune;
    std::size_t ref = set.arms.size();
    for (std::size_t a = 0; a < set.arms.size(); ++a) {
      if (set.labels_test[a] == at.test &&
          (set.labels_weights[a] == at.weights || set.labels_weights[a] == "-")) {
        ref = a;
      }
    }
    if (ref == set.arms.size()) {
      throw ConfigError("auto_tune test is not among the experiment tests");
    }
    double thr = at.alpha;
    if (set.arms[ref].ensemble_arm && at.alpha >= 0.01) {
      thr = mc_critical_value(spec, ctx, set.arms[ref], at.alpha, threads);
    }
    for (PowerPoint& pt : grid) {
      double lo = 0.0;
      double hi = spec.source == ExperimentSpec::Source::kSparseNormal
                      ? std::max(spec.mu0, 0.5)
                      : (pt.beta0 > 0.0 ? pt.beta0 : 0.25);
      auto power_at = [&](double scale) {
        PowerPoint probe = pt;
        if (spec.source == ExperimentSpec::Source::kSparseNormal ||
            spec.source == ExperimentSpec::Source::kGenotypes) {
          probe.beta0 = scale;
        }
        return measure_power(spec, ctx, set.arms[ref], probe, thr,
                             at.replicates, "tune", threads);
      };
      for (int it = 0; it < 14 && power_at(hi) < at.target; ++it) hi *= 1.6;
      for (int it = 0; it < 12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (power_at(mid) < at.target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      pt.beta0 = 0.5 * (lo + hi);
      tuned.push_back({{"grid", pt.label + "=" + pt.value},
                       {"effect", pt.beta0},
                       {"target", at.target},
                       {"alpha", at.alpha}});
    }
  }

  ExperimentTable table;
  table.columns = {"grid",  "grid_value", "test",  "weights",
                   "alpha", "threshold",  "power", "mc_se"};
  for (const PowerPoint& pt : grid) {
    for (std::size_t a = 0; a < set.arms.size(); ++a) {
      for (std::size_t k = 0; k < spec.alphas.size(); ++k) {
        const double power =
            measure_power(spec, ctx, set.arms[a], pt, thresholds[a][k],
                          spec.replicates, "measure", threads);
        const double se = std::sqrt(std::max(power * (1.0 - power), 1e-12) /
                                    static_cast<double>(spec.replicates));
        table.rows.push_back({pt.label, pt.value, set.labels_test[a],
                              set.labels_weights[a], fmt(spec.alphas[k]),
                              threshold_kind[a][k], fmt(power), fmt(se)});
      }
    }
  }
  table.meta = base_meta(spec);
  if (!tuned.empty()) table.meta["tuned_effects"] = tuned;
  table.meta["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return table;
}

ExperimentTable run_path(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentSpec::Kind::kPath) {
    throw ConfigError("run_path requires kind=path");
  }
  const auto t_start = std::chrono::steady_clock::now();
  const int threads = spec_threads(spec);

  PanelContext ctx;
  switch (spec.source) {
    case ExperimentSpec::Source::kGenotypes:
      ctx = make_genotype_panel(spec, 0);
      break;
    case ExperimentSpec::Source::kDirect:
      ctx = make_direct_panel(spec);
      break;
    case ExperimentSpec::Source::kSparseNormal:
      ctx = make_sparse_panel(spec);
      break;
  }
  finish_panel_standardization(ctx);
  const std::string test = spec.tests.empty() ? "en-burden" : spec.tests[0];
  if (!is_ensemble_test(test)) {
    throw ConfigError("path experiments need an ensemble test");
  }
  const std::string scheme = spec.weights.empty() ? "flat" : spec.weights[0];
  const std::size_t n_direct = spec.n_grid.empty() ? 1 : spec.n_grid[0];
  const std::size_t m_sparse = spec.m_grid.empty() ? 0 : spec.m_grid[0];
  bool with_signal = false;
  double beta0 = 0.0;
  switch (spec.source) {
    case ExperimentSpec::Source::kGenotypes:
      with_signal = !spec.beta0_grid.empty() && spec.beta0_grid[0] > 0.0;
      beta0 = with_signal ? spec.beta0_grid[0] : 0.0;
      break;
    case ExperimentSpec::Source::kDirect:
      with_signal = spec.strength > 0.0;
      break;
    case ExperimentSpec::Source::kSparseNormal:
      with_signal = spec.mu0 > 0.0 && m_sparse > 0;
      beta0 = spec.mu0;
      break;
  }

  std::vector<ensemble::TestResult> results(spec.replicates);
  parallel::parallel_for(0, spec.replicates, threads, [&](std::size_t r) {
    ReplicateDraw draw;
    draw_replicate(spec, ctx, r, with_signal, beta0, n_direct, m_sparse, &draw);
    ensemble::EnsembleConfig cfg = spec.ens;
    cfg.seed = rng::SeedSpec{spec.seed, "arm:" + test + ":" + scheme + ":path:" +
                                            std::to_string(r)};
    cfg.threads = 1;
    if (is_weighted_test(test) && scheme != "flat") {
      cfg.law = sampling::WeightLaw::auxiliary(
          parse_weight_scheme(scheme, ctx.mafs, ctx.p));
    }
    score::ScoreModel model =
        score::ScoreModel::from_parts(draw.s, ctx.sigma, std::max<std::size_t>(ctx.n, 1), false);
    if (test == "en-burden") {
      results[r] = ensemble::en_burden(model, cfg);
    } else if (test == "en-skat") {
      results[r] = ensemble::en_skat(model, cfg);
    } else if (test == "en-morst") {
      results[r] = ensemble::en_morst(model, cfg);
    } else {
      results[r] = ensemble::en_subset_chisq(draw.z, ctx.corr, cfg);
    }
  });

  ExperimentTable table;
  table.columns = {"replicate", "B", "p_en", "neg_log10_p_en", "stop_reason"};
  for (std::size_t r = 0; r < results.size(); ++r) {
    for (const auto& [b, pe] : results[r].path) {
      table.rows.push_back({std::to_string(r), std::to_string(b), fmt(pe),
                            fmt(-std::log10(pe)),
                            ensemble::to_string(results[r].stop_reason)});
    }
  }
  table.meta = base_meta(spec);
  table.meta["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return table;
}

ExperimentTable run_variability(const ExperimentSpec& spec) {
  if (spec.kind != ExperimentSpec::Kind::kVariability) {
    throw ConfigError("run_variability requires kind=variability");
  }
  if (spec.source != ExperimentSpec::Source::kDirect) {
    throw ConfigError("variability experiments use the direct score model");
  }
  const auto t_start = std::chrono::steady_clock::now();
  const int threads = spec_threads(spec);
  const std::size_t kAlts = spec.alternatives == 0 ? 1000 : spec.alternatives;
  const std::size_t reps = spec.replicates;
  const double alpha = spec.alphas.empty() ? 1e-6 : spec.alphas[0];
  const std::size_t n_direct = spec.n_grid.empty() ? 10000 : spec.n_grid[0];

  PanelContext ctx = make_direct_panel(spec);
  finish_panel_standardization(ctx);
  const std::size_t p = ctx.p;

  // EN-Burden arm, fixed across alternatives.
  ensemble::EnsembleConfig cfg = spec.ens;
  cfg.seed = rng::SeedSpec{spec.seed, "arm:en-burden:variability"};
  cfg.threads = threads;
  ensemble::PreparedArm arm = ensemble::PreparedArm::build(
      ensemble::Family::kBurden, ctx.sigma, cfg, nullptr, false);

  std::vector<double> base_power(kAlts), en_power(kAlts);
  parallel::parallel_for(0, kAlts, threads, [&](std::size_t k) {
    rng::Philox astream = rng::stream_for({spec.seed, "alternative"}, k);
    std::vector<double> wb(p), wbase(p);
    sampling::sample_positive_direction(p, sampling::WeightLaw::uniform(),
                                        astream, wb.data());
    // the single random base test this alternative is compared against
    sampling::sample_positive_direction(p, sampling::WeightLaw::uniform(),
                                        astream, wbase.data());
    const double base_den =
        std::sqrt(kernels::quad_form(ctx.sigma.data(), wbase.data(), p));
    std::vector<double> mean(p);
    kernels::matvec(ctx.sigma.data(), wb.data(), mean.data(), p, p);
    const double scale = std::sqrt(static_cast<double>(n_direct)) * spec.strength;

    std::size_t base_hits = 0, en_hits = 0;
    std::vector<double> s(p), noise(p);
    rng::Philox dstream = rng::stream_for({spec.seed, "variability-data"}, k);
    for (std::size_t r = 0; r < reps; ++r) {
      for (std::size_t j = 0; j < p; ++j) noise[j] = dstream.next_normal();
      for (std::size_t j = 0; j < p; ++j) {
        s[j] = scale * mean[j] +
               kernels::dot(ctx.sigma_chol.row(j), noise.data(), j + 1);
      }
      const double base_stat = kernels::dot(wbase.data(), s.data(), p) / base_den;
      if (dist::two_sided_normal_p(base_stat) <= alpha) ++base_hits;
      if (arm.evaluate(s.data(), cfg.B_max).p_value <= alpha) ++en_hits;
    }
    base_power[k] = static_cast<double>(base_hits) / reps;
    en_power[k] = static_cast<double>(en_hits) / reps;
  });

  ExperimentTable table;
  table.columns = {"alternative", "base_power", "ensemble_power"};
  for (std::size_t k = 0; k < kAlts; ++k) {
    table.rows.push_back({std::to_string(k), fmt(base_power[k]), fmt(en_power[k])});
  }
  table.meta = base_meta(spec);
  table.meta["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return table;
}

ExperimentTable run(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentSpec::Kind::kType1: return run_type1(spec);
    case ExperimentSpec::Kind::kPower: return run_power(spec);
    case ExperimentSpec::Kind::kPath: return run_path(spec);
    case ExperimentSpec::Kind::kVariability: return run_variability(spec);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace entest::sim
