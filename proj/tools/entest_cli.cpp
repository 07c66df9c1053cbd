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

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "entest/base_tests.hpp"
#include "entest/dist.hpp"
#include "entest/ensemble.hpp"
#include "entest/errors.hpp"
#include "entest/io.hpp"
#include "entest/kernels.hpp"
#include "entest/parallel.hpp"
#include "entest/reference_tests.hpp"
#include "entest/sampling.hpp"
#include "entest/score_model.hpp"
#include "entest/simharness.hpp"

namespace {

using namespace entest;

struct CommonOpts {
  std::string score_file;
  std::string pheno_file;
  std::string geno_file;
  std::string covar_file;
  bool header = false;
  std::string test = "en-burden";
  std::string weights = "flat";
  std::int64_t b_max = 1000;
  std::int64_t block = 100;
  std::int64_t min_b = 300;
  std::uint64_t seed = 1;
  std::optional<double> alpha;
  double theta = -1.0;
  std::optional<std::size_t> subset_size;
  bool no_early_stop = false;
  int threads = 0;
  std::string calib_dir = "entest-calib";
  std::size_t calib_draws = 1000000;
};

void add_common(CLI::App* cmd, CommonOpts* o, bool with_score) {
  if (with_score) {
    cmd->add_option("--score", o->score_file, "JSON file with S, Sigma, n");
  }
  cmd->add_option("--pheno", o->pheno_file, "phenotype TSV (one column)");
  cmd->add_option("--geno", o->geno_file, "genotype TSV, n rows x p variants");
  cmd->add_option("--covar", o->covar_file, "covariate TSV, n rows x q columns");
  cmd->add_flag("--header", o->header, "input TSVs carry a header row");
  cmd->add_option("--test", o->test,
                  "en-burden|en-skat|en-morst|en-subset-chisq|burden|skat|"
                  "morst|hc|bj|chisq");
  cmd->add_option("--weights", o->weights, "flat | beta:c1,c2 | file:PATH");
  cmd->add_option("--B-max", o->b_max, "maximum number of base tests");
  cmd->add_option("--block", o->block, "base tests per monitoring block");
  cmd->add_option("--min-B", o->min_b, "minimum base tests before stopping");
  cmd->add_option("--seed", o->seed, "master seed (all randomness)");
  cmd->add_option("--alpha", [o](const std::vector<std::string>& v) {
    o->alpha = std::stod(v.back());
    return true;
  }, "target significance level (enables futility/super-significance stops)");
  cmd->add_option("--theta", o->theta, "morst ridge parameter (<0: default rule)");
  cmd->add_option("--subset-size", [o](const std::vector<std::string>& v) {
    o->subset_size = static_cast<std::size_t>(std::stoull(v.back()));
    return true;
  }, "subset cardinality (default floor(sqrt(p)))");
  cmd->add_flag("--no-early-stop", o->no_early_stop, "run all B_max base tests");
  cmd->add_option("--threads", o->threads, "worker threads (0 = auto)");
  cmd->add_option("--calib-dir", o->calib_dir, "HC/BJ calibration table cache");
  cmd->add_option("--calib-draws", o->calib_draws, "HC/BJ null draws");
}

struct LoadedModel {
  score::ScoreModel model;
  std::vector<double> mafs;  // empty unless genotypes given
};

LoadedModel load_model(const CommonOpts& o) {
  LoadedModel lm;
  if (!o.score_file.empty()) {
    if (!o.geno_file.empty() || !o.pheno_file.empty()) {
      throw ConfigError("give either --score or --pheno/--geno, not both");
    }
    io::ScoreFile f = io::read_score_json(o.score_file);
    lm.model = score::ScoreModel::from_parts(std::move(f.s), std::move(f.sigma),
                                             f.n, true);
    return lm;
  }
  if (o.geno_file.empty() || o.pheno_file.empty()) {
    throw ConfigError("need --score, or --pheno together with --geno");
  }
  const io::TsvMatrix g = io::read_tsv_matrix(o.geno_file, o.header);
  const std::vector<double> y = io::read_tsv_vector(o.pheno_file, o.header);
  linalg::Matrix z(y.size(), 0);
  if (!o.covar_file.empty()) {
    z = io::read_tsv_matrix(o.covar_file, o.header).values;
  }
  if (g.values.rows() != y.size()) {
    throw DataError("genotype rows (" + std::to_string(g.values.rows()) +
                    ") != phenotype length (" + std::to_string(y.size()) + ")");
  }
  lm.mafs.resize(g.values.cols());
  for (std::size_t j = 0; j < g.values.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < g.values.rows(); ++i) mean += g.values(i, j);
    lm.mafs[j] = mean / (2.0 * static_cast<double>(g.values.rows()));
  }
  lm.model = score::from_regression(y, g.values, z);
  return lm;
}

std::vector<double> resolve_weights(const CommonOpts& o,
                                    const std::vector<double>& mafs,
                                    std::size_t p) {
  if (o.weights == "flat") return std::vector<double>(p, 1.0);
  if (o.weights.rfind("beta:", 0) == 0) {
    double c1 = 0.0, c2 = 0.0;
    if (std::sscanf(o.weights.c_str(), "beta:%lf,%lf", &c1, &c2) != 2) {
      throw ConfigError("--weights '" + o.weights + "' is not beta:c1,c2");
    }
    if (mafs.empty()) {
      throw ConfigError("beta weights need genotype input (MAFs unavailable)");
    }
    return sim::beta_weights(mafs, c1, c2);
  }
  if (o.weights.rfind("file:", 0) == 0) {
    std::vector<double> a = io::read_tsv_vector(o.weights.substr(5), false);
    if (a.size() != p) {
      throw DataError("weight file length " + std::to_string(a.size()) +
                      " != p = " + std::to_string(p));
    }
    return a;
  }
  throw ConfigError("unknown --weights '" + o.weights + "'");
}

ensemble::EnsembleConfig make_config(const CommonOpts& o,
                                     const std::vector<double>& mafs,
                                     std::size_t p, const std::string& label) {
  ensemble::EnsembleConfig cfg;
  cfg.seed = rng::SeedSpec{o.seed, label};
  cfg.B_max = o.b_max;
  cfg.block = o.block;
  cfg.min_B = o.min_b;
  cfg.threads = o.threads > 0 ? o.threads : parallel::default_threads();
  cfg.subset_size = o.subset_size;
  if (o.alpha && !o.no_early_stop) cfg.target_alpha = *o.alpha;
  if (o.weights != "flat") {
    cfg.law = sampling::WeightLaw::auxiliary(resolve_weights(o, mafs, p));
  }
  return cfg;
}

nlohmann::json config_record(const CommonOpts& o) {
  nlohmann::json j;
  j["test"] = o.test;
  j["weights"] = o.weights;
  j["B_max"] = o.b_max;
  j["block"] = o.block;
  j["min_B"] = o.min_b;
  j["seed"] = o.seed;
  if (o.alpha) j["alpha"] = *o.alpha;
  if (o.subset_size) j["subset_size"] = *o.subset_size;
  j["no_early_stop"] = o.no_early_stop;
  j["theta"] = o.theta;
  return j;
}

std::vector<double> standardized_z(const score::ScoreModel& m) {
  std::vector<double> z(m.dim());
  for (std::size_t j = 0; j < m.dim(); ++j) {
    const double d = m.sigma(j, j);
    z[j] = d > 0.0 ? m.s[j] / std::sqrt(d) : 0.0;
  }
  return z;
}

linalg::Matrix correlation_of(const linalg::Matrix& sigma) {
  const std::size_t p = sigma.rows();
  linalg::Matrix c(p, p);
  std::vector<double> inv(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    if (sigma(j, j) > 0.0) inv[j] = 1.0 / std::sqrt(sigma(j, j));
  }
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      c(i, j) = i == j ? 1.0 : sigma(i, j) * inv[i] * inv[j];
    }
  }
  return c;
}

// Runs the selected test on a prepared model; ensembles honor the adaptive
// config, classical tests report a single-evaluation record.
ensemble::TestResult run_test(const CommonOpts& o, const LoadedModel& lm) {
  const std::size_t p = lm.model.dim();
  const ensemble::EnsembleConfig cfg = make_config(o, lm.mafs, p, "dir");

  if (o.test == "en-burden") return ensemble::en_burden(lm.model, cfg);
  if (o.test == "en-skat") return ensemble::en_skat(lm.model, cfg);
  if (o.test == "en-morst") {
    if (o.theta >= 0.0) {
      const double theta = o.theta;
      return ensemble::en_morst(lm.model, cfg,
                                [theta](const std::vector<double>&) { return theta; });
    }
    return ensemble::en_morst(lm.model, cfg);
  }
  if (o.test == "en-subset-chisq") {
    return ensemble::en_subset_chisq(standardized_z(lm.model),
                                     correlation_of(lm.model.sigma), cfg);
  }

  base::BaseResult br;
  if (o.test == "burden") {
    br = reference::original_burden(lm.model, resolve_weights(o, lm.mafs, p));
  } else if (o.test == "skat") {
    br = reference::original_skat(lm.model, resolve_weights(o, lm.mafs, p));
  } else if (o.test == "morst") {
    br = reference::original_morst(lm.model, resolve_weights(o, lm.mafs, p), o.theta);
  } else if (o.test == "chisq") {
    br = reference::full_chisq(standardized_z(lm.model),
                               correlation_of(lm.model.sigma));
  } else if (o.test == "hc" || o.test == "bj") {
    reference::CalibrationCache cache(o.calib_dir, o.calib_draws, 20260401,
                                      o.threads > 0 ? o.threads
                                                    : parallel::default_threads());
    br = o.test == "hc"
             ? reference::higher_criticism(standardized_z(lm.model), cache)
             : reference::berk_jones(standardized_z(lm.model), cache);
  } else {
    throw ConfigError("unknown --test '" + o.test + "'");
  }
  ensemble::TestResult r;
  r.p_value = br.p_value;
  r.statistic = br.statistic;
  r.B_used = 1;
  r.stop_reason = ensemble::StopReason::kBMax;
  r.path = {{1, br.p_value}};
  return r;
}

nlohmann::json result_json(const CommonOpts& o, const ensemble::TestResult& r) {
  nlohmann::json j;
  j["test"] = o.test;
  j["p_value"] = r.p_value;
  j["statistic"] = r.statistic;
  j["B_used"] = r.B_used;
  j["stop_reason"] = ensemble::to_string(r.stop_reason);
  nlohmann::json path = nlohmann::json::array();
  for (const auto& [b, pe] : r.path) path.push_back({b, pe});
  j["path"] = path;
  j["seed"] = o.seed;
  j["config_hash"] = io::hash_hex(config_record(o).dump());
  return j;
}

int cmd_test(const CommonOpts& o) {
  const LoadedModel lm = load_model(o);
  const ensemble::TestResult r = run_test(o, lm);
  std::cout << result_json(o, r).dump() << "\n";
  return 0;
}

int cmd_path(const CommonOpts& o_in) {
  CommonOpts o = o_in;
  o.no_early_stop = true;
  o.min_b = o.b_max;  // disable the stability stop as well
  const LoadedModel lm = load_model(o);
  if (o.test.rfind("en-", 0) != 0) {
    throw ConfigError("path output needs an ensemble test");
  }
  const ensemble::TestResult r = run_test(o, lm);
  std::printf("B\tp_en\n");
  for (const auto& [b, pe] : r.path) std::printf("%lld\t%.12g\n",
                                                 static_cast<long long>(b), pe);
  return 0;
}

int cmd_scan(const CommonOpts& o, std::size_t window, std::size_t skip) {
  if (o.geno_file.empty() || o.pheno_file.empty()) {
    throw ConfigError("scan needs --geno and --pheno");
  }
  if (window == 0 || skip == 0) throw ConfigError("--window and --skip must be >= 1");
  const io::TsvMatrix g = io::read_tsv_matrix(o.geno_file, o.header);
  const std::vector<double> y = io::read_tsv_vector(o.pheno_file, o.header);
  linalg::Matrix z(y.size(), 0);
  if (!o.covar_file.empty()) {
    z = io::read_tsv_matrix(o.covar_file, o.header).values;
  }
  const std::size_t n = g.values.rows();
  const std::size_t p = g.values.cols();
  if (n != y.size()) throw DataError("genotype rows != phenotype length");
  if (p < window) throw ConfigError("window is larger than the variant count");

  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= p; s += skip) starts.push_back(s);

  struct WindowRecord {
    std::size_t start, end;
    ensemble::TestResult res;
  };
  std::vector<WindowRecord> records(starts.size());
  const int threads = o.threads > 0 ? o.threads : parallel::default_threads();

  parallel::parallel_for(0, starts.size(), threads, [&](std::size_t widx) {
    const std::size_t s0 = starts[widx];
    linalg::Matrix sub(n, window);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < window; ++j) sub(i, j) = g.values(i, s0 + j);
    }
    CommonOpts local = o;
    local.threads = 1;  // windows are the parallel unit
    LoadedModel lm;
    lm.mafs.resize(window);
    for (std::size_t j = 0; j < window; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += sub(i, j);
      lm.mafs[j] = mean / (2.0 * static_cast<double>(n));
    }
    lm.model = score::from_regression(y, sub, z);
    const ensemble::EnsembleConfig cfg =
        make_config(local, lm.mafs, window, "scan:" + std::to_string(widx));
    ensemble::TestResult r;
    if (local.test == "en-burden") {
      r = ensemble::en_burden(lm.model, cfg);
    } else if (local.test == "en-skat") {
      r = ensemble::en_skat(lm.model, cfg);
    } else if (local.test == "en-morst") {
      r = ensemble::en_morst(lm.model, cfg);
    } else if (local.test == "en-subset-chisq") {
      r = ensemble::en_subset_chisq(standardized_z(lm.model),
                                    correlation_of(lm.model.sigma), cfg);
    } else {
      r = run_test(local, lm);
    }
    records[widx] = WindowRecord{s0, s0 + window - 1, std::move(r)};
  });

  std::printf("start\tend\tp_value\tB_used\tstop_reason\n");
  for (const WindowRecord& rec : records) {
    std::printf("%zu\t%zu\t%.12g\t%lld\t%s\n", rec.start + 1, rec.end + 1,
                rec.res.p_value, static_cast<long long>(rec.res.B_used),
                ensemble::to_string(rec.res.stop_reason));
  }
  return 0;
}

int cmd_simulate(const std::string& spec_path, const std::string& out_dir,
                 int threads) {
  std::ifstream in(spec_path);
  if (!in) throw DataError("cannot open '" + spec_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec JSON: ") + e.what());
  }
  sim::ExperimentSpec spec = sim::ExperimentSpec::from_json(j);
  if (threads > 0) spec.threads = threads;
  const sim::ExperimentTable table = sim::run(spec);
  std::filesystem::create_directories(out_dir);
  const std::string prefix =
      (std::filesystem::path(out_dir) / j.at("kind").get<std::string>()).string();
  table.write(prefix);
  std::cout << "wrote " << prefix << ".tsv and " << prefix << ".meta.json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble tests for global nulls"};
  app.require_subcommand(1);

  CommonOpts t_opts, p_opts, s_opts;
  std::size_t window = 0, skip = 1;
  std::string spec_path, out_dir = "entest-out";
  int sim_threads = 0;

  CLI::App* c_test = app.add_subcommand("test", "run one test on a dataset");
  add_common(c_test, &t_opts, true);

  CLI::App* c_path = app.add_subcommand("path", "emit the p-value path");
  add_common(c_path, &p_opts, true);

  CLI::App* c_scan = app.add_subcommand("scan", "sliding-window scan");
  add_common(c_scan, &s_opts, false);
  c_scan->add_option("--window", window, "window width in variants")->required();
  c_scan->add_option("--skip", skip, "step between window starts")->required();

  CLI::App* c_sim = app.add_subcommand("simulate", "run an experiment spec");
  c_sim->add_option("--spec", spec_path, "experiment spec JSON")->required();
  c_sim->add_option("--out", out_dir, "output directory");
  c_sim->add_option("--threads", sim_threads, "worker threads (0 = auto)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_test->parsed()) return cmd_test(t_opts);
    if (c_path->parsed()) return cmd_path(p_opts);
    if (c_scan->parsed()) return cmd_scan(s_opts, window, skip);
    if (c_sim->parsed()) return cmd_simulate(spec_path, out_dir, sim_threads);
  } catch (const entest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const entest::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
