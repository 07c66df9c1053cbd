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

#include "entest/reference_tests.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "entest/dist.hpp"
#include "entest/errors.hpp"
#include "entest/kernels.hpp"
#include "entest/parallel.hpp"
#include "entest/rng.hpp"

namespace entest::reference {

namespace {

std::vector<double> normalize_weights(const std::vector<double>& a) {
  if (a.empty()) throw std::domain_error("weight vector must be nonempty");
  for (const double v : a) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::domain_error("weights must be finite and positive");
    }
  }
  const double norm = std::sqrt(kernels::sumsq(a.data(), a.size()));
  std::vector<double> w(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) w[i] = a[i] / norm;
  return w;
}

}  // namespace

base::BaseResult original_burden(const score::ScoreModel& model,
                                 const std::vector<double>& a) {
  return base::burden(model, normalize_weights(a).data());
}

base::BaseResult original_skat(const score::ScoreModel& model,
                               const std::vector<double>& a) {
  return base::skat(model, normalize_weights(a).data());
}

base::BaseResult original_morst(const score::ScoreModel& model,
                                const std::vector<double>& a, double theta) {
  const std::vector<double> w = normalize_weights(a);
  if (theta < 0.0) {
    const std::size_t p = model.dim();
    linalg::Matrix m(p, p);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) m(i, j) = w[i] * model.sigma(i, j) * w[j];
    }
    theta = base::morst_default_theta(linalg::sym_eigenvalues(m));
  }
  return base::morst(model, w.data(), theta);
}

base::BaseResult full_chisq(const std::vector<double>& z,
                            const linalg::Matrix& omega) {
  const std::size_t p = z.size();
  if (p == 0) throw std::domain_error("empty score vector");
  if (omega.rows() != p || omega.cols() != p) {
    throw std::domain_error("correlation matrix does not match score vector");
  }
  linalg::Matrix l;
  try {
    l = linalg::cholesky(omega);
  } catch (const DataError&) {
    throw std::domain_error("full_chisq: correlation matrix is singular");
  }
  std::vector<double> y = z;
  double stat = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double v = (y[i] - kernels::dot(l.row(i), y.data(), i)) / l(i, i);
    y[i] = v;
    stat += v * v;
  }
  base::BaseResult r;
  r.null_kind = base::NullKind::kChiSquared;
  r.df = static_cast<int>(p);
  r.statistic = stat;
  r.p_value = dist::chisq_sf(stat, r.df);
  return r;
}

namespace {

std::vector<double> sorted_two_sided_p(const std::vector<double>& z) {
  std::vector<double> ps(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    ps[i] = std::min(dist::two_sided_normal_p(z[i]), 1.0 - 1e-15);
  }
  std::sort(ps.begin(), ps.end());
  return ps;
}

}  // namespace

double hc_statistic(const std::vector<double>& z) {
  const std::size_t p = z.size();
  if (p < 2) throw std::domain_error("higher criticism needs p >= 2");
  const std::vector<double> ps = sorted_two_sided_p(z);
  const double sp = std::sqrt(static_cast<double>(p));
  const double inv_p = 1.0 / static_cast<double>(p);
  double best = -std::numeric_limits<double>::infinity();
  bool restricted_hit = false;
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 1; j <= p / 2; ++j) {
      const double pj = ps[j - 1];
      if (pass == 0 && !(pj > inv_p)) continue;
      const double frac = static_cast<double>(j) * inv_p;
      const double term = sp * (frac - pj) / std::sqrt(pj * (1.0 - pj));
      best = std::max(best, term);
      restricted_hit = true;
    }
    if (restricted_hit) break;  // second pass only if the filter emptied it
    best = -std::numeric_limits<double>::infinity();
  }
  return best;
}

double bj_statistic(const std::vector<double>& z) {
  const std::size_t p = z.size();
  if (p < 2) throw std::domain_error("berk-jones needs p >= 2");
  const std::vector<double> ps = sorted_two_sided_p(z);
  const double dp = static_cast<double>(p);
  double best = 0.0;
  for (std::size_t j = 1; j <= p / 2; ++j) {
    const double a = static_cast<double>(j) / dp;
    const double b = ps[j - 1];
    if (!(b < a)) continue;  // one-sided: only deficits count
    const double kl = a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
    best = std::max(best, dp * kl);
  }
  return best;
}

CalibrationTable CalibrationTable::build(const std::string& test, std::size_t p,
                                         std::size_t draws, std::uint64_t seed,
                                         int threads) {
  if (test != "hc" && test != "bj") {
    throw ConfigError("unknown calibration test '" + test + "'");
  }
  CalibrationTable t;
  t.test_ = test;
  t.p_ = p;
  t.seed_ = seed;
  t.stats_.assign(draws, 0.0);
  const rng::SeedSpec spec{seed, "calibration:" + test};
  const bool is_hc = test == "hc";
  parallel::parallel_for(0, draws, threads, [&](std::size_t r) {
    rng::Philox stream = rng::stream_for(spec, r);
    std::vector<double> z(p);
    for (std::size_t j = 0; j < p; ++j) z[j] = stream.next_normal();
    t.stats_[r] = is_hc ? hc_statistic(z) : bj_statistic(z);
  });
  std::sort(t.stats_.begin(), t.stats_.end());
  return t;
}

double CalibrationTable::p_value(double stat) const {
  const auto it = std::lower_bound(stats_.begin(), stats_.end(), stat);
  const std::size_t count_ge = stats_.end() - it;
  return static_cast<double>(count_ge + 1) / static_cast<double>(stats_.size() + 1);
}

namespace {

std::string table_stem(const std::string& test, std::size_t p, std::size_t draws,
                       std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s_p%zu_d%zu_s%llu", test.c_str(), p, draws,
                static_cast<unsigned long long>(seed));
  return buf;
}

std::uint64_t hash_doubles(const std::vector<double>& v) {
  return rng::fnv1a64(std::string_view(
      reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)));
}

}  // namespace

void CalibrationTable::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string stem = table_stem(test_, p_, stats_.size(), seed_);
  const fs::path bin = fs::path(dir) / (stem + ".bin");
  const fs::path man = fs::path(dir) / (stem + ".json");
  {
    std::ofstream out(bin, std::ios::binary);
    out.write(reinterpret_cast<const char*>(stats_.data()),
              static_cast<std::streamsize>(stats_.size() * sizeof(double)));
    if (!out) throw DataError("failed to write " + bin.string());
  }
  nlohmann::json j;
  j["version"] = 1;
  j["test"] = test_;
  j["p"] = p_;
  j["draws"] = stats_.size();
  j["seed"] = seed_;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash_doubles(stats_)));
  j["content_hash"] = hex;
  std::ofstream out(man);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed to write " + man.string());
}

std::optional<CalibrationTable> CalibrationTable::load(const std::string& dir,
                                                       const std::string& test,
                                                       std::size_t p,
                                                       std::size_t draws,
                                                       std::uint64_t seed) {
  namespace fs = std::filesystem;
  const std::string stem = table_stem(test, p, draws, seed);
  const fs::path bin = fs::path(dir) / (stem + ".bin");
  const fs::path man = fs::path(dir) / (stem + ".json");
  if (!fs::exists(bin) || !fs::exists(man)) return std::nullopt;

  nlohmann::json j;
  {
    std::ifstream in(man);
    try {
      in >> j;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }
  if (j.value("version", 0) != 1 || j.value("test", "") != test ||
      j.value("p", std::size_t{0}) != p ||
      j.value("draws", std::size_t{0}) != draws ||
      j.value("seed", std::uint64_t{0}) != seed) {
    return std::nullopt;
  }
  CalibrationTable t;
  t.test_ = test;
  t.p_ = p;
  t.seed_ = seed;
  t.stats_.assign(draws, 0.0);
  std::ifstream in(bin, std::ios::binary);
  in.read(reinterpret_cast<char*>(t.stats_.data()),
          static_cast<std::streamsize>(draws * sizeof(double)));
  if (!in || in.gcount() != static_cast<std::streamsize>(draws * sizeof(double))) {
    return std::nullopt;
  }
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash_doubles(t.stats_)));
  if (j.value("content_hash", "") != hex) return std::nullopt;
  return t;
}

CalibrationCache::CalibrationCache(std::string dir, std::size_t draws,
                                   std::uint64_t seed, int threads)
    : dir_(std::move(dir)), draws_(draws), seed_(seed), threads_(threads) {}

const CalibrationTable& CalibrationCache::table_for(const std::string& test,
                                                    std::size_t p) {
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (keys_[i].first == test && keys_[i].second == p) return *tables_[i];
  }
  if (!dir_.empty()) {
    if (auto t = CalibrationTable::load(dir_, test, p, draws_, seed_)) {
      keys_.emplace_back(test, p);
      tables_.push_back(std::make_unique<CalibrationTable>(std::move(*t)));
      return *tables_.back();
    }
  }
  CalibrationTable t = CalibrationTable::build(test, p, draws_, seed_, threads_);
  if (!dir_.empty()) t.save(dir_);
  keys_.emplace_back(test, p);
  tables_.push_back(std::make_unique<CalibrationTable>(std::move(t)));
  return *tables_.back();
}

base::BaseResult higher_criticism(const std::vector<double>& z,
                                  CalibrationCache& cache) {
  base::BaseResult r;
  r.null_kind = base::NullKind::kTwoSidedNormal;  // statistic-level MC null
  r.statistic = hc_statistic(z);
  r.p_value = cache.table_for("hc", z.size()).p_value(r.statistic);
  return r;
}

base::BaseResult berk_jones(const std::vector<double>& z,
                            CalibrationCache& cache) {
  base::BaseResult r;
  r.null_kind = base::NullKind::kTwoSidedNormal;
  r.statistic = bj_statistic(z);
  r.p_value = cache.table_for("bj", z.size()).p_value(r.statistic);
  return r;
}

}  // namespace entest::reference
