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

#include "entest/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entest/dist.hpp"
#include "entest/errors.hpp"
#include "entest/kernels.hpp"
#include "entest/parallel.hpp"

namespace entest::ensemble {

namespace {

// Base p-values of exactly 1.0 (e.g. S = 0) must still pass through the tan
// transform; the largest double below 1 keeps them finite.
inline double clamp_base_p(double p) {
  constexpr double kHi = 1.0 - 1.1102230246251565e-16;  // nextafter(1, 0)
  if (!(p > dist::kProbFloor)) return dist::kProbFloor;
  if (p > kHi) return kHi;
  return p;
}

constexpr int kMaxResamples = 100;

}  // namespace

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kStable: return "stable";
    case StopReason::kFutility: return "futility";
    case StopReason::kSuperSignificant: return "super-significant";
    case StopReason::kBMax: return "B_max";
  }
  return "unknown";
}

const char* to_string(Family f) {
  switch (f) {
    case Family::kBurden: return "en-burden";
    case Family::kSkat: return "en-skat";
    case Family::kMorst: return "en-morst";
    case Family::kSubsetChisq: return "en-subset-chisq";
  }
  return "unknown";
}

EnsembleConfig EnsembleConfig::normalized() const {
  EnsembleConfig c = *this;
  if (c.B_max < 1) throw ConfigError("B_max must be >= 1");
  if (c.block < 1) throw ConfigError("block must be >= 1");
  if (c.min_B < 1) throw ConfigError("min_B must be >= 1");
  if (!(c.stability_tol > 0.0)) throw ConfigError("stability_tol must be > 0");
  if (!(c.futility_margin > 0.0) || !(c.supersig_margin > 0.0)) {
    throw ConfigError("stopping margins must be > 0");
  }
  if (c.target_alpha && !(*c.target_alpha > 0.0 && *c.target_alpha < 1.0)) {
    throw ConfigError("target_alpha must lie in (0,1)");
  }
  if (c.threads < 1) c.threads = 1;
  c.block = std::min(c.block, c.B_max);
  c.min_B = std::min(c.min_B, c.B_max);
  return c;
}

TestResult run_adaptive(const BasePGenerator& gen, const EnsembleConfig& cfg_in) {
  const EnsembleConfig cfg = cfg_in.normalized();
  TestResult res;
  res.base_p.reserve(cfg.block);
  acat::RunningCombine rc;
  std::vector<double> block_p;

  std::int64_t b_done = 0;
  while (b_done < cfg.B_max) {
    const std::int64_t b_next = std::min(cfg.B_max, b_done + cfg.block);
    const std::size_t count = static_cast<std::size_t>(b_next - b_done);
    block_p.assign(count, 0.0);
    parallel::parallel_for(0, count, cfg.threads, [&](std::size_t k) {
      block_p[k] = gen(static_cast<std::uint64_t>(b_done) + k);
    });
    for (std::size_t k = 0; k < count; ++k) {
      const double p = clamp_base_p(block_p[k]);
      res.base_p.push_back(p);
      rc.add(p);
    }
    b_done = b_next;

    const acat::Combined cur = rc.current();
    res.path.emplace_back(b_done, cur.p_value);
    res.p_value = cur.p_value;
    res.statistic = cur.statistic;
    res.B_used = b_done;

    if (cfg.target_alpha &&
        cur.p_value < cfg.supersig_margin * (*cfg.target_alpha)) {
      res.stop_reason = StopReason::kSuperSignificant;
      return res;
    }
    if (b_done >= cfg.min_B) {
      if (cfg.target_alpha &&
          cur.p_value > cfg.futility_margin * (*cfg.target_alpha)) {
        res.stop_reason = StopReason::kFutility;
        return res;
      }
      // stability over the last (up to) three block deltas
      const std::size_t pts = res.path.size();
      if (pts >= 2) {
        const std::size_t deltas = std::min<std::size_t>(3, pts - 1);
        bool stable = true;
        for (std::size_t d = 0; d < deltas; ++d) {
          const double a = std::log10(res.path[pts - 1 - d].second);
          const double b = std::log10(res.path[pts - 2 - d].second);
          if (std::fabs(a - b) > cfg.stability_tol) {
            stable = false;
            break;
          }
        }
        if (stable) {
          res.stop_reason = StopReason::kStable;
          return res;
        }
      }
    }
  }
  res.stop_reason = StopReason::kBMax;
  return res;
}

// ---------------------------------------------------------------------------
// One-shot ensemble tests
// ---------------------------------------------------------------------------

namespace {

// Retries draws whose base statistic is degenerate for this model; the
// stream simply continues, so resampling stays deterministic per index.
template <typename DrawEval>
double resample_loop(const DrawEval& draw_eval) {
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    try {
      return draw_eval();
    } catch (const DegenerateDrawError&) {
      continue;
    }
  }
  throw NumericalError("base test degenerate after 100 resamples");
}

void check_model_law(const score::ScoreModel& model, const EnsembleConfig& cfg) {
  if (model.dim() == 0) throw DataError("empty score model");
  if (cfg.law.kind == sampling::WeightLaw::Kind::kAuxiliaryWeightedSphere &&
      cfg.law.aux.size() != model.dim()) {
    throw ConfigError("auxiliary weight length does not match model dimension");
  }
}

}  // namespace

TestResult en_burden(const score::ScoreModel& model, const EnsembleConfig& cfg) {
  check_model_law(model, cfg);
  const std::size_t p = model.dim();
  auto gen = [&model, &cfg, p](std::uint64_t i) -> double {
    rng::Philox stream = rng::stream_for(cfg.seed, i);
    std::vector<double> w(p);
    return resample_loop([&]() {
      sampling::sample_positive_direction(p, cfg.law, stream, w.data());
      return base::burden(model, w.data()).p_value;
    });
  };
  return run_adaptive(gen, cfg);
}

TestResult en_skat(const score::ScoreModel& model, const EnsembleConfig& cfg) {
  check_model_law(model, cfg);
  const std::size_t p = model.dim();
  auto gen = [&model, &cfg, p](std::uint64_t i) -> double {
    rng::Philox stream = rng::stream_for(cfg.seed, i);
    std::vector<double> w(p);
    return resample_loop([&]() {
      sampling::sample_positive_direction(p, cfg.law, stream, w.data());
      return base::skat(model, w.data()).p_value;
    });
  };
  return run_adaptive(gen, cfg);
}

TestResult en_morst(const score::ScoreModel& model, const EnsembleConfig& cfg,
                    const ThetaRule& theta_rule) {
  check_model_law(model, cfg);
  const std::size_t p = model.dim();
  auto gen = [&model, &cfg, &theta_rule, p](std::uint64_t i) -> double {
    rng::Philox stream = rng::stream_for(cfg.seed, i);
    std::vector<double> w(p);
    return resample_loop([&]() {
      sampling::sample_positive_direction(p, cfg.law, stream, w.data());
      // the theta rule sees the eigenvalues of W Sigma W
      linalg::Matrix m(p, p);
      for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
          m(a, b) = w[a] * model.sigma(a, b) * w[b];
        }
      }
      const std::vector<double> mu = linalg::sym_eigenvalues(m);
      const double theta =
          theta_rule ? theta_rule(mu) : base::morst_default_theta(mu);
      return base::morst(model, w.data(), theta).p_value;
    });
  };
  return run_adaptive(gen, cfg);
}

TestResult en_subset_chisq(const std::vector<double>& z,
                           const linalg::Matrix& omega,
                           const EnsembleConfig& cfg) {
  const std::size_t p = z.size();
  if (p == 0) throw DataError("empty score vector");
  const std::size_t s = cfg.subset_size
                            ? *cfg.subset_size
                            : static_cast<std::size_t>(
                                  std::floor(std::sqrt(static_cast<double>(p))));
  if (s < 1 || s > p) throw ConfigError("subset size must satisfy 1 <= s <= p");
  auto gen = [&z, &omega, &cfg, p, s](std::uint64_t i) -> double {
    rng::Philox stream = rng::stream_for(cfg.seed, i);
    std::vector<std::uint32_t> idx;
    int attempts = 0;
    for (;;) {
      sampling::sample_subset(p, s, stream, &idx);
      try {
        return base::subset_chisq(z, omega, idx).p_value;
      } catch (const DegenerateDrawError&) {
        if (++attempts >= kMaxResamples) {
          throw DataError("more than 100 consecutive degenerate subsets");
        }
      }
    }
  };
  return run_adaptive(gen, cfg);
}

// ---------------------------------------------------------------------------
// Tail tables and prepared arms
// ---------------------------------------------------------------------------

MixtureTailTable::MixtureTailTable(const dist::MixtureSpec& spec, int nodes)
    : spec_(spec) {
  // Upper grid end: walk out to tail probability ~1e-15 (deep-tail calls are
  // cheap, so the exact fallback past the grid is fine).
  double mean = 0.0;
  for (const double l : spec.eigenvalues) mean += l;
  double hi = std::max(mean, spec.eigenvalues.front());
  while (dist::mixture_sf(hi, spec_).p > 1e-15) hi *= 1.7;

  // log p interpolated against u = sqrt(x): finite slope at zero even for
  // chi^2(1)-dominated mixtures, and the uniform u-grid makes lookup O(1).
  const int n = std::max(16, nodes);
  x_.resize(n);
  logp_.resize(n);
  du_ = std::sqrt(hi) / (n - 1);
  for (int k = 0; k < n; ++k) {
    const double u = du_ * k;
    x_[k] = u;
    logp_[k] = std::log(dist::mixture_sf(u * u, spec_).p);
  }
  slope_.resize(n);
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      slope_[k] = (logp_[1] - logp_[0]) / du_;
    } else if (k == n - 1) {
      slope_[k] = (logp_[k] - logp_[k - 1]) / du_;
    } else {
      slope_[k] = 0.5 * (logp_[k + 1] - logp_[k - 1]) / du_;
    }
    if (slope_[k] > 0.0) slope_[k] = 0.0;
  }
}

double MixtureTailTable::sf(double x) const {
  if (x <= 0.0) return 1.0;
  const double u = std::sqrt(x);
  if (x_.empty() || u >= x_.back()) {
    return dist::mixture_sf(x, spec_).p;
  }
  const std::size_t k =
      std::min(static_cast<std::size_t>(u / du_), x_.size() - 2);
  const double t = (u - x_[k]) / du_;
  const double y0 = logp_[k];
  const double y1 = logp_[k + 1];
  const double m0 = slope_[k] * du_;
  const double m1 = slope_[k + 1] * du_;
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double v = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * m0 +
                   (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * m1;
  return dist::clamp_probability(std::exp(v));
}

PreparedArm PreparedArm::build(Family family, const linalg::Matrix& sigma,
                               const EnsembleConfig& cfg_in,
                               const ThetaRule& theta_rule, bool tail_tables) {
  const EnsembleConfig cfg = cfg_in.normalized();
  const std::size_t p = sigma.rows();
  if (p == 0 || sigma.cols() != p) throw DataError("invalid covariance");

  PreparedArm arm;
  arm.family_ = family;
  arm.p_ = p;
  arm.dirs_.resize(cfg.B_max);

  double diag_max = 0.0;
  for (std::size_t i = 0; i < p; ++i) diag_max = std::max(diag_max, sigma(i, i));
  const double degen_tol = 1e-12 * std::max(diag_max, 1e-300);

  const std::size_t subset_s =
      cfg.subset_size ? *cfg.subset_size
                      : static_cast<std::size_t>(
                            std::floor(std::sqrt(static_cast<double>(p))));
  if (family == Family::kSubsetChisq && (subset_s < 1 || subset_s > p)) {
    throw ConfigError("subset size must satisfy 1 <= s <= p");
  }

  parallel::parallel_for(0, static_cast<std::size_t>(cfg.B_max), cfg.threads,
                         [&](std::size_t i) {
    Direction& d = arm.dirs_[i];
    rng::Philox stream = rng::stream_for(cfg.seed, i);
    for (int attempt = 0;; ++attempt) {
      if (attempt >= kMaxResamples) {
        throw NumericalError("prepared arm: degenerate draws for index " +
                             std::to_string(i));
      }
      if (family == Family::kSubsetChisq) {
        sampling::sample_subset(p, subset_s, stream, &d.idx);
        linalg::Matrix sub(subset_s, subset_s);
        for (std::size_t a = 0; a < subset_s; ++a) {
          for (std::size_t b = 0; b < subset_s; ++b) {
            sub(a, b) = sigma(d.idx[a], d.idx[b]);
          }
        }
        const auto es = linalg::sym_eigen(sub);
        if (!(es.values.back() > 0.0) ||
            es.values.front() / es.values.back() > 1e8) {
          continue;
        }
        d.sub_chol = linalg::cholesky(sub);
        d.df = static_cast<int>(subset_s);
        return;
      }

      d.w.resize(p);
      sampling::sample_positive_direction(p, cfg.law, stream, d.w.data());
      if (family == Family::kBurden) {
        const double den2 = kernels::quad_form(sigma.data(), d.w.data(), p);
        if (!(den2 > degen_tol)) continue;
        d.denom = std::sqrt(den2);
        return;
      }

      linalg::Matrix m(p, p);
      for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < p; ++b) {
          m(a, b) = d.w[a] * sigma(a, b) * d.w[b];
        }
      }
      std::vector<double> mu = linalg::sym_eigenvalues(m);
      if (!(mu.front() > degen_tol)) continue;

      if (family == Family::kSkat) {
        d.mixture = dist::MixtureSpec::from(std::move(mu));
      } else {  // morst
        d.theta = theta_rule ? theta_rule(mu) : base::morst_default_theta(mu);
        if (!(d.theta >= 0.0)) throw ConfigError("theta rule returned < 0");
        std::vector<double> null_ev(p);
        for (std::size_t k = 0; k < p; ++k) {
          null_ev[k] = mu[k] / (1.0 + d.theta * mu[k]);
        }
        d.mixture = dist::MixtureSpec::from(std::move(null_ev));
        for (std::size_t a = 0; a < p; ++a) {
          for (std::size_t b = 0; b < p; ++b) m(a, b) *= d.theta;
          m(a, a) += 1.0;
        }
        d.chol = linalg::cholesky(m);
      }
      if (tail_tables) d.table = MixtureTailTable(d.mixture);
      return;
    }
  });
  return arm;
}

double PreparedArm::base_p(const double* s, std::int64_t i) const {
  const Direction& d = dirs_[static_cast<std::size_t>(i)];
  switch (family_) {
    case Family::kBurden: {
      const double stat = kernels::dot(d.w.data(), s, p_) / d.denom;
      return dist::two_sided_normal_p(stat);
    }
    case Family::kSkat: {
      const double stat = kernels::weighted_sumsq(d.w.data(), s, p_);
      return d.table.empty() ? dist::mixture_sf(stat, d.mixture).p
                             : d.table.sf(stat);
    }
    case Family::kMorst: {
      // |L^{-1} (w o s)|^2 with L L^T = I + theta W Sigma W
      std::vector<double> v(p_);
      for (std::size_t j = 0; j < p_; ++j) v[j] = d.w[j] * s[j];
      double stat = 0.0;
      for (std::size_t j = 0; j < p_; ++j) {
        const double y =
            (v[j] - kernels::dot(d.chol.row(j), v.data(), j)) / d.chol(j, j);
        v[j] = y;
        stat += y * y;
      }
      return d.table.empty() ? dist::mixture_sf(stat, d.mixture).p
                             : d.table.sf(stat);
    }
    case Family::kSubsetChisq: {
      const std::size_t m = d.idx.size();
      std::vector<double> zs(m);
      for (std::size_t a = 0; a < m; ++a) zs[a] = s[d.idx[a]];
      double stat = 0.0;
      for (std::size_t a = 0; a < m; ++a) {
        const double y =
            (zs[a] - kernels::dot(d.sub_chol.row(a), zs.data(), a)) /
            d.sub_chol(a, a);
        zs[a] = y;
        stat += y * y;
      }
      return dist::chisq_sf(stat, d.df);
    }
  }
  throw NumericalError("unreachable");
}

acat::Combined PreparedArm::evaluate(const double* s, std::int64_t b) const {
  const std::int64_t n = std::min<std::int64_t>(b, size());
  if (n < 1) throw ConfigError("prepared arm: need at least one base test");
  acat::RunningCombine rc;
  for (std::int64_t i = 0; i < n; ++i) {
    double p = base_p(s, i);
    constexpr double kHi = 1.0 - 1.1102230246251565e-16;
    if (!(p > dist::kProbFloor)) p = dist::kProbFloor;
    if (p > kHi) p = kHi;
    rc.add(p);
  }
  return rc.current();
}

}  // namespace entest::ensemble
