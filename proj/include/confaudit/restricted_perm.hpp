#pragma once

// Restricted permutation of labels within confounder levels, the permutation
// null distribution of the covariance, and its analytic expectation
//
//   E[Cov(X, Y*)] = Cov(X, Y) - Cov(X, Y | A) = Cov(X, A) Cov(Y, A) / Var(A)
//
// together with the standardized-scale decomposition
//
//   theta_xa * theta_ya + theta_xy * theta_ya^2
//
// whose first term is the confounder-only association and whose second term
// is the bias of the permutation-null location as an estimate of it.
//
// The analytic mean is finite-sample exact (1/(n-1) convention) whenever the
// level means of X and Y are linear in the level values of A — in particular
// for any binary confounder. Levels are formed by exact value equality;
// discretize continuous confounders upstream.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "confaudit/assoc_stats.hpp"
#include "confaudit/errors.hpp"
#include "confaudit/linear_scm.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {

// Uniformly permute y within each exact-value level of a.
inline std::vector<double> restricted_shuffle(std::span<const double> y,
                                              std::span<const double> a,
                                              std::uint64_t seed) {
  detail::require_same_length(y, a);
  if (y.empty()) throw SpecError("restricted_shuffle needs n >= 1");
  const auto groups = detail::level_groups(a);
  std::vector<double> out(y.begin(), y.end());
  std::vector<double> scratch;
  Rng rng(seed);
  for (const auto& g : groups) {
    scratch.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) scratch[k] = out[g[k]];
    rng.shuffle(scratch);
    for (std::size_t k = 0; k < g.size(); ++k) out[g[k]] = scratch[k];
  }
  return out;
}

struct RestrictedPermNull {
  std::vector<double> stats;     // Cov(x, y*) per shuffle
  double observed = 0.0;         // Cov(x, y)
  double analytic_mean = 0.0;    // Cov(x,a) Cov(y,a) / Var(a)
  double confounder_only = 0.0;  // theta_xa_hat * theta_ya_hat
  std::size_t n = 0;

  double perm_mean() const {
    // Pairwise summation keeps the mean independent of accumulation order.
    return pairwise_sum(0, stats.size()) / static_cast<double>(stats.size());
  }

  double perm_sd() const {
    const double m = perm_mean();
    double ss = 0.0;
    for (double v : stats) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(stats.size() - 1));
  }

 private:
  double pairwise_sum(std::size_t lo, std::size_t hi) const {
    if (hi - lo <= 8) {
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) s += stats[i];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(lo, mid) + pairwise_sum(mid, hi);
  }
};

// Null distribution of Cov(x, y*) over B restricted shuffles, with the
// analytic expectation and the regression-based confounder-only estimate.
inline RestrictedPermNull perm_null_covariance(std::span<const double> x,
                                               std::span<const double> y,
                                               std::span<const double> a, std::size_t B,
                                               std::uint64_t seed) {
  detail::require_same_length(x, y);
  detail::require_same_length(x, a);
  if (B < 1) throw SpecError("perm_null_covariance needs B >= 1");
  const double va = variance(a);
  if (va <= 0.0) throw DegenerateConfounderError("confounder has zero variance");

  RestrictedPermNull out;
  out.n = x.size();
  out.observed = covariance(x, y);
  out.analytic_mean = covariance(x, a) * covariance(y, a) / va;

  if (variance(y) > 0.0 && variance(x) > 0.0) {
    // Path coefficients are the regression coefficients of the standardized
    // data; estimated on internally standardized copies.
    std::vector<double> sx(x.begin(), x.end());
    std::vector<double> sy(y.begin(), y.end());
    std::vector<double> sa(a.begin(), a.end());
    detail::standardize_column(sx, "x");
    detail::standardize_column(sy, "y");
    detail::standardize_column(sa, "a");
    const PathEstimate e = path_regression(sx, sy, sa);
    out.confounder_only = e.theta_xa * e.theta_ya;
  }

  out.stats.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto y_star = restricted_shuffle(y, a, derive_seed(seed, {b}));
    out.stats[b] = covariance(x, y_star);
  }
  return out;
}

struct BiasDecomposition {
  double analytic_mean = 0.0;    // theta_xa theta_ya + theta_xy theta_ya^2
  double confounder_only = 0.0;  // theta_xa theta_ya
  double bias = 0.0;             // theta_xy theta_ya^2
};

inline BiasDecomposition bias_decomposition(const PathModel& m) {
  BiasDecomposition d;
  d.confounder_only = m.theta_xa * m.theta_ya;
  d.bias = m.theta_xy * m.theta_ya * m.theta_ya;
  d.analytic_mean = d.confounder_only + d.bias;
  return d;
}

// Grand mean over B shuffles of the size-weighted within-level covariances
// Cov(x, y* | a = level); converges to 0 as B grows. Singleton levels
// contribute 0.
inline double within_level_null_check(std::span<const double> x,
                                      std::span<const double> y,
                                      std::span<const double> a, std::size_t B,
                                      std::uint64_t seed) {
  detail::require_same_length(x, y);
  detail::require_same_length(x, a);
  if (B < 1) throw SpecError("within_level_null_check needs B >= 1");
  if (variance(a) <= 0.0) throw DegenerateConfounderError("confounder has zero variance");

  const auto groups = detail::level_groups(a);
  const double n = static_cast<double>(x.size());
  std::vector<double> per_shuffle(B);
  std::vector<double> gx, gy;
  for (std::size_t b = 0; b < B; ++b) {
    const auto y_star = restricted_shuffle(y, a, derive_seed(seed, {b}));
    double value = 0.0;
    for (const auto& g : groups) {
      if (g.size() < 2) continue;
      gx.resize(g.size());
      gy.resize(g.size());
      for (std::size_t k = 0; k < g.size(); ++k) {
        gx[k] = x[g[k]];
        gy[k] = y_star[g[k]];
      }
      value += (static_cast<double>(g.size()) / n) * covariance(gx, gy);
    }
    per_shuffle[b] = value;
  }
  double total = 0.0;
  for (double v : per_shuffle) total += v;
  return total / static_cast<double>(B);
}

}  // namespace confaudit
