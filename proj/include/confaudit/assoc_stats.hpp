#pragma once

// Marginal and partial association measures with significance tests.
//
// Conventions fixed across the library:
//   - sample covariance and variance use the 1/(n-1) estimator;
//   - ranks are mid-ranks (ties share the average rank);
//   - Spearman p-values use the t approximation on n-2 df, with a
//     deterministic permutation fallback below n = 30;
//   - permutation p-values are (1 + #{T_b >= T_obs}) / (B + 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "confaudit/errors.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {

enum class TestMethod { pearson, spearman, partial_spearman, dcor_perm, pdcor_perm };

inline const char* test_method_name(TestMethod m) {
  switch (m) {
    case TestMethod::pearson: return "pearson";
    case TestMethod::spearman: return "spearman";
    case TestMethod::partial_spearman: return "partial_spearman";
    case TestMethod::dcor_perm: return "dcor_perm";
    case TestMethod::pdcor_perm: return "pdcor_perm";
  }
  return "?";
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::pearson;
  std::size_t n = 0;
  std::optional<std::size_t> permutations;  // B, when a permutation p-value was used
  bool degenerate = false;                  // e.g. constant input handled by convention
};

namespace detail {

inline void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("input vectors differ in length");
}

// Indices of `a` grouped by exact value, in ascending value order.
inline std::vector<std::vector<std::size_t>> level_groups(std::span<const double> a) {
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < a.size(); ++i) groups[a[i]].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(groups.size());
  for (auto& [value, idx] : groups) out.push_back(std::move(idx));
  return out;
}

inline double two_sided_t_pvalue(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t_distribution<double> dist(df);
  return 2.0 * boost::math::cdf(dist, -std::fabs(t));
}

}  // namespace detail

inline double mean(std::span<const double> x) {
  if (x.empty()) throw SpecError("mean of empty vector");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw SpecError("variance needs n >= 2");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

inline double covariance(std::span<const double> x, std::span<const double> y) {
  detail::require_same_length(x, y);
  if (x.size() < 2) throw SpecError("covariance needs n >= 2");
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

// Cov(X,Y) - Cov(X,A) Var(A)^-1 Cov(Y,A), all sample moments.
inline double partial_covariance(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> a) {
  detail::require_same_length(x, y);
  detail::require_same_length(x, a);
  const double va = variance(a);
  if (va <= 0.0) throw DegenerateConfounderError("confounder has zero variance");
  return covariance(x, y) - covariance(x, a) * covariance(y, a) / va;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double vx = variance(x);
  const double vy = variance(y);
  if (vx <= 0.0 || vy <= 0.0) throw DegenerateColumnError("constant input to correlation");
  return covariance(x, y) / std::sqrt(vx * vy);
}

// Mid-ranks, 1-based; ties share the average of their order positions.
inline std::vector<double> midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

constexpr std::size_t kSpearmanPermFallbackN = 30;
constexpr std::size_t kSpearmanPermB = 2000;
constexpr std::uint64_t kSpearmanPermSeed = 0x5eedf00dULL;

}  // namespace detail

// Spearman rank correlation; two-sided p-value.
inline TestResult spearman(std::span<const double> x, std::span<const double> y) {
  detail::require_same_length(x, y);
  const std::size_t n = x.size();
  if (n < 5) throw SpecError("spearman needs n >= 5");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double rs = pearson(rx, ry);

  TestResult out;
  out.statistic = rs;
  out.method = TestMethod::spearman;
  out.n = n;

  if (n < detail::kSpearmanPermFallbackN) {
    // Small-sample permutation p-value; deterministic by construction.
    Rng rng(derive_seed(detail::kSpearmanPermSeed, {n}));
    std::vector<double> perm(ry.begin(), ry.end());
    std::size_t count = 0;
    const double t_obs = std::fabs(rs);
    for (std::size_t b = 0; b < detail::kSpearmanPermB; ++b) {
      rng.shuffle(perm);
      if (std::fabs(pearson(rx, perm)) >= t_obs - 1e-14) ++count;
    }
    out.p_value = static_cast<double>(1 + count) /
                  static_cast<double>(detail::kSpearmanPermB + 1);
    out.permutations = detail::kSpearmanPermB;
    return out;
  }

  const double denom = 1.0 - rs * rs;
  if (denom <= 1e-15) {
    out.p_value = 0.0;
    return out;
  }
  const double t = rs * std::sqrt(static_cast<double>(n - 2) / denom);
  out.p_value = detail::two_sided_t_pvalue(t, static_cast<double>(n - 2));
  return out;
}

// First-order partial rank correlation r_xy.a on mid-ranks; t on n-3 df.
inline TestResult partial_spearman(std::span<const double> x, std::span<const double> y,
                                   std::span<const double> a) {
  detail::require_same_length(x, y);
  detail::require_same_length(x, a);
  const std::size_t n = x.size();
  if (n < 6) throw SpecError("partial_spearman needs n >= 6");
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const auto ra = midranks(a);
  const double r_xy = pearson(rx, ry);
  const double r_xa = pearson(rx, ra);
  const double r_ya = pearson(ry, ra);
  const double dx = 1.0 - r_xa * r_xa;
  const double dy = 1.0 - r_ya * r_ya;
  if (dx <= 1e-12 || dy <= 1e-12)
    throw CollinearityError("conditioning variable is collinear with an input");
  double pr = (r_xy - r_xa * r_ya) / std::sqrt(dx * dy);
  pr = std::clamp(pr, -1.0, 1.0);

  TestResult out;
  out.statistic = pr;
  out.method = TestMethod::partial_spearman;
  out.n = n;
  const double denom = 1.0 - pr * pr;
  if (denom <= 1e-15) {
    out.p_value = 0.0;
    return out;
  }
  const double t = pr * std::sqrt(static_cast<double>(n - 3) / denom);
  out.p_value = detail::two_sided_t_pvalue(t, static_cast<double>(n - 3));
  return out;
}

// Regression coefficients of standardized x on standardized (y, a), plus the
// (y, a) correlation: the sample analogue of the standardized path model.
struct PathEstimate {
  double theta_xy = 0.0;
  double theta_xa = 0.0;
  double theta_ya = 0.0;
};

inline PathEstimate path_regression(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> a) {
  const double r_xy = pearson(x, y);
  const double r_xa = pearson(x, a);
  const double r_ya = pearson(y, a);
  const double denom = 1.0 - r_ya * r_ya;
  if (denom <= 1e-12) throw CollinearityError("y and a are collinear");
  PathEstimate e;
  e.theta_xy = (r_xy - r_xa * r_ya) / denom;
  e.theta_xa = (r_xa - r_xy * r_ya) / denom;
  e.theta_ya = r_ya;
  return e;
}

// Generic permutation p-value for a bivariate statistic. The second argument
// is permuted: unrestricted when `nuisance` is absent, within exact levels of
// the nuisance variable when present. Upper tail: larger statistic = stronger
// departure from the null.
template <class StatFn>
inline TestResult perm_pvalue(StatFn&& statistic_fn, std::span<const double> x,
                              std::span<const double> y,
                              std::optional<std::span<const double>> nuisance,
                              std::size_t B, std::uint64_t seed,
                              TestMethod method = TestMethod::dcor_perm) {
  detail::require_same_length(x, y);
  if (B < 99) throw SpecError("permutation test needs B >= 99");
  if (nuisance) detail::require_same_length(x, *nuisance);

  const double t_obs = statistic_fn(x, y);
  std::vector<std::vector<std::size_t>> groups;
  if (nuisance) groups = detail::level_groups(*nuisance);

  std::vector<double> perm;
  std::vector<double> scratch;
  std::size_t count = 0;
  for (std::size_t b = 0; b < B; ++b) {
    // Each draw restarts from the original y with its own derived seed, so
    // the count is independent of iteration order.
    perm.assign(y.begin(), y.end());
    Rng rng(derive_seed(seed, {b}));
    if (!nuisance) {
      rng.shuffle(perm);
    } else {
      for (const auto& g : groups) {
        scratch.resize(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) scratch[k] = perm[g[k]];
        rng.shuffle(scratch);
        for (std::size_t k = 0; k < g.size(); ++k) perm[g[k]] = scratch[k];
      }
    }
    if (statistic_fn(std::span<const double>(x), std::span<const double>(perm)) >= t_obs)
      ++count;
  }

  TestResult out;
  out.statistic = t_obs;
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(B + 1);
  out.method = method;
  out.n = x.size();
  out.permutations = B;
  return out;
}

}  // namespace confaudit
