#pragma once

// Distance correlation (Szekely, Rizzo & Bakirov 2007) and partial distance
// correlation (Szekely & Rizzo 2014) for scalar variables, with permutation
// tests.
//
// All quantities reduce to three ingredients per variable pair:
//   D  = sum_ij |x_i-x_j| |y_i-y_j|
//   P  = sum_i  r_i s_i          (r, s = distance-matrix row sums)
//   T  = sum_i  r_i              (grand totals Ta, Tb)
// from which
//   V-statistic  dCov^2 = D/n^2 - 2P/n^3 + Ta*Tb/n^4
//   U-inner      (A~.B~) = D - 2P/(n-2) + Ta*Tb/((n-1)(n-2))
// The U-centered inner product feeds the bias-corrected R* and the partial
// distance correlation. D is computed in O(n log n) with a Fenwick tree over
// y-ranks (one pass in x-order); everything else is O(n log n) via sorting.
// Equality with the explicit O(n^2) matrix definitions is pinned in tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "confaudit/assoc_stats.hpp"
#include "confaudit/errors.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {
namespace detail {

// Fenwick tree accumulating (count, sum x, sum y, sum xy) per y-rank.
class PairSumTree {
 public:
  explicit PairSumTree(std::size_t m) : m_(m), data_(4 * (m + 1), 0.0) {}

  void add(std::size_t rank, double x, double y) {
    for (std::size_t i = rank; i <= m_; i += i & (~i + 1)) {
      double* cell = &data_[4 * i];
      cell[0] += 1.0;
      cell[1] += x;
      cell[2] += y;
      cell[3] += x * y;
    }
  }

  // Aggregates over all inserted points with y-rank <= rank.
  void prefix(std::size_t rank, double out[4]) const {
    out[0] = out[1] = out[2] = out[3] = 0.0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) {
      const double* cell = &data_[4 * i];
      out[0] += cell[0];
      out[1] += cell[1];
      out[2] += cell[2];
      out[3] += cell[3];
    }
  }

 private:
  std::size_t m_;
  std::vector<double> data_;
};

// sum_ij |x_i - x_j| * |y_i - y_j| in O(n log n).
inline double dist_sum_products(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();

  // Center for numerical headroom; distances are translation invariant.
  std::vector<double> cx(x.begin(), x.end());
  std::vector<double> cy(y.begin(), y.end());
  const double mx = mean(cx);
  const double my = mean(cy);
  for (double& v : cx) v -= mx;
  for (double& v : cy) v -= my;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return cx[i] < cx[j]; });

  // Compress y to tie-group ranks 1..m so a prefix query captures y_i <= y_j.
  std::vector<double> ysorted(cy);
  std::sort(ysorted.begin(), ysorted.end());
  ysorted.erase(std::unique(ysorted.begin(), ysorted.end()), ysorted.end());
  const std::size_t m = ysorted.size();
  std::vector<std::size_t> yrank(n);
  for (std::size_t i = 0; i < n; ++i)
    yrank[i] = static_cast<std::size_t>(
                   std::lower_bound(ysorted.begin(), ysorted.end(), cy[i]) -
                   ysorted.begin()) +
               1;

  PairSumTree tree(m);
  double total_c = 0.0, total_x = 0.0, total_y = 0.0, total_xy = 0.0;
  double s = 0.0;
  double lo[4];
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t j = order[step];
    const double xj = cx[j];
    const double yj = cy[j];
    tree.prefix(yrank[j], lo);
    const double hi_c = total_c - lo[0];
    const double hi_x = total_x - lo[1];
    const double hi_y = total_y - lo[2];
    const double hi_xy = total_xy - lo[3];
    // Earlier points have x_i <= x_j. Split on y_i <= y_j vs y_i > y_j:
    //   (x_j-x_i)(y_j-y_i)  and  (x_j-x_i)(y_i-y_j).
    s += lo[0] * xj * yj - lo[1] * yj - lo[2] * xj + lo[3];
    s += hi_y * xj - hi_c * xj * yj - hi_xy + hi_x * yj;
    tree.add(yrank[j], xj, yj);
    total_c += 1.0;
    total_x += xj;
    total_y += yj;
    total_xy += xj * yj;
  }
  return 2.0 * s;
}

// Row sums of the pairwise |x_i - x_j| matrix, O(n log n).
inline std::vector<double> dist_row_sums(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) prefix[k + 1] = prefix[k] + x[order[k]];
  std::vector<double> rows(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double v = x[order[k]];
    // sum_{l<=k} (v - x_l) + sum_{l>k} (x_l - v), over the sorted order
    const double below = static_cast<double>(k + 1) * v - prefix[k + 1];
    const double above = (prefix[n] - prefix[k + 1]) -
                         static_cast<double>(n - k - 1) * v;
    rows[order[k]] = below + above;
  }
  return rows;
}

struct DistIngredients {
  double d = 0.0;   // sum_ij a_ij b_ij
  double p = 0.0;   // sum_i r_i s_i
  double ta = 0.0;  // total of a-row sums
  double tb = 0.0;
  std::size_t n = 0;
};

inline DistIngredients dist_ingredients(std::span<const double> x,
                                        std::span<const double> y) {
  require_same_length(x, y);
  DistIngredients out;
  out.n = x.size();
  out.d = dist_sum_products(x, y);
  const auto rx = dist_row_sums(x);
  const auto ry = dist_row_sums(y);
  for (std::size_t i = 0; i < x.size(); ++i) out.p += rx[i] * ry[i];
  for (double v : rx) out.ta += v;
  for (double v : ry) out.tb += v;
  return out;
}

// Self-pair ingredients: D = sum (x_i-x_j)^2 has a closed form.
inline DistIngredients dist_ingredients_self(std::span<const double> x) {
  DistIngredients out;
  const std::size_t n = x.size();
  out.n = n;
  double sum = 0.0, sumsq = 0.0;
  for (double v : x) {
    sum += v;
    sumsq += v * v;
  }
  out.d = 2.0 * static_cast<double>(n) * sumsq - 2.0 * sum * sum;
  const auto rx = dist_row_sums(x);
  for (double v : rx) {
    out.p += v * v;
    out.ta += v;
  }
  out.tb = out.ta;
  return out;
}

inline double vstat_dcov2(const DistIngredients& g) {
  const double n = static_cast<double>(g.n);
  return g.d / (n * n) - 2.0 * g.p / (n * n * n) + g.ta * g.tb / (n * n * n * n);
}

inline double ucentered_inner_from(const DistIngredients& g) {
  const double n = static_cast<double>(g.n);
  return g.d - 2.0 * g.p / (n - 2.0) + g.ta * g.tb / ((n - 1.0) * (n - 2.0));
}

}  // namespace detail

// V-statistic distance correlation in [0, 1]. Constant inputs return 0 by
// convention (degenerate distance matrix).
inline double distance_correlation(std::span<const double> x, std::span<const double> y) {
  detail::require_same_length(x, y);
  if (x.size() < 4) throw SpecError("distance_correlation needs n >= 4");
  const auto gxy = detail::dist_ingredients(x, y);
  const auto gxx = detail::dist_ingredients_self(x);
  const auto gyy = detail::dist_ingredients_self(y);
  const double vx = detail::vstat_dcov2(gxx);
  const double vy = detail::vstat_dcov2(gyy);
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  const double v = detail::vstat_dcov2(gxy) / std::sqrt(vx * vy);
  return std::clamp(std::sqrt(std::max(v, 0.0)), 0.0, 1.0);
}

// U-centered inner product (A~ . B~); the unbiased dCov^2 estimator is this
// divided by n(n-3).
inline double ucentered_inner(std::span<const double> x, std::span<const double> y) {
  detail::require_same_length(x, y);
  if (x.size() < 4) throw SpecError("ucentered_inner needs n >= 4");
  return detail::ucentered_inner_from(detail::dist_ingredients(x, y));
}

// Bias-corrected distance correlation R* in [-1, 1]; 0 when either variable
// is degenerate.
inline double bias_corrected_dcor(std::span<const double> x, std::span<const double> y) {
  detail::require_same_length(x, y);
  if (x.size() < 4) throw SpecError("bias_corrected_dcor needs n >= 4");
  const double uxx = detail::ucentered_inner_from(detail::dist_ingredients_self(x));
  const double uyy = detail::ucentered_inner_from(detail::dist_ingredients_self(y));
  if (uxx <= 0.0 || uyy <= 0.0) return 0.0;
  const double uxy = detail::ucentered_inner_from(detail::dist_ingredients(x, y));
  return std::clamp(uxy / std::sqrt(uxx * uyy), -1.0, 1.0);
}

// Partial distance correlation of x and y given z, via projections of the
// U-centered matrices.
inline double partial_distance_correlation(std::span<const double> x,
                                           std::span<const double> y,
                                           std::span<const double> z) {
  detail::require_same_length(x, y);
  detail::require_same_length(x, z);
  if (x.size() < 4) throw SpecError("partial_distance_correlation needs n >= 4");
  const double rxy = bias_corrected_dcor(x, y);
  const double rxz = bias_corrected_dcor(x, z);
  const double ryz = bias_corrected_dcor(y, z);
  const double denom = (1.0 - rxz * rxz) * (1.0 - ryz * ryz);
  if (denom <= 1e-12)
    throw CollinearityError("conditioning variable saturates a distance correlation");
  return (rxy - rxz * ryz) / std::sqrt(denom);
}

namespace detail {

constexpr std::size_t kMaxDiscreteLevels = 12;

// Permutation scheme for a conditional null: within exact levels when the
// conditioner is discrete; otherwise shuffle rank-regression residuals and
// rebuild a pseudo-variable on the rank scale.
class ConditionalPermuter {
 public:
  ConditionalPermuter(std::span<const double> v, std::span<const double> z) {
    base_.assign(v.begin(), v.end());
    groups_ = level_groups(z);
    if (groups_.size() <= kMaxDiscreteLevels) {
      discrete_ = true;
      return;
    }
    discrete_ = false;
    const auto rv = midranks(v);
    const auto rz = midranks(z);
    const double mz = mean(rz);
    const double mv = mean(rv);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < rv.size(); ++i) {
      sxy += (rz[i] - mz) * (rv[i] - mv);
      sxx += (rz[i] - mz) * (rz[i] - mz);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fitted_.resize(rv.size());
    residual_.resize(rv.size());
    for (std::size_t i = 0; i < rv.size(); ++i) {
      fitted_[i] = mv + slope * (rz[i] - mz);
      residual_[i] = rv[i] - fitted_[i];
    }
  }

  std::vector<double> draw(Rng& rng) const {
    if (discrete_) {
      std::vector<double> out = base_;
      std::vector<double> scratch;
      for (const auto& g : groups_) {
        scratch.resize(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) scratch[k] = out[g[k]];
        rng.shuffle(scratch);
        for (std::size_t k = 0; k < g.size(); ++k) out[g[k]] = scratch[k];
      }
      return out;
    }
    std::vector<double> res = residual_;
    rng.shuffle(res);
    std::vector<double> out(res.size());
    for (std::size_t i = 0; i < res.size(); ++i) out[i] = fitted_[i] + res[i];
    return out;
  }

 private:
  bool discrete_ = true;
  std::vector<double> base_;
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<double> fitted_;
  std::vector<double> residual_;
};

}  // namespace detail

// Permutation test of independence via dCor. Without a nuisance the second
// argument is permuted unrestrictedly; with one, within its exact levels.
inline TestResult dcor_perm_test(std::span<const double> x, std::span<const double> y,
                                 std::size_t B, std::uint64_t seed,
                                 std::optional<std::span<const double>> nuisance =
                                     std::nullopt) {
  if (B < 99) throw SpecError("permutation test needs B >= 99");
  auto stat = [](std::span<const double> u, std::span<const double> v) {
    return distance_correlation(u, v);
  };
  TestResult out = perm_pvalue(stat, x, y, nuisance, B, seed, TestMethod::dcor_perm);
  out.degenerate = variance(x) <= 0.0 || variance(y) <= 0.0;
  return out;
}

// Permutation test of conditional independence via pdCor; permutes y under
// the conditional scheme for z.
inline TestResult pdcor_perm_test(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> z, std::size_t B,
                                  std::uint64_t seed) {
  detail::require_same_length(x, y);
  detail::require_same_length(x, z);
  if (B < 99) throw SpecError("permutation test needs B >= 99");

  const double t_obs = partial_distance_correlation(x, y, z);
  detail::ConditionalPermuter permuter(y, z);
  std::size_t count = 0;
  for (std::size_t b = 0; b < B; ++b) {
    Rng rng(derive_seed(seed, {b}));
    const auto perm = permuter.draw(rng);
    if (partial_distance_correlation(x, perm, z) >= t_obs) ++count;
  }

  TestResult out;
  out.statistic = t_obs;
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(B + 1);
  out.method = TestMethod::pdcor_perm;
  out.n = x.size();
  out.permutations = B;
  return out;
}

}  // namespace confaudit
