#pragma once

// Linear structural causal models with a binary confounder:
//
//   A ~ Bernoulli(p)
//   Y = beta_ya * A + U_Y,            U_Y ~ N(0, sigma2_y)
//   X = beta_xy * Y + beta_xa * A + U_X,   U_X ~ N(0, sigma2_x)
//
// plus the standardized path-coefficient view and Wright covariance
// decompositions. Simulation draws three fixed sub-streams (a, u_y, u_x)
// derived from the seed, so `simulate` and `simulate_binary` share the same
// confounder and disturbances for a given (spec, n, seed).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "confaudit/dataset.hpp"
#include "confaudit/errors.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {

struct ScmSpec {
  double beta_ya = 0.0;
  double beta_xa = 0.0;
  double beta_xy = 0.0;
  double sigma2_y = 1.0;
  double sigma2_x = 1.0;
  double p = 0.5;

  void validate() const {
    if (!(sigma2_y > 0.0)) throw SpecError("sigma2_y must be > 0");
    if (!(sigma2_x > 0.0)) throw SpecError("sigma2_x must be > 0");
    if (!(p > 0.0 && p < 1.0)) throw SpecError("p must be in (0, 1)");
    for (double b : {beta_ya, beta_xa, beta_xy})
      if (!std::isfinite(b)) throw SpecError("path weights must be finite");
  }
};

// The three synthetic configurations: a has no direct Y->X effect, b has all
// effects active, c has no direct A->X effect. Shared sigma^2 = 1, p = 0.5.
inline ScmSpec scm_preset(char which) {
  ScmSpec s;
  s.sigma2_y = 1.0;
  s.sigma2_x = 1.0;
  s.p = 0.5;
  switch (which) {
    case 'a':
      s.beta_xa = 0.75;
      s.beta_xy = 0.0;
      s.beta_ya = 0.75;
      return s;
    case 'b':
      s.beta_xa = 0.75;
      s.beta_xy = 0.75;
      s.beta_ya = 0.75;
      return s;
    case 'c':
      s.beta_xa = 0.0;
      s.beta_xy = 0.75;
      s.beta_ya = 0.75;
      return s;
    default:
      throw SpecError(std::string("unknown preset `") + which + "`; use a, b or c");
  }
}

struct PathModel {
  double theta_ya = 0.0;
  double theta_xa = 0.0;
  double theta_xy = 0.0;
  double var_a = 0.0;
  double var_y = 0.0;
  double var_x = 0.0;
};

// Population variances and standardized path coefficients, closed form.
inline PathModel path_coefficients(const ScmSpec& s) {
  s.validate();
  PathModel m;
  m.var_a = s.p * (1.0 - s.p);
  m.var_y = s.sigma2_y + s.beta_ya * s.beta_ya * m.var_a;
  m.var_x = s.sigma2_x + s.beta_xa * s.beta_xa * m.var_a +
            s.beta_xy * s.beta_xy * m.var_y;
  m.theta_ya = s.beta_ya * std::sqrt(m.var_a / m.var_y);
  m.theta_xa = s.beta_xa * std::sqrt(m.var_a / m.var_x);
  m.theta_xy = s.beta_xy * std::sqrt(m.var_y / m.var_x);
  return m;
}

enum class VarPair { xy, xa, ay };

// Standardized-scale covariance as a sum of open-path products.
inline double wright_covariance(const PathModel& m, VarPair pair) {
  switch (pair) {
    case VarPair::xy: return m.theta_xy + m.theta_xa * m.theta_ya;
    case VarPair::xa: return m.theta_xa + m.theta_xy * m.theta_ya;
    case VarPair::ay: return m.theta_ya;
  }
  throw SpecError("unknown variable pair");
}

namespace detail {

struct ScmDraws {
  std::vector<double> a;
  std::vector<double> u_y;
  std::vector<double> u_x;
};

inline ScmDraws scm_draws(const ScmSpec& s, std::size_t n, std::uint64_t seed) {
  s.validate();
  if (n < 2) throw SpecError("simulate needs n >= 2");
  ScmDraws d;
  d.a.resize(n);
  d.u_y.resize(n);
  d.u_x.resize(n);
  Rng rng_a(derive_seed(seed, {0}));
  Rng rng_y(derive_seed(seed, {1}));
  Rng rng_x(derive_seed(seed, {2}));
  const double sd_y = std::sqrt(s.sigma2_y);
  const double sd_x = std::sqrt(s.sigma2_x);
  for (std::size_t i = 0; i < n; ++i) {
    d.a[i] = rng_a.bernoulli(s.p) ? 1.0 : 0.0;
    d.u_y[i] = sd_y * rng_y.normal();
    d.u_x[i] = sd_x * rng_x.normal();
  }
  return d;
}

}  // namespace detail

// One feature column; the response stays continuous (the linear-case view).
inline Dataset simulate(const ScmSpec& s, std::size_t n, std::uint64_t seed) {
  const auto draws = detail::scm_draws(s, n, seed);
  Dataset out;
  out.a = draws.a;
  out.y.resize(n);
  out.x.assign(1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = s.beta_ya * draws.a[i] + draws.u_y[i];
    out.x[0][i] = s.beta_xy * out.y[i] + s.beta_xa * draws.a[i] + draws.u_x[i];
  }
  return out;
}

// Classifier-facing variant: the continuous response is thresholded at its
// sample median (ties to class 0) and the feature is generated from the
// binary label, so X depends on Y only through the observable class.
inline Dataset simulate_binary(const ScmSpec& s, std::size_t n, std::uint64_t seed) {
  const auto draws = detail::scm_draws(s, n, seed);
  std::vector<double> y_cont(n);
  for (std::size_t i = 0; i < n; ++i) y_cont[i] = s.beta_ya * draws.a[i] + draws.u_y[i];

  std::vector<double> sorted = y_cont;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  double median = sorted[n / 2];
  if (n % 2 == 0) {
    const double below = *std::max_element(sorted.begin(), sorted.begin() + n / 2);
    median = 0.5 * (below + median);
  }

  Dataset out;
  out.a = draws.a;
  out.y.resize(n);
  out.x.assign(1, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    out.y[i] = y_cont[i] > median ? 1.0 : 0.0;
    out.x[0][i] = s.beta_xy * out.y[i] + s.beta_xa * draws.a[i] + draws.u_x[i];
  }
  return out;
}

}  // namespace confaudit
