#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "confaudit/restricted_perm.hpp"

using namespace confaudit;

namespace {

std::multiset<double> values_at_level(const std::vector<double>& y,
                                      const std::vector<double>& a, double level) {
  std::multiset<double> out;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (a[i] == level) out.insert(y[i]);
  return out;
}

}  // namespace

TEST_CASE("restricted shuffle preserves within-level multisets", "[restricted_perm]") {
  const std::vector<double> y = {1, 0, 1, 0};
  const std::vector<double> a = {0, 0, 1, 1};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ys = restricted_shuffle(y, a, seed);
    REQUIRE(values_at_level(ys, a, 0.0) == values_at_level(y, a, 0.0));
    REQUIRE(values_at_level(ys, a, 1.0) == values_at_level(y, a, 1.0));
  }
}

TEST_CASE("single level reduces to an unrestricted permutation", "[restricted_perm]") {
  Rng rng(3);
  std::vector<double> y(50);
  for (double& v : y) v = rng.normal();
  const std::vector<double> a(50, 7.0);
  const auto ys = restricted_shuffle(y, a, 5);
  auto sorted_ys = ys;
  auto sorted_y = y;
  std::sort(sorted_ys.begin(), sorted_ys.end());
  std::sort(sorted_y.begin(), sorted_y.end());
  REQUIRE(sorted_ys == sorted_y);
  REQUIRE(ys != y);  // astronomically unlikely to be the identity
}

TEST_CASE("singleton levels freeze the labels", "[restricted_perm]") {
  const std::vector<double> y = {0.1, 0.2, 0.3, 0.4};
  const std::vector<double> a = {1, 2, 3, 4};
  REQUIRE(restricted_shuffle(y, a, 9) == y);
}

TEST_CASE("shuffles preserve cov(y*, a) exactly", "[restricted_perm]") {
  Rng rng(13);
  const std::size_t n = 300;
  std::vector<double> y(n), a(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = static_cast<double>(i % 3);  // three levels
    y[i] = a[i] * 0.5 + rng.normal();
  }
  const double base = covariance(y, a);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ys = restricted_shuffle(y, a, seed);
    REQUIRE(covariance(ys, a) == Catch::Approx(base).margin(1e-12));
  }
}

TEST_CASE("length mismatch is rejected", "[restricted_perm]") {
  REQUIRE_THROWS_AS(restricted_shuffle(std::vector<double>{1, 2, 3},
                                       std::vector<double>{0, 1}, 1),
                    DimensionError);
}

TEST_CASE("permutation null mean matches the analytic value", "[restricted_perm]") {
  const Dataset d = simulate(scm_preset('b'), 500, 17);
  const std::size_t B = 4000;
  const auto null_dist = perm_null_covariance(d.x[0], d.y, d.a, B, 23);
  REQUIRE(null_dist.stats.size() == B);
  const double err = std::abs(null_dist.perm_mean() - null_dist.analytic_mean);
  REQUIRE(err <= 4.0 * null_dist.perm_sd() / std::sqrt(static_cast<double>(B)));
}

TEST_CASE("analytic mean equals cov minus partial cov to 1e-10", "[restricted_perm]") {
  for (char which : {'a', 'b', 'c'}) {
    const Dataset d = simulate(scm_preset(which), 800, 31);
    const auto nd = perm_null_covariance(d.x[0], d.y, d.a, 10, 1);
    const double via_pcov =
        covariance(d.x[0], d.y) - partial_covariance(d.x[0], d.y, d.a);
    REQUIRE(nd.analytic_mean == Catch::Approx(via_pcov).margin(1e-10));
  }
}

TEST_CASE("constant labels give a null concentrated at zero", "[restricted_perm]") {
  const std::size_t n = 100;
  std::vector<double> y(n, 1.0), x(n), a(n);
  Rng rng(37);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    a[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  const auto nd = perm_null_covariance(x, y, a, 50, 3);
  REQUIRE(nd.analytic_mean == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(nd.confounder_only == 0.0);
  for (double v : nd.stats) REQUIRE(v == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("independent confounder drives the analytic mean to zero", "[restricted_perm]") {
  ScmSpec s;  // all effects zero: x, y, a mutually independent
  const std::size_t n = 50000;
  const Dataset d = simulate(s, n, 41);
  const auto nd = perm_null_covariance(d.x[0], d.y, d.a, 10, 7);
  REQUIRE(std::abs(nd.analytic_mean) < 16.0 / static_cast<double>(n));
}

TEST_CASE("degenerate confounder is rejected", "[restricted_perm]") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> a(4, 2.0);
  REQUIRE_THROWS_AS(perm_null_covariance(x, x, a, 10, 1), DegenerateConfounderError);
}

TEST_CASE("bias decomposition on the three presets", "[restricted_perm]") {
  const auto a = bias_decomposition(path_coefficients(scm_preset('a')));
  REQUIRE(a.bias == 0.0);
  REQUIRE(a.analytic_mean == Catch::Approx(a.confounder_only).margin(1e-15));
  REQUIRE(a.analytic_mean == Catch::Approx(0.123288).margin(2e-6));

  const auto b = bias_decomposition(path_coefficients(scm_preset('b')));
  REQUIRE(b.analytic_mean == Catch::Approx(0.172605).margin(2e-6));
  REQUIRE(b.confounder_only == Catch::Approx(0.098632).margin(2e-6));
  REQUIRE(b.bias == Catch::Approx(0.073973).margin(2e-6));
  REQUIRE(b.analytic_mean == Catch::Approx(b.confounder_only + b.bias).margin(1e-15));

  const auto c = bias_decomposition(path_coefficients(scm_preset('c')));
  REQUIRE(c.confounder_only == 0.0);
  REQUIRE(c.analytic_mean == Catch::Approx(0.077077).margin(2e-6));
  REQUIRE(c.analytic_mean == Catch::Approx(c.bias).margin(1e-15));
}

TEST_CASE("bias is zero iff theta_xy * theta_ya^2 vanishes", "[restricted_perm]") {
  Rng rng(47);
  for (int rep = 0; rep < 50; ++rep) {
    ScmSpec s;
    s.beta_ya = rng.uniform() < 0.3 ? 0.0 : 2.0 * (rng.uniform() - 0.5);
    s.beta_xy = rng.uniform() < 0.3 ? 0.0 : 2.0 * (rng.uniform() - 0.5);
    s.beta_xa = 2.0 * (rng.uniform() - 0.5);
    const PathModel m = path_coefficients(s);
    const auto b = bias_decomposition(m);
    const bool zero_expected = m.theta_xy * m.theta_ya * m.theta_ya == 0.0;
    REQUIRE((b.bias == 0.0) == zero_expected);
  }
}

TEST_CASE("within-level covariance averages to zero across shuffles", "[restricted_perm]") {
  const Dataset d = simulate(scm_preset('b'), 2000, 53);
  const std::size_t B = 2000;
  const double grand = within_level_null_check(d.x[0], d.y, d.a, B, 59);

  // Scale of a single shuffle's statistic, estimated from a short pilot run.
  std::vector<double> pilot(200);
  for (std::size_t b = 0; b < pilot.size(); ++b)
    pilot[b] = within_level_null_check(d.x[0], d.y, d.a, 1, derive_seed(61, {b}));
  const double sd = std::sqrt(variance(pilot));
  REQUIRE(std::abs(grand) < 4.0 * sd / std::sqrt(static_cast<double>(B)));
}

TEST_CASE("within-level check: singleton levels and constant labels", "[restricted_perm]") {
  const std::vector<double> x = {0.4, -1.0, 2.2, 0.9};
  const std::vector<double> a = {1, 2, 3, 4};
  REQUIRE(within_level_null_check(x, x, a, 10, 1) == 0.0);

  const std::vector<double> yconst(200, 2.0);
  std::vector<double> xs(200), as(200);
  Rng rng(67);
  for (std::size_t i = 0; i < 200; ++i) {
    xs[i] = rng.normal();
    as[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  REQUIRE(within_level_null_check(xs, yconst, as, 20, 3) ==
          Catch::Approx(0.0).margin(1e-14));
}
