#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "confaudit/assoc_stats.hpp"
#include "confaudit/rng.hpp"
#include "helpers.hpp"

using namespace confaudit;
using test_helpers::bernoulli_vector;
using test_helpers::normal_vector;

TEST_CASE("covariance on hand examples", "[assoc]") {
  const std::vector<double> up = {1, 2, 3};
  const std::vector<double> down = {3, 2, 1};
  REQUIRE(covariance(up, up) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(covariance(up, down) == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("covariance of independent draws shrinks like 1/sqrt(n)", "[assoc]") {
  const std::size_t n = 10000;
  const auto x = normal_vector(n, 21);
  const auto y = normal_vector(n, 22);
  REQUIRE(std::abs(covariance(x, y)) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("partial covariance identity holds to 1e-10", "[assoc]") {
  Rng rng(31);
  std::vector<double> x(500), y(500), a(500);
  for (std::size_t i = 0; i < 500; ++i) {
    a[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
    x[i] = 0.7 * a[i] + rng.normal();
    y[i] = -0.3 * a[i] + rng.normal();
  }
  const double lhs = covariance(x, y) - partial_covariance(x, y, a);
  const double rhs = covariance(x, a) * covariance(y, a) / variance(a);
  REQUIRE(std::abs(lhs - rhs) < 1e-10);
}

TEST_CASE("partialling a variable out of itself gives zero", "[assoc]") {
  const std::vector<double> a = {0, 1, 0, 1, 1, 0, 1};
  const std::vector<double> y = {0.2, 1.4, -0.3, 0.9, 1.1, 0.0, 2.0};
  REQUIRE(std::abs(partial_covariance(a, y, a)) < 1e-14);
}

TEST_CASE("partial covariance approaches covariance when a is independent", "[assoc]") {
  const std::size_t n = 20000;
  auto x = normal_vector(n, 41);
  const auto y = normal_vector(n, 42);
  const auto a = bernoulli_vector(n, 0.5, 43);
  for (std::size_t i = 0; i < n; ++i) x[i] += 0.5 * y[i];
  REQUIRE(partial_covariance(x, y, a) ==
          Catch::Approx(covariance(x, y)).margin(4.0 / std::sqrt(static_cast<double>(n))));
}

TEST_CASE("degenerate confounder is rejected", "[assoc]") {
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> a = {2, 2, 2, 2};
  REQUIRE_THROWS_AS(partial_covariance(x, x, a), DegenerateConfounderError);
}

TEST_CASE("spearman equals 1 under monotone transforms", "[assoc]") {
  const auto x = normal_vector(50, 5);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::exp(x[i]);
  const TestResult r = spearman(x, y);
  REQUIRE(r.statistic == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("spearman invariance under strictly increasing maps is exact", "[assoc]") {
  const auto x = normal_vector(80, 6);
  const auto y = normal_vector(80, 7);
  std::vector<double> fx(x.size()), gy(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    fx[i] = std::atan(x[i]) * 3.0 + 1.0;
    gy[i] = y[i] * y[i] * y[i];
  }
  REQUIRE(spearman(x, y).statistic == Catch::Approx(spearman(fx, gy).statistic).margin(1e-14));
}

TEST_CASE("spearman hand example: one adjacent swap", "[assoc]") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {1, 2, 3, 5, 4};
  // 1 - 6*sum(d^2)/(n(n^2-1)) with sum(d^2) = 2
  REQUIRE(spearman(x, y).statistic == Catch::Approx(0.9).margin(1e-14));
}

TEST_CASE("spearman p-values are roughly uniform under independence", "[assoc]") {
  std::vector<double> pvals;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const auto x = normal_vector(60, 1000 + s);
    const auto y = normal_vector(60, 5000 + s);
    pvals.push_back(spearman(x, y).p_value);
  }
  // KS bound at roughly the 1% level for 400 draws
  REQUIRE(test_helpers::ks_uniform(pvals) < 1.63 / std::sqrt(400.0));
}

TEST_CASE("spearman falls back to a permutation p-value for small n", "[assoc]") {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> y = {2, 1, 4, 3, 6, 5, 7};
  const TestResult r = spearman(x, y);
  REQUIRE(r.permutations.has_value());
  REQUIRE(r.p_value >= 1.0 / (static_cast<double>(*r.permutations) + 1.0));
  REQUIRE(r.p_value <= 1.0);
}

TEST_CASE("spearman rejects degenerate input", "[assoc]") {
  const std::vector<double> c = {1, 1, 1, 1, 1, 1};
  const std::vector<double> y = {1, 2, 3, 4, 5, 6};
  REQUIRE_THROWS_AS(spearman(c, y), DegenerateColumnError);
  REQUIRE_THROWS_AS(spearman(std::vector<double>{1, 2, 3},
                             std::vector<double>{1, 2, 3}),
                    SpecError);
}

TEST_CASE("partial spearman detects identical variables", "[assoc]") {
  const auto x = normal_vector(200, 8);
  const auto a = bernoulli_vector(200, 0.5, 9);
  const TestResult r = partial_spearman(x, x, a);
  REQUIRE(r.statistic == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(r.p_value < 1e-6);
}

TEST_CASE("partial spearman keeps its level under a conditional null", "[assoc]") {
  // x and y both driven by a, conditionally independent given a.
  int rejections = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(777, {static_cast<std::uint64_t>(rep)}));
    const std::size_t n = 600;
    std::vector<double> a(n), x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      x[i] = a[i] + rng.normal();
      y[i] = a[i] + rng.normal();
    }
    if (partial_spearman(x, y, a).p_value < 0.05) ++rejections;
  }
  // nominal 5%; allow a wide band for 200 replicates
  REQUIRE(rejections >= 2);
  REQUIRE(rejections <= 22);
}

TEST_CASE("chain structure: marginal rejects, partial accepts", "[assoc]") {
  Rng rng(55);
  const std::size_t n = 5000;
  std::vector<double> x(n), m(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    m[i] = 1.5 * x[i] + 0.5 * rng.normal();
    y[i] = 1.5 * m[i] + 0.5 * rng.normal();
  }
  REQUIRE(spearman(x, y).p_value < 1e-10);
  REQUIRE(partial_spearman(x, y, m).p_value > 0.01);
}

TEST_CASE("partial spearman flags collinear conditioning", "[assoc]") {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6};
  const std::vector<double> y = {2, 4, 1, 3, 6, 5};
  REQUIRE_THROWS_AS(partial_spearman(x, y, x), CollinearityError);
}

TEST_CASE("association measures are symmetric", "[assoc]") {
  const auto x = normal_vector(300, 61);
  std::vector<double> y = normal_vector(300, 62);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += 0.4 * x[i];
  REQUIRE(covariance(x, y) == Catch::Approx(covariance(y, x)).margin(1e-12));
  REQUIRE(spearman(x, y).statistic ==
          Catch::Approx(spearman(y, x).statistic).margin(1e-12));
}

TEST_CASE("path regression recovers a planted linear model", "[assoc]") {
  Rng rng(71);
  const std::size_t n = 60000;
  std::vector<double> a(n), y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    y[i] = 0.75 * a[i] + rng.normal();
    x[i] = 0.75 * y[i] + 0.75 * a[i] + rng.normal();
  }
  // standardize inputs first: path coefficients live on the standardized scale
  auto z = [](std::vector<double> v) {
    const double m = mean(v);
    const double s = std::sqrt(variance(v));
    for (double& t : v) t = (t - m) / s;
    return v;
  };
  const PathEstimate e = path_regression(z(x), z(y), z(a));
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  REQUIRE(e.theta_xy == Catch::Approx(0.6).margin(tol));
  REQUIRE(e.theta_xa == Catch::Approx(0.280900).margin(tol));
  REQUIRE(e.theta_ya == Catch::Approx(0.351124).margin(tol));
}

TEST_CASE("perm_pvalue floor is 1/(B+1)", "[assoc]") {
  // A statistic maximal for the observed pairing and smaller for any shuffle.
  const std::size_t n = 40;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = y[i] = static_cast<double>(i);
  auto stat = [](std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
  };
  const TestResult r = perm_pvalue(stat, x, y, std::nullopt, 999, 5);
  REQUIRE(r.p_value == Catch::Approx(1.0 / 1000.0).margin(1e-15));
}

TEST_CASE("perm_pvalue is near uniform under independence", "[assoc]") {
  auto stat = [](std::span<const double> u, std::span<const double> v) {
    return std::abs(covariance(u, v));
  };
  std::vector<double> pvals;
  for (std::uint64_t s = 0; s < 120; ++s) {
    const auto x = normal_vector(80, 9000 + s);
    const auto y = normal_vector(80, 9500 + s);
    pvals.push_back(perm_pvalue(stat, x, y, std::nullopt, 199, s).p_value);
  }
  REQUIRE(test_helpers::ks_uniform(pvals) < 1.63 / std::sqrt(120.0));
}

TEST_CASE("perm_pvalue respects nuisance levels", "[assoc]") {
  // y perfectly tracks the nuisance levels; within-level shuffles leave the
  // statistic unchanged, so the p-value must be 1.
  const std::size_t n = 30;
  std::vector<double> x(n), y(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = static_cast<double>(i % 3);
    y[i] = g[i];
    x[i] = static_cast<double>(i);
  }
  auto stat = [](std::span<const double> u, std::span<const double> v) {
    return covariance(u, v);
  };
  const TestResult r =
      perm_pvalue(stat, x, y, std::span<const double>(g), 199, 7);
  REQUIRE(r.p_value == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("perm_pvalue validates B", "[assoc]") {
  const std::vector<double> x = {1, 2, 3, 4};
  auto stat = [](std::span<const double>, std::span<const double>) { return 0.0; };
  REQUIRE_THROWS_AS(perm_pvalue(stat, x, x, std::nullopt, 10, 1), SpecError);
}
