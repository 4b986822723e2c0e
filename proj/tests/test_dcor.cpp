#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "confaudit/dcor.hpp"
#include "dcor_reference.hpp"
#include "helpers.hpp"

using namespace confaudit;
using test_helpers::bernoulli_vector;
using test_helpers::normal_vector;

TEST_CASE("fast kernels match the matrix definitions", "[dcor]") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::size_t n = 30 + 17 * s;
    auto x = normal_vector(n, 100 + s);
    auto y = normal_vector(n, 200 + s);
    if (s % 3 == 0) y = bernoulli_vector(n, 0.4, 300 + s);  // exercise heavy ties
    for (std::size_t i = 0; i < n; ++i) y[i] += (s % 2) ? 0.5 * x[i] : 0.0;

    REQUIRE(distance_correlation(x, y) ==
            Catch::Approx(dcor_reference::dcor(x, y)).margin(1e-10));
    REQUIRE(ucentered_inner(x, y) ==
            Catch::Approx(dcor_reference::ucentered_inner(x, y)).margin(1e-7));
    REQUIRE(bias_corrected_dcor(x, y) ==
            Catch::Approx(dcor_reference::bias_corrected_dcor(x, y)).margin(1e-10));
  }
}

TEST_CASE("pdcor matches the matrix definition", "[dcor]") {
  for (std::uint64_t s = 0; s < 6; ++s) {
    const std::size_t n = 40 + 11 * s;
    const auto z = bernoulli_vector(n, 0.5, 400 + s);
    auto x = normal_vector(n, 500 + s);
    auto y = normal_vector(n, 600 + s);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += 0.8 * z[i];
      y[i] += 0.8 * z[i];
    }
    REQUIRE(partial_distance_correlation(x, y, z) ==
            Catch::Approx(dcor_reference::pdcor(x, y, z)).margin(1e-10));
  }
}

TEST_CASE("dcor of a variable with itself is 1", "[dcor]") {
  const auto x = normal_vector(200, 1);
  REQUIRE(distance_correlation(x, x) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("dcor stays in [0,1] and is symmetric", "[dcor]") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const std::size_t n = 25 + 7 * s;
    auto x = normal_vector(n, 700 + s);
    auto y = normal_vector(n, 800 + s);
    if (s % 2) for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * x[i] + 0.3 * y[i];
    const double d = distance_correlation(x, y);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 1.0);
    REQUIRE(d == Catch::Approx(distance_correlation(y, x)).margin(1e-12));
  }
}

TEST_CASE("constant input returns 0 by convention", "[dcor]") {
  const std::vector<double> c(50, 3.0);
  const auto y = normal_vector(50, 2);
  REQUIRE(distance_correlation(c, y) == 0.0);
  REQUIRE(bias_corrected_dcor(c, y) == 0.0);
}

TEST_CASE("binary-binary dcor equals |pearson|", "[dcor]") {
  // With two-valued vectors the centered distance matrix is rank one, so the
  // V-statistic collapses to the absolute correlation.
  const std::size_t n = 400;
  const auto a = bernoulli_vector(n, 0.35, 11);
  std::vector<double> y(n);
  Rng rng(12);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = rng.uniform() < (a[i] == 1.0 ? 0.7 : 0.3) ? 1.0 : 0.0;
  REQUIRE(distance_correlation(a, y) ==
          Catch::Approx(std::abs(pearson(a, y))).margin(1e-10));
}

TEST_CASE("independent draws give near-zero dcor and no rejection", "[dcor]") {
  const std::size_t n = 2000;
  const auto x = normal_vector(n, 31);
  const auto y = normal_vector(n, 32);
  REQUIRE(distance_correlation(x, y) < 0.05);
  const TestResult t = dcor_perm_test(x, y, 199, 33);
  REQUIRE(t.p_value > 0.05);
}

TEST_CASE("quadratic dependence: spearman blind, dcor rejects", "[dcor]") {
  const std::size_t n = 2000;
  Rng rng(41);
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = x[i] * x[i] + 0.3 * rng.normal();
  }
  REQUIRE(std::abs(spearman(x, y).statistic) < 0.06);
  REQUIRE(distance_correlation(x, y) > 0.25);
  REQUIRE(dcor_perm_test(x, y, 199, 42).p_value == Catch::Approx(1.0 / 200.0));
}

TEST_CASE("pdcor near zero under conditional independence, near 1 for x=y", "[dcor]") {
  const std::size_t n = 1500;
  Rng rng(51);
  std::vector<double> a(n), x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x[i] = a[i] + rng.normal();
    y[i] = a[i] + rng.normal();
  }
  REQUIRE(std::abs(partial_distance_correlation(x, y, a)) < 0.05);
  REQUIRE(partial_distance_correlation(x, x, a) > 0.9);
}

TEST_CASE("fork structure: marginal dcor rejects, pdcor test does not", "[dcor]") {
  int marginal_rejects = 0;
  int conditional_rejects = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(derive_seed(61, {static_cast<std::uint64_t>(rep)}));
    const std::size_t n = 800;
    std::vector<double> a(n), x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      x[i] = 1.2 * a[i] + rng.normal();
      y[i] = 1.2 * a[i] + rng.normal();
    }
    if (dcor_perm_test(x, y, 199, derive_seed(62, {static_cast<std::uint64_t>(rep)}))
            .p_value < 0.05)
      ++marginal_rejects;
    if (pdcor_perm_test(x, y, a, 199, derive_seed(63, {static_cast<std::uint64_t>(rep)}))
            .p_value < 0.05)
      ++conditional_rejects;
  }
  REQUIRE(marginal_rejects == reps);
  REQUIRE(conditional_rejects <= 2);  // >= 90% acceptance under the null
}

TEST_CASE("pdcor flags a saturating conditioner", "[dcor]") {
  const auto x = normal_vector(100, 71);
  REQUIRE_THROWS_AS(partial_distance_correlation(x, normal_vector(100, 72), x),
                    CollinearityError);
}

TEST_CASE("dcor perm test p-values are valid under the null", "[dcor]") {
  std::vector<double> pvals;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = normal_vector(100, 7000 + s);
    const auto y = normal_vector(100, 7500 + s);
    pvals.push_back(dcor_perm_test(x, y, 99, s).p_value);
  }
  int reject = 0;
  for (double p : pvals)
    if (p < 0.05) ++reject;
  REQUIRE(reject <= 12);
}
