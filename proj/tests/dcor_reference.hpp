#pragma once

// Independent O(n^2) reference implementations of the distance-correlation
// quantities, straight from the matrix definitions. Test-only; the library
// path must agree with these on every input.

#include <cmath>
#include <span>
#include <vector>

namespace dcor_reference {

using Matrix = std::vector<std::vector<double>>;

inline Matrix abs_dist(std::span<const double> v) {
  const std::size_t n = v.size();
  Matrix m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = std::abs(v[i] - v[j]);
  return m;
}

// Double centering: A_ij = a_ij - rowmean_i - colmean_j + grandmean.
inline Matrix double_center(const Matrix& a) {
  const std::size_t n = a.size();
  std::vector<double> row(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row[i] += a[i][j];
      grand += a[i][j];
    }
  for (double& r : row) r /= static_cast<double>(n);
  grand /= static_cast<double>(n * n);
  Matrix out(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i][j] = a[i][j] - row[i] - row[j] + grand;
  return out;
}

// U-centering per Szekely & Rizzo 2014; zero diagonal.
inline Matrix u_center(const Matrix& a) {
  const std::size_t n = a.size();
  std::vector<double> row(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      row[i] += a[i][j];
      grand += a[i][j];
    }
  Matrix out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      out[i][j] = a[i][j] - row[i] / static_cast<double>(n - 2) -
                  row[j] / static_cast<double>(n - 2) +
                  grand / static_cast<double>((n - 1) * (n - 2));
    }
  return out;
}

inline double vstat_dcov2(std::span<const double> x, std::span<const double> y) {
  const Matrix A = double_center(abs_dist(x));
  const Matrix B = double_center(abs_dist(y));
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s += A[i][j] * B[i][j];
  return s / static_cast<double>(n * n);
}

inline double dcor(std::span<const double> x, std::span<const double> y) {
  const double vxy = vstat_dcov2(x, y);
  const double vxx = vstat_dcov2(x, x);
  const double vyy = vstat_dcov2(y, y);
  if (vxx <= 0.0 || vyy <= 0.0) return 0.0;
  const double r2 = vxy / std::sqrt(vxx * vyy);
  return r2 > 0.0 ? std::sqrt(r2) : 0.0;
}

inline double ucentered_inner(std::span<const double> x, std::span<const double> y) {
  const Matrix A = u_center(abs_dist(x));
  const Matrix B = u_center(abs_dist(y));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (i != j) s += A[i][j] * B[i][j];
  return s;
}

inline double bias_corrected_dcor(std::span<const double> x, std::span<const double> y) {
  const double uxx = ucentered_inner(x, x);
  const double uyy = ucentered_inner(y, y);
  if (uxx <= 0.0 || uyy <= 0.0) return 0.0;
  return ucentered_inner(x, y) / std::sqrt(uxx * uyy);
}

inline double pdcor(std::span<const double> x, std::span<const double> y,
                    std::span<const double> z) {
  const double rxy = bias_corrected_dcor(x, y);
  const double rxz = bias_corrected_dcor(x, z);
  const double ryz = bias_corrected_dcor(y, z);
  return (rxy - rxz * ryz) / std::sqrt((1.0 - rxz * rxz) * (1.0 - ryz * ryz));
}

}  // namespace dcor_reference
