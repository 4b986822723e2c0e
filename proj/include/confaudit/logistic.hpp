#pragma once

// Maximum-likelihood logistic regression via Newton/IRLS with a small L2
// ridge for numerical stability. Deterministic: no randomness, fixed
// iteration policy (stop when the max coefficient change drops below tol or
// after max_iter steps; non-convergence is flagged, not thrown).

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "confaudit/errors.hpp"

namespace confaudit {

struct LogisticModel {
  double intercept = 0.0;
  std::vector<double> coef;  // one per feature
  bool converged = false;
  int iterations = 0;
};

namespace detail {

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

inline LogisticModel train_logistic(const std::vector<std::vector<double>>& x_cols,
                                    std::span<const double> y, double ridge = 1e-6,
                                    double tol = 1e-8, int max_iter = 500) {
  const std::size_t n = y.size();
  const std::size_t d = x_cols.size();
  if (n < 4) throw SpecError("train_logistic needs n >= 4");
  for (const auto& col : x_cols)
    if (col.size() != n) throw DimensionError("feature column length != label length");
  std::size_t pos = 0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw SpecError("labels must be 0/1");
    if (v == 1.0) ++pos;
  }
  if (pos < 2 || n - pos < 2) throw SpecError("need >= 2 samples per class");

  const std::size_t p = d + 1;
  Eigen::MatrixXd design(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (std::size_t j = 0; j < d; ++j) design(i, j + 1) = x_cols[j][i];
  }
  Eigen::VectorXd labels(n);
  for (std::size_t i = 0; i < n; ++i) labels(i) = y[i];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  LogisticModel model;
  for (int iter = 1; iter <= max_iter; ++iter) {
    Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd prob(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      prob(i) = detail::sigmoid(eta(i));
      w(i) = std::max(prob(i) * (1.0 - prob(i)), 1e-10);
    }
    Eigen::VectorXd grad =
        design.transpose() * (labels - prob) - ridge * beta;
    Eigen::MatrixXd hess = design.transpose() * w.asDiagonal() * design;
    hess.diagonal().array() += ridge;
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    beta += step;
    model.iterations = iter;
    if (step.cwiseAbs().maxCoeff() < tol) {
      model.converged = true;
      break;
    }
  }

  model.intercept = beta(0);
  model.coef.resize(d);
  for (std::size_t j = 0; j < d; ++j) model.coef[j] = beta(j + 1);
  return model;
}

inline std::vector<double> predict_logistic(const LogisticModel& m,
                                            const std::vector<std::vector<double>>& x_cols) {
  if (x_cols.size() != m.coef.size())
    throw DimensionError("feature count does not match the trained model");
  const std::size_t n = x_cols.empty() ? 0 : x_cols[0].size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double z = m.intercept;
    for (std::size_t j = 0; j < m.coef.size(); ++j) z += m.coef[j] * x_cols[j][i];
    scores[i] = detail::sigmoid(z);
  }
  return scores;
}

}  // namespace confaudit
