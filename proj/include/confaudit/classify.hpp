#pragma once

// Probabilistic classifiers producing prediction scores, label-stratified
// train/test splits, and AUC. The confounder is never an input to a model:
// training and prediction consume feature columns only.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "confaudit/assoc_stats.hpp"
#include "confaudit/errors.hpp"
#include "confaudit/forest.hpp"
#include "confaudit/logistic.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {

struct SplitPlan {
  std::size_t n_splits = 30;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_splits < 1) throw SpecError("n_splits must be >= 1");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw SpecError("train_fraction must be in (0, 1)");
  }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint train/test index sets, stratified by label so both classes appear
// on both sides of every split.
inline std::vector<Split> make_splits(std::span<const double> y, const SplitPlan& plan) {
  plan.validate();
  const std::size_t n = y.size();
  if (n < 10) throw SpecError("make_splits needs n >= 10");
  std::vector<std::size_t> cases, controls;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] == 1.0)
      cases.push_back(i);
    else if (y[i] == 0.0)
      controls.push_back(i);
    else
      throw SpecError("labels must be 0/1");
  }
  if (cases.size() < 2 || controls.size() < 2)
    throw StratificationError("each class needs >= 2 members to stratify");

  std::vector<Split> splits(plan.n_splits);
  for (std::size_t s = 0; s < plan.n_splits; ++s) {
    Rng rng(derive_seed(plan.seed, {s}));
    Split& split = splits[s];
    for (auto* pool : {&cases, &controls}) {
      std::vector<std::size_t> order = *pool;
      rng.shuffle(order);
      const std::size_t n_class = order.size();
      std::size_t k = static_cast<std::size_t>(
          std::llround(plan.train_fraction * static_cast<double>(n_class)));
      k = std::clamp<std::size_t>(k, 1, n_class - 1);
      split.train.insert(split.train.end(), order.begin(), order.begin() + k);
      split.test.insert(split.test.end(), order.begin() + k, order.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
  }
  return splits;
}

enum class ClassifierKind { logistic, forest };

inline const char* classifier_name(ClassifierKind k) {
  return k == ClassifierKind::logistic ? "logistic" : "forest";
}

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::logistic;
  LogisticModel logistic;
  Forest forest;
  std::size_t n_features = 0;

  std::vector<double> predict(const std::vector<std::vector<double>>& x_cols) const {
    if (x_cols.size() != n_features)
      throw DimensionError("feature count does not match the trained model");
    return kind == ClassifierKind::logistic ? predict_logistic(logistic, x_cols)
                                            : predict_forest(forest, x_cols);
  }
};

inline TrainedModel train_model(ClassifierKind kind,
                                const std::vector<std::vector<double>>& x_cols,
                                std::span<const double> y, const ForestParams& params,
                                std::uint64_t seed) {
  TrainedModel m;
  m.kind = kind;
  m.n_features = x_cols.size();
  if (kind == ClassifierKind::logistic) {
    m.logistic = train_logistic(x_cols, y);
  } else {
    ForestParams p = params;
    p.mtry = std::min(p.mtry, x_cols.size());
    m.forest = train_forest(x_cols, y, p, seed);
  }
  return m;
}

inline std::vector<double> predict_scores(const TrainedModel& m,
                                          const std::vector<std::vector<double>>& x_cols) {
  return m.predict(x_cols);
}

// Mann-Whitney AUC with tie correction: the mean over case/control pairs of
// 1{s_case > s_ctrl} + 0.5 * 1{equal}, computed via mid-ranks.
inline double auc(std::span<const double> scores, std::span<const double> y) {
  detail::require_same_length(scores, y);
  double n1 = 0.0, n0 = 0.0;
  for (double v : y) {
    if (v == 1.0)
      n1 += 1.0;
    else if (v == 0.0)
      n0 += 1.0;
    else
      throw SpecError("labels must be 0/1");
  }
  if (n1 == 0.0 || n0 == 0.0)
    throw UndefinedAucError("AUC undefined: test labels contain a single class");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i] == 1.0) rank_sum += ranks[i];
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

}  // namespace confaudit
