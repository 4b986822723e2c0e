#pragma once

// Bagged CART classification trees: Gini split criterion, `mtry` candidate
// features per node, grown to purity or until a node holds fewer than
// min_node_size samples. The ensemble score is the fraction of trees voting
// for the positive class (leaf majority; ties vote 0). Per-tree bootstrap
// and feature sampling use seeds derived from (seed, tree index), so results
// are identical under any tree-training order.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "confaudit/errors.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {

struct ForestParams {
  std::size_t n_trees = 500;
  std::size_t mtry = 7;
  std::size_t min_node_size = 5;
};

namespace detail {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double vote = 0.0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const std::vector<std::vector<double>>& x_cols, std::size_t row) const {
    int at = 0;
    while (nodes[at].feature >= 0) {
      const auto& nd = nodes[at];
      at = x_cols[static_cast<std::size_t>(nd.feature)][row] <= nd.threshold ? nd.left
                                                                             : nd.right;
    }
    return nodes[at].vote;
  }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline double gini(double pos, double total) {
  if (total <= 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x_cols,
              std::span<const double> y, const ForestParams& params, Rng& rng)
      : x_(x_cols), y_(y), params_(params), rng_(rng) {}

  Tree build(std::vector<std::size_t> sample) {
    Tree tree;
    tree.nodes.reserve(64);
    grow(std::move(sample), tree);
    return tree;
  }

 private:
  // Returns the node index within tree.nodes.
  int grow(std::vector<std::size_t> idx, Tree& tree) {
    const int me = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double pos = 0.0;
    for (std::size_t i : idx) pos += y_[i];
    const double total = static_cast<double>(idx.size());

    const bool pure = pos == 0.0 || pos == total;
    if (pure || idx.size() < params_.min_node_size) {
      tree.nodes[me].vote = pos * 2.0 > total ? 1.0 : 0.0;
      return me;
    }

    const SplitChoice split = best_split(idx, pos);
    if (split.feature < 0) {
      tree.nodes[me].vote = pos * 2.0 > total ? 1.0 : 0.0;
      return me;
    }

    std::vector<std::size_t> left, right;
    left.reserve(idx.size());
    right.reserve(idx.size());
    const auto& col = x_[static_cast<std::size_t>(split.feature)];
    for (std::size_t i : idx)
      (col[i] <= split.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();

    tree.nodes[me].feature = split.feature;
    tree.nodes[me].threshold = split.threshold;
    const int l = grow(std::move(left), tree);
    tree.nodes[me].left = l;
    const int r = grow(std::move(right), tree);
    tree.nodes[me].right = r;
    return me;
  }

  SplitChoice best_split(const std::vector<std::size_t>& idx, double pos) {
    const std::size_t d = x_.size();
    // Partial Fisher-Yates draw of mtry distinct features.
    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), std::size_t{0});
    for (std::size_t k = 0; k < params_.mtry; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng_.below(d - k));
      std::swap(feats[k], feats[j]);
    }

    const double total = static_cast<double>(idx.size());
    const double parent = gini(pos, total);
    SplitChoice best;

    std::vector<std::pair<double, double>> vals;  // (value, label)
    for (std::size_t k = 0; k < params_.mtry; ++k) {
      const auto& col = x_[feats[k]];
      vals.clear();
      vals.reserve(idx.size());
      for (std::size_t i : idx) vals.emplace_back(col[i], y_[i]);
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      double left_pos = 0.0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left_pos += vals[i].second;
        if (vals[i].first == vals[i + 1].first) continue;  // split between values only
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        const double gain = parent - (nl / total) * gini(left_pos, nl) -
                            (nr / total) * gini(pos - left_pos, nr);
        if (gain > best.gain + 1e-12) {
          best.gain = gain;
          best.feature = static_cast<int>(feats[k]);
          best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<double>>& x_;
  std::span<const double> y_;
  const ForestParams& params_;
  Rng& rng_;
};

}  // namespace detail

struct Forest {
  std::vector<detail::Tree> trees;
  std::size_t n_features = 0;
};

inline Forest train_forest(const std::vector<std::vector<double>>& x_cols,
                           std::span<const double> y, const ForestParams& params,
                           std::uint64_t seed) {
  const std::size_t n = y.size();
  const std::size_t d = x_cols.size();
  if (d == 0) throw SpecError("train_forest needs at least one feature");
  if (params.mtry > d) throw SpecError("mtry exceeds the feature count");
  if (params.mtry == 0 || params.n_trees == 0)
    throw SpecError("mtry and n_trees must be positive");
  for (const auto& col : x_cols)
    if (col.size() != n) throw DimensionError("feature column length != label length");
  std::size_t pos = 0;
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw SpecError("labels must be 0/1");
    if (v == 1.0) ++pos;
  }
  if (pos < 2 || n - pos < 2) throw SpecError("need >= 2 samples per class");

  Forest forest;
  forest.n_features = d;
  forest.trees.resize(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(seed, {t}));
    std::vector<std::size_t> sample(n);
    for (std::size_t i = 0; i < n; ++i)
      sample[i] = static_cast<std::size_t>(rng.below(n));
    detail::TreeBuilder builder(x_cols, y, params, rng);
    forest.trees[t] = builder.build(std::move(sample));
  }
  return forest;
}

inline std::vector<double> predict_forest(const Forest& f,
                                          const std::vector<std::vector<double>>& x_cols) {
  if (x_cols.size() != f.n_features)
    throw DimensionError("feature count does not match the trained forest");
  const std::size_t n = x_cols.empty() ? 0 : x_cols[0].size();
  std::vector<double> scores(n, 0.0);
  for (const auto& tree : f.trees)
    for (std::size_t i = 0; i < n; ++i) scores[i] += tree.predict(x_cols, i);
  const double t = static_cast<double>(f.trees.size());
  for (double& s : scores) s /= t;
  return scores;
}

}  // namespace confaudit
