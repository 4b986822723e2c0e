#pragma once

// Confounding adjustment: stratified sample matching, approximate inverse
// probability weighting via a propensity model, and feature residualization,
// plus a confounder/label balance report.
//
// Conventions:
//   - matching downsamples the majority class within each confounder stratum
//     so every kept stratum holds equally many cases and controls;
//   - the propensity model is logistic in the confounder alone (the goal is
//     decoupling A from Y, not outcome modeling);
//   - "approximate IPW" resamples a pseudo-population with probabilities
//     proportional to the weights, since downstream classifiers train
//     unweighted; the weights themselves are also exposed;
//   - residualizers are fit on training data and applied to any dataset;
//   - no adjustment ever relabels: y is untouched everywhere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "confaudit/assoc_stats.hpp"
#include "confaudit/dataset.hpp"
#include "confaudit/errors.hpp"
#include "confaudit/logistic.hpp"
#include "confaudit/rng.hpp"

namespace confaudit {

enum class AdjustMethod { none, matching, ipw, residualize };

inline const char* adjust_method_name(AdjustMethod m) {
  switch (m) {
    case AdjustMethod::none: return "none";
    case AdjustMethod::matching: return "matching";
    case AdjustMethod::ipw: return "ipw";
    case AdjustMethod::residualize: return "residualize";
  }
  return "?";
}

inline AdjustMethod parse_adjust_method(const std::string& s) {
  if (s == "none") return AdjustMethod::none;
  if (s == "matching") return AdjustMethod::matching;
  if (s == "ipw") return AdjustMethod::ipw;
  if (s == "residualize") return AdjustMethod::residualize;
  throw SpecError("unknown adjustment `" + s + "`");
}

struct AdjustmentSpec {
  AdjustMethod method = AdjustMethod::none;
  std::size_t strata = 10;  // bins for a continuous confounder
  std::uint64_t seed = 0;

  void validate() const {
    if (strata < 2) throw SpecError("strata must be >= 2");
  }
};

// Interior quantile cut points of `a`, deduplicated; heavy ties merge bins.
inline std::vector<double> stratum_edges(std::span<const double> a, std::size_t strata) {
  if (strata < 2) throw SpecError("strata must be >= 2");
  if (a.size() < 2 || variance(a) <= 0.0)
    throw DegenerateConfounderError("confounder has zero variance");
  std::vector<double> sorted(a.begin(), a.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (std::size_t k = 1; k < strata; ++k) {
    const std::size_t pos = k * sorted.size() / strata;
    edges.push_back(sorted[pos]);
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// Stratum index per row: values <= edge fall below it; indices are compacted
// to 0..L-1 over the nonempty bins.
inline std::vector<std::size_t> assign_strata(std::span<const double> a,
                                              std::span<const double> edges) {
  std::vector<std::size_t> raw(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    raw[i] = static_cast<std::size_t>(
        std::lower_bound(edges.begin(), edges.end(), a[i]) - edges.begin());
  std::vector<std::size_t> used;
  for (std::size_t r : raw) used.push_back(r);
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  for (std::size_t& r : raw)
    r = static_cast<std::size_t>(std::lower_bound(used.begin(), used.end(), r) -
                                 used.begin());
  return raw;
}

inline std::vector<std::size_t> stratify(std::span<const double> a, std::size_t strata) {
  return assign_strata(a, stratum_edges(a, strata));
}

// Within each stratum keep all of the minority class and a random subsample
// of the majority, so kept strata are exactly class-balanced. Strata lacking
// a class are dropped; row order is preserved.
inline Dataset match_samples(const Dataset& d, std::span<const double> edges,
                             std::uint64_t seed) {
  d.validate();
  d.require_binary_labels();
  const auto strata = assign_strata(d.a, edges);
  const std::size_t n_strata =
      strata.empty() ? 0 : *std::max_element(strata.begin(), strata.end()) + 1;

  std::vector<std::vector<std::size_t>> cases(n_strata), controls(n_strata);
  for (std::size_t i = 0; i < d.n_rows(); ++i)
    (d.y[i] == 1.0 ? cases : controls)[strata[i]].push_back(i);

  std::vector<std::size_t> keep;
  for (std::size_t s = 0; s < n_strata; ++s) {
    const std::size_t m = std::min(cases[s].size(), controls[s].size());
    if (m == 0) continue;
    Rng rng(derive_seed(seed, {s}));
    for (auto* side : {&cases[s], &controls[s]}) {
      if (side->size() > m) rng.shuffle(*side);
      keep.insert(keep.end(), side->begin(), side->begin() + m);
    }
  }
  if (keep.empty())
    throw EmptyResultError("no stratum contains both classes; matching is empty");
  std::sort(keep.begin(), keep.end());
  return d.subset(keep);
}

inline Dataset match_samples(const Dataset& d, std::size_t strata, std::uint64_t seed) {
  return match_samples(d, stratum_edges(d.a, strata), seed);
}

// Logistic model of y on the confounder alone.
struct PropensityFit {
  LogisticModel model;
  bool separation = false;
};

inline PropensityFit fit_propensity(std::span<const double> a, std::span<const double> y) {
  detail::require_same_length(a, y);
  if (variance(a) <= 0.0)
    throw DegenerateConfounderError("confounder has zero variance");
  PropensityFit fit;
  // Complete separation: every case lies strictly above (or below) every
  // control on a.
  double max_ctrl = -1e308, min_ctrl = 1e308, max_case = -1e308, min_case = 1e308;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (y[i] == 1.0) {
      max_case = std::max(max_case, a[i]);
      min_case = std::min(min_case, a[i]);
    } else {
      max_ctrl = std::max(max_ctrl, a[i]);
      min_ctrl = std::min(min_ctrl, a[i]);
    }
  }
  fit.separation = min_case > max_ctrl || min_ctrl > max_case;
  std::vector<std::vector<double>> cols(1, std::vector<double>(a.begin(), a.end()));
  fit.model = train_logistic(cols, y);
  fit.separation = fit.separation || !fit.model.converged;
  return fit;
}

constexpr double kPropensityClipLo = 0.01;
constexpr double kPropensityClipHi = 0.99;

inline std::vector<double> propensity_apply(const PropensityFit& fit,
                                            std::span<const double> a) {
  std::vector<std::vector<double>> cols(1, std::vector<double>(a.begin(), a.end()));
  auto scores = predict_logistic(fit.model, cols);
  for (double& s : scores) s = std::clamp(s, kPropensityClipLo, kPropensityClipHi);
  return scores;
}

inline std::vector<double> propensity_scores(const Dataset& d) {
  d.validate();
  d.require_binary_labels();
  return propensity_apply(fit_propensity(d.a, d.y), d.a);
}

// w = 1/p for cases, 1/(1-p) for controls, normalized to mean 1.
inline Dataset ipw_weights(const Dataset& d, const PropensityFit& fit) {
  d.validate();
  d.require_binary_labels();
  const auto p = propensity_apply(fit, d.a);
  Dataset out = d;
  out.weights.resize(d.n_rows());
  double total = 0.0;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    out.weights[i] = d.y[i] == 1.0 ? 1.0 / p[i] : 1.0 / (1.0 - p[i]);
    total += out.weights[i];
  }
  const double scale = static_cast<double>(d.n_rows()) / total;
  for (double& w : out.weights) w *= scale;
  return out;
}

inline Dataset ipw_weights(const Dataset& d) {
  return ipw_weights(d, fit_propensity(d.a, d.y));
}

// n draws with replacement, probability proportional to the weights; the
// result is an unweighted pseudo-population.
inline Dataset ipw_resample(const Dataset& d, std::uint64_t seed) {
  d.validate();
  if (!d.has_weights()) throw SpecError("ipw_resample needs populated weights");
  std::vector<double> cdf(d.n_rows());
  double acc = 0.0;
  for (std::size_t i = 0; i < d.n_rows(); ++i) {
    acc += d.weights[i];
    cdf[i] = acc;
  }
  Rng rng(seed);
  std::vector<std::size_t> idx(d.n_rows());
  for (std::size_t k = 0; k < d.n_rows(); ++k) {
    const double u = rng.uniform() * acc;
    idx[k] = static_cast<std::size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (idx[k] >= d.n_rows()) idx[k] = d.n_rows() - 1;
  }
  std::sort(idx.begin(), idx.end());
  Dataset out = d.subset(idx);
  out.weights.clear();
  return out;
}

// Per-feature simple linear regression on the confounder.
struct ResidualizerModel {
  std::vector<double> intercept;
  std::vector<double> slope;
};

inline ResidualizerModel fit_residualizer(const Dataset& d) {
  d.validate();
  const double va = variance(d.a);
  if (va <= 0.0) throw DegenerateConfounderError("confounder has zero variance");
  const double ma = mean(d.a);
  ResidualizerModel m;
  m.intercept.resize(d.n_features());
  m.slope.resize(d.n_features());
  for (std::size_t j = 0; j < d.n_features(); ++j) {
    const double slope = covariance(d.x[j], d.a) / va;
    m.slope[j] = slope;
    m.intercept[j] = mean(d.x[j]) - slope * ma;
  }
  return m;
}

inline Dataset apply_residualizer(const ResidualizerModel& m, const Dataset& d) {
  d.validate();
  if (m.slope.size() != d.n_features())
    throw DimensionError("residualizer feature count does not match the dataset");
  Dataset out = d;
  for (std::size_t j = 0; j < d.n_features(); ++j)
    for (std::size_t i = 0; i < d.n_rows(); ++i)
      out.x[j][i] = d.x[j][i] - (m.intercept[j] + m.slope[j] * d.a[i]);
  return out;
}

struct ClassSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

namespace detail {

inline double quantile_linear(std::vector<double> sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline ClassSummary summarize(std::vector<double> values) {
  ClassSummary s;
  s.count = values.size();
  s.mean = mean(values);
  s.sd = values.size() > 1 ? std::sqrt(variance(values)) : 0.0;
  std::sort(values.begin(), values.end());
  s.q1 = quantile_linear(values, 0.25);
  s.median = quantile_linear(values, 0.5);
  s.q3 = quantile_linear(values, 0.75);
  return s;
}

}  // namespace detail

// Per-class confounder summary, standardized mean difference, and the
// marginal spearman(a, y) test.
struct BalanceReport {
  std::size_t n = 0;
  ClassSummary controls;  // y == 0
  ClassSummary cases;     // y == 1
  double smd = 0.0;
  TestResult spearman_ay;
};

inline BalanceReport balance_report(const Dataset& d) {
  d.validate();
  d.require_binary_labels();
  std::vector<double> a0, a1;
  for (std::size_t i = 0; i < d.n_rows(); ++i)
    (d.y[i] == 1.0 ? a1 : a0).push_back(d.a[i]);
  if (a0.empty()) throw EmptyResultError("class 0 is empty");
  if (a1.empty()) throw EmptyResultError("class 1 is empty");

  BalanceReport r;
  r.n = d.n_rows();
  r.controls = detail::summarize(a0);
  r.cases = detail::summarize(a1);
  const double pooled =
      std::sqrt(0.5 * (r.controls.sd * r.controls.sd + r.cases.sd * r.cases.sd));
  r.smd = pooled > 0.0 ? (r.cases.mean - r.controls.mean) / pooled : 0.0;
  r.spearman_ay = spearman(d.a, d.y);
  return r;
}

inline nlohmann::ordered_json to_json(const ClassSummary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"sd", s.sd},
          {"q1", s.q1},       {"median", s.median}, {"q3", s.q3}};
}

// Schema: {method, n_before, n_after, smd, spearman_stat, spearman_p,
// per_class: {...}}. `apply` runs the adjustment on a copy of the full
// dataset to show what the method does to the a/y balance.
inline nlohmann::ordered_json adjusted_balance_json(const Dataset& d,
                                                    const AdjustmentSpec& spec) {
  spec.validate();
  Dataset adjusted = d;
  switch (spec.method) {
    case AdjustMethod::none:
      break;
    case AdjustMethod::matching:
      adjusted = match_samples(d, spec.strata, spec.seed);
      break;
    case AdjustMethod::ipw:
      adjusted = ipw_resample(ipw_weights(d), spec.seed);
      break;
    case AdjustMethod::residualize:
      adjusted = apply_residualizer(fit_residualizer(d), d);
      break;
  }
  const BalanceReport r = balance_report(adjusted);
  nlohmann::ordered_json j;
  j["method"] = adjust_method_name(spec.method);
  j["n_before"] = d.n_rows();
  j["n_after"] = adjusted.n_rows();
  j["smd"] = r.smd;
  j["spearman_stat"] = r.spearman_ay.statistic;
  j["spearman_p"] = r.spearman_ay.p_value;
  j["per_class"] = {{"controls", to_json(r.controls)}, {"cases", to_json(r.cases)}};
  return j;
}

}  // namespace confaudit
