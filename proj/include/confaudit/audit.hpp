#pragma once

// The end-to-end confounding audit: adjustment -> repeated stratified splits
// -> classifier -> the five-hypothesis CI battery -> Bonferroni correction
// -> scenario verdict.
//
// Two-stage battery: stage 1 runs (partial) Spearman tests for the five
// hypotheses; a hypothesis that survives stage 1 at the corrected level is
// re-examined with the corresponding (partial) distance-correlation
// permutation test, and is declared independent only if that also fails to
// reject. Hypotheses already rejected at stage 1 skip stage 2.
//
// Splits are independent jobs with derived seeds; the report is identical
// for any thread count.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <future>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "confaudit/adjust.hpp"
#include "confaudit/assoc_stats.hpp"
#include "confaudit/classify.hpp"
#include "confaudit/dataset.hpp"
#include "confaudit/dcor.hpp"
#include "confaudit/dsep.hpp"
#include "confaudit/errors.hpp"

namespace confaudit {

struct AuditConfig {
  AdjustmentSpec adjustment;
  ClassifierKind classifier = ClassifierKind::logistic;
  ForestParams forest_params;
  SplitPlan splits;
  double alpha = 0.05;
  std::size_t B_dcor = 1000;
  bool bonferroni = true;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecError("alpha must be in (0, 1)");
    if (B_dcor < 99) throw SpecError("B_dcor must be >= 99");
    splits.validate();
    adjustment.validate();
  }
};

inline std::array<double, 5> bonferroni(const std::array<double, 5>& p) {
  std::array<double, 5> out;
  for (std::size_t k = 0; k < 5; ++k) {
    if (p[k] < 0.0 || p[k] > 1.0) throw SpecError("p-values must lie in [0, 1]");
    out[k] = std::min(1.0, 5.0 * p[k]);
  }
  return out;
}

struct HypothesisResult {
  std::string hypothesis;
  TestResult stage1;
  double stage1_p_corrected = 1.0;
  std::optional<TestResult> stage2;
  double stage2_p_corrected = 1.0;
  bool independent = false;
};

struct BatteryResult {
  CiPattern pattern;
  std::array<HypothesisResult, 5> tests;
};

// The five Eq.-style hypotheses on (scores r, labels y, confounder a).
inline BatteryResult ci_test_battery(std::span<const double> r,
                                     std::span<const double> y,
                                     std::span<const double> a, double alpha,
                                     std::size_t B, std::uint64_t seed,
                                     bool apply_bonferroni = true) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw SpecError("alpha must be in (0, 1)");
  BatteryResult out;
  std::array<TestResult, 5> stage1 = {
      spearman(r, y), spearman(r, a), spearman(a, y),
      partial_spearman(r, y, a), partial_spearman(r, a, y)};

  std::array<double, 5> raw;
  for (std::size_t k = 0; k < 5; ++k) raw[k] = stage1[k].p_value;
  const std::array<double, 5> corrected = apply_bonferroni ? bonferroni(raw) : raw;

  for (std::size_t k = 0; k < 5; ++k) {
    HypothesisResult& h = out.tests[k];
    h.hypothesis = CiPattern::labels()[k];
    h.stage1 = stage1[k];
    h.stage1_p_corrected = corrected[k];
    if (corrected[k] < alpha) {
      h.independent = false;  // rejected at stage 1; stage 2 skipped
      continue;
    }
    TestResult s2;
    const std::uint64_t s2_seed = derive_seed(seed, {k});
    switch (k) {
      case 0: s2 = dcor_perm_test(r, y, B, s2_seed); break;
      case 1: s2 = dcor_perm_test(r, a, B, s2_seed); break;
      case 2: s2 = dcor_perm_test(a, y, B, s2_seed); break;
      case 3: s2 = pdcor_perm_test(r, y, a, B, s2_seed); break;
      case 4: s2 = pdcor_perm_test(r, a, y, B, s2_seed); break;
    }
    h.stage2 = s2;
    h.stage2_p_corrected =
        apply_bonferroni ? std::min(1.0, 5.0 * s2.p_value) : s2.p_value;
    h.independent = h.stage2_p_corrected >= alpha;
  }
  for (std::size_t k = 0; k < 5; ++k)
    out.pattern.independent[k] = out.tests[k].independent;
  return out;
}

struct SplitRecord {
  std::size_t index = 0;
  double auc = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  BatteryResult battery;
};

struct AuditReport {
  AuditConfig config;
  std::vector<SplitRecord> splits;
  CiPattern majority_pattern;
  std::string verdict;
  nlohmann::ordered_json balance;
};

namespace detail {

struct FittedAdjustment {
  AdjustMethod method = AdjustMethod::none;
  std::vector<double> edges;       // matching
  PropensityFit propensity;        // ipw
  ResidualizerModel residualizer;  // residualize
};

// Fitted components come from the training split only.
inline FittedAdjustment fit_adjustment(const Dataset& train, const AdjustmentSpec& spec) {
  FittedAdjustment f;
  f.method = spec.method;
  switch (spec.method) {
    case AdjustMethod::none:
      break;
    case AdjustMethod::matching:
      f.edges = stratum_edges(train.a, spec.strata);
      break;
    case AdjustMethod::ipw:
      f.propensity = fit_propensity(train.a, train.y);
      break;
    case AdjustMethod::residualize:
      f.residualizer = fit_residualizer(train);
      break;
  }
  return f;
}

// Row-level operations (downsampling, resampling) run independently per side
// with their own seeds.
inline Dataset apply_adjustment(const FittedAdjustment& f, const Dataset& side,
                                std::uint64_t seed) {
  switch (f.method) {
    case AdjustMethod::none:
      return side;
    case AdjustMethod::matching:
      return match_samples(side, f.edges, seed);
    case AdjustMethod::ipw:
      return ipw_resample(ipw_weights(side, f.propensity), seed);
    case AdjustMethod::residualize:
      return apply_residualizer(f.residualizer, side);
  }
  throw SpecError("unknown adjustment method");
}

inline SplitRecord run_one_split(const Dataset& data, const AuditConfig& cfg,
                                 const Split& split, std::size_t index) {
  SplitRecord rec;
  rec.index = index;

  Dataset train = data.subset(split.train);
  Dataset test = data.subset(split.test);

  const FittedAdjustment fitted = fit_adjustment(train, cfg.adjustment);
  train = apply_adjustment(fitted, train, derive_seed(cfg.adjustment.seed, {index, 1}));
  test = apply_adjustment(fitted, test, derive_seed(cfg.adjustment.seed, {index, 2}));
  rec.n_train = train.n_rows();
  rec.n_test = test.n_rows();

  // The model consumes feature columns only; the confounder never enters.
  const TrainedModel model =
      train_model(cfg.classifier, train.x, train.y, cfg.forest_params,
                  derive_seed(cfg.splits.seed, {0x7eu, index}));
  const std::vector<double> scores = predict_scores(model, test.x);

  rec.auc = auc(scores, test.y);
  rec.battery = ci_test_battery(scores, test.y, test.a, cfg.alpha, cfg.B_dcor,
                                derive_seed(cfg.splits.seed, {0xcbu, index}),
                                cfg.bonferroni);
  return rec;
}

}  // namespace detail

inline AuditReport run_audit(const Dataset& data, const AuditConfig& cfg) {
  cfg.validate();
  data.validate();
  data.require_binary_labels();

  AuditReport report;
  report.config = cfg;
  report.balance = adjusted_balance_json(
      data, AdjustmentSpec{cfg.adjustment.method, cfg.adjustment.strata,
                           derive_seed(cfg.adjustment.seed, {0xbau})});

  const auto splits = make_splits(data.y, cfg.splits);
  report.splits.resize(splits.size());

  const std::size_t workers =
      std::max<std::size_t>(1, cfg.threads == 0 ? std::thread::hardware_concurrency()
                                                : cfg.threads);
  if (workers == 1 || splits.size() == 1) {
    for (std::size_t s = 0; s < splits.size(); ++s) {
      try {
        report.splits[s] = detail::run_one_split(data, cfg, splits[s], s);
      } catch (const Error& e) {
        throw Error("split " + std::to_string(s) + ": " + e.what());
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> jobs;
    std::mutex error_mutex;
    std::string first_error;
    for (std::size_t w = 0; w < std::min(workers, splits.size()); ++w) {
      jobs.push_back(std::async(std::launch::async, [&] {
        for (;;) {
          const std::size_t s = next.fetch_add(1);
          if (s >= splits.size()) return;
          try {
            report.splits[s] = detail::run_one_split(data, cfg, splits[s], s);
          } catch (const Error& e) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (first_error.empty())
              first_error = "split " + std::to_string(s) + ": " + e.what();
          }
        }
      }));
    }
    for (auto& j : jobs) j.get();
    if (!first_error.empty()) throw Error(first_error);
  }

  // Slot-wise majority vote across splits; ties count as dependent.
  for (std::size_t k = 0; k < 5; ++k) {
    std::size_t independent = 0;
    for (const auto& rec : report.splits)
      if (rec.battery.pattern.independent[k]) ++independent;
    report.majority_pattern.independent[k] = 2 * independent > report.splits.size();
  }
  report.verdict = match_pattern(report.majority_pattern).verdict();
  return report;
}

inline nlohmann::ordered_json to_json(const TestResult& t) {
  nlohmann::ordered_json j;
  j["stat"] = t.statistic;
  j["p"] = t.p_value;
  j["method"] = test_method_name(t.method);
  j["n"] = t.n;
  if (t.permutations) j["B"] = *t.permutations;
  return j;
}

inline nlohmann::ordered_json pattern_json(const CiPattern& p) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < 5; ++k)
    j[CiPattern::labels()[k]] = p.independent[k] ? "independent" : "dependent";
  return j;
}

inline nlohmann::ordered_json config_json(const AuditConfig& cfg) {
  nlohmann::ordered_json j;
  j["adjustment"] = adjust_method_name(cfg.adjustment.method);
  j["strata"] = cfg.adjustment.strata;
  j["classifier"] = classifier_name(cfg.classifier);
  if (cfg.classifier == ClassifierKind::forest) {
    j["forest"] = {{"trees", cfg.forest_params.n_trees},
                   {"mtry", cfg.forest_params.mtry},
                   {"min_node_size", cfg.forest_params.min_node_size}};
  }
  j["splits"] = cfg.splits.n_splits;
  j["train_fraction"] = cfg.splits.train_fraction;
  j["alpha"] = cfg.alpha;
  j["B_dcor"] = cfg.B_dcor;
  j["bonferroni"] = cfg.bonferroni;
  j["split_seed"] = cfg.splits.seed;
  j["adjust_seed"] = cfg.adjustment.seed;
  return j;
}

inline nlohmann::ordered_json report_json(const AuditReport& report) {
  nlohmann::ordered_json j;
  j["config"] = config_json(report.config);
  j["verdict"] = report.verdict;
  j["majority_pattern"] = pattern_json(report.majority_pattern);
  auto& splits = j["splits"] = nlohmann::ordered_json::array();
  for (const auto& rec : report.splits) {
    nlohmann::ordered_json s;
    s["split"] = rec.index;
    s["auc"] = rec.auc;
    s["n_train"] = rec.n_train;
    s["n_test"] = rec.n_test;
    auto& tests = s["tests"] = nlohmann::ordered_json::array();
    for (const auto& h : rec.battery.tests) {
      nlohmann::ordered_json t;
      t["hypothesis"] = h.hypothesis;
      t["stage1"] = {{"stat", h.stage1.statistic},
                     {"p", h.stage1.p_value},
                     {"p_corrected", h.stage1_p_corrected}};
      if (h.stage2) t["stage2"] = {{"stat", h.stage2->statistic}, {"p", h.stage2->p_value}};
      t["independent"] = h.independent;
      tests.push_back(std::move(t));
    }
    s["pattern"] = pattern_json(rec.battery.pattern);
    splits.push_back(std::move(s));
  }
  j["balance"] = report.balance;
  return j;
}

// Rows = splits, columns = the five stage-1 p-values.
inline std::string pvalue_csv(const AuditReport& report) {
  std::ostringstream os;
  os << "split,r_y,r_a,a_y,r_y_given_a,r_a_given_y\n";
  for (const auto& rec : report.splits) {
    os << rec.index;
    for (const auto& h : rec.battery.tests)
      os << ',' << detail::format_double(h.stage1.p_value);
    os << "\n";
  }
  return os.str();
}

}  // namespace confaudit
