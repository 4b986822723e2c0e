#pragma once

// Command-line front end: simulation, permutation-null demonstration,
// d-separation queries, and full audits over synthetic or ingested CSV data.
//
// Every file-writing command drops a manifest.json next to its artifacts
// holding the command name, the fully resolved configuration, the master
// seed, relative artifact paths, and the tool version. `replay <manifest>`
// re-executes the recorded run and reproduces every artifact byte for byte.
// All randomness flows from the single --seed flag.
//
// Exit codes: 0 success, 1 error, 2 audit ran but the observed pattern
// matched no catalogued scenario.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "confaudit/audit.hpp"
#include "confaudit/dataset.hpp"
#include "confaudit/dcor.hpp"
#include "confaudit/dsep.hpp"
#include "confaudit/errors.hpp"
#include "confaudit/linear_scm.hpp"
#include "confaudit/restricted_perm.hpp"
#include "confaudit/version.hpp"

namespace confaudit {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open `" + path.string() + "` for writing");
  f << text;
  if (!f) throw IoError("write failed on `" + path.string() + "`");
}

inline void write_manifest(const fs::path& out_dir, const std::string& command,
                           std::uint64_t seed, const ordered_json& config,
                           const std::vector<std::string>& artifacts) {
  ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = seed;
  m["config"] = config;
  m["artifacts"] = artifacts;
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

inline fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

struct SpecArgs {
  std::string preset;  // "", or a|b|capped
  ScmSpec spec;

  ScmSpec resolve() const {
    ScmSpec s = preset.empty() ? spec : scm_preset(preset.at(0));
    s.validate();
    return s;
  }
};

}  // namespace detail

// ---- simulate -------------------------------------------------------------

struct SimulateConfig {
  std::string preset;  // empty = explicit coefficients
  ScmSpec spec;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
};

inline ordered_json to_json(const SimulateConfig& c) {
  ordered_json j;
  j["preset"] = c.preset;
  j["beta_ya"] = c.spec.beta_ya;
  j["beta_xa"] = c.spec.beta_xa;
  j["beta_xy"] = c.spec.beta_xy;
  j["sigma2_y"] = c.spec.sigma2_y;
  j["sigma2_x"] = c.spec.sigma2_x;
  j["p"] = c.spec.p;
  j["n"] = c.n;
  return j;
}

inline SimulateConfig simulate_config_from_json(const ordered_json& j, std::uint64_t seed) {
  SimulateConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.spec.beta_ya = j.at("beta_ya").get<double>();
  c.spec.beta_xa = j.at("beta_xa").get<double>();
  c.spec.beta_xy = j.at("beta_xy").get<double>();
  c.spec.sigma2_y = j.at("sigma2_y").get<double>();
  c.spec.sigma2_x = j.at("sigma2_x").get<double>();
  c.spec.p = j.at("p").get<double>();
  c.n = j.at("n").get<std::size_t>();
  c.seed = seed;
  return c;
}

inline int run_simulate(const SimulateConfig& cfg, const std::string& out,
                        std::ostream& os) {
  const ScmSpec spec = cfg.preset.empty() ? cfg.spec : scm_preset(cfg.preset.at(0));
  const Dataset d = simulate_binary(spec, cfg.n, cfg.seed);
  const fs::path dir = detail::prepare_out_dir(out);
  {
    std::ostringstream csv;
    write_csv(d, csv);
    detail::write_text(dir / "dataset.csv", csv.str());
  }
  SimulateConfig resolved = cfg;
  resolved.spec = spec;
  detail::write_manifest(dir, "simulate", cfg.seed, to_json(resolved), {"dataset.csv"});
  os << "wrote " << (dir / "dataset.csv").string() << " (" << d.n_rows() << " rows)\n";
  return 0;
}

// ---- theorem1 -------------------------------------------------------------

struct Theorem1Config {
  std::string preset;  // empty = read --data
  std::string data;    // CSV path
  std::size_t n = 2000;
  std::size_t B = 5000;
  std::uint64_t seed = 1;
};

inline ordered_json to_json(const Theorem1Config& c) {
  ordered_json j;
  j["preset"] = c.preset;
  j["data"] = c.data;
  j["n"] = c.n;
  j["B"] = c.B;
  return j;
}

inline Theorem1Config theorem1_config_from_json(const ordered_json& j, std::uint64_t seed) {
  Theorem1Config c;
  c.preset = j.at("preset").get<std::string>();
  c.data = j.at("data").get<std::string>();
  c.n = j.at("n").get<std::size_t>();
  c.B = j.at("B").get<std::size_t>();
  c.seed = seed;
  return c;
}

inline int run_theorem1(const Theorem1Config& cfg, const std::string& out,
                        std::ostream& os) {
  Dataset d;
  if (!cfg.preset.empty()) {
    // Simulated continuous-response data, standardized so the permutation
    // null, its analytic mean and the confounder-only value all live on the
    // path-coefficient scale.
    d = standardize(simulate(scm_preset(cfg.preset.at(0)), cfg.n, derive_seed(cfg.seed, {0})),
                    /*include_y=*/true);
  } else {
    if (cfg.data.empty()) throw SpecError("theorem1 needs --preset or --data");
    d = standardize(read_csv(cfg.data));
  }
  if (d.n_features() != 1)
    throw SpecError("theorem1 expects a single feature column");

  const RestrictedPermNull null_dist =
      perm_null_covariance(d.x[0], d.y, d.a, cfg.B, derive_seed(cfg.seed, {1}));

  ordered_json j;
  j["observed"] = null_dist.observed;
  j["analytic_mean"] = null_dist.analytic_mean;
  j["confounder_only"] = null_dist.confounder_only;
  j["bias"] = null_dist.analytic_mean - null_dist.confounder_only;
  j["perm_mean"] = null_dist.perm_mean();
  j["perm_sd"] = null_dist.perm_sd();
  j["B"] = null_dist.stats.size();
  j["n"] = null_dist.n;

  const fs::path dir = detail::prepare_out_dir(out);
  detail::write_text(dir / "theorem1.json", j.dump(2) + "\n");
  {
    std::ostringstream csv;
    csv << "stat\n";
    for (double v : null_dist.stats) csv << confaudit::detail::format_double(v) << "\n";
    detail::write_text(dir / "perm_stats.csv", csv.str());
  }
  detail::write_manifest(dir, "theorem1", cfg.seed, to_json(cfg),
                         {"theorem1.json", "perm_stats.csv"});
  os << "analytic_mean=" << null_dist.analytic_mean
     << " confounder_only=" << null_dist.confounder_only
     << " perm_mean=" << null_dist.perm_mean() << "\n";
  return 0;
}

// ---- dsep -----------------------------------------------------------------

struct DsepConfig {
  std::string dag;    // path to the edge-list file
  std::string query;  // "R _||_ Y | A"; empty with pattern=true prints all five
  bool pattern = false;
};

inline ordered_json to_json(const DsepConfig& c) {
  ordered_json j;
  j["dag"] = c.dag;
  j["query"] = c.query;
  j["pattern"] = c.pattern;
  return j;
}

inline DsepConfig dsep_config_from_json(const ordered_json& j) {
  DsepConfig c;
  c.dag = j.at("dag").get<std::string>();
  c.query = j.at("query").get<std::string>();
  c.pattern = j.at("pattern").get<bool>();
  return c;
}

namespace detail {

struct ParsedQuery {
  std::string lhs;
  std::string rhs;
  std::set<std::string> cond;
};

inline ParsedQuery parse_query(const std::string& text) {
  const auto sep = text.find("_||_");
  if (sep == std::string::npos)
    throw ParseError("query must look like `R _||_ Y | A`");
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  ParsedQuery q;
  q.lhs = trim(text.substr(0, sep));
  std::string rest = text.substr(sep + 4);
  const auto bar = rest.find('|');
  std::string cond_text;
  if (bar != std::string::npos) {
    cond_text = rest.substr(bar + 1);
    rest = rest.substr(0, bar);
  }
  q.rhs = trim(rest);
  if (q.lhs.empty() || q.rhs.empty())
    throw ParseError("query must name two variables");
  std::string tok;
  for (char ch : cond_text) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!tok.empty()) q.cond.insert(tok);
      tok.clear();
    } else {
      tok.push_back(ch);
    }
  }
  if (!tok.empty()) q.cond.insert(tok);
  return q;
}

}  // namespace detail

inline int run_dsep(const DsepConfig& cfg, const std::optional<std::string>& out,
                    std::ostream& os) {
  std::ifstream f(cfg.dag);
  if (!f) throw IoError("cannot open `" + cfg.dag + "`");
  const CausalDag g = parse_dag(f);

  std::ostringstream text;
  if (cfg.pattern) {
    const CiPattern p = implied_ci_pattern(g);
    for (std::size_t k = 0; k < 5; ++k)
      text << CiPattern::labels()[k] << ": "
           << (p.independent[k] ? "independent" : "dependent") << "\n";
  } else {
    if (cfg.query.empty()) throw SpecError("dsep needs --query or --pattern");
    const auto q = detail::parse_query(cfg.query);
    const bool sep = is_d_separated(g, q.lhs, q.rhs, q.cond);
    text << (sep ? "separated" : "connected") << "\n";
  }
  os << text.str();
  if (out) {
    const fs::path dir = detail::prepare_out_dir(*out);
    detail::write_text(dir / "dsep.txt", text.str());
    detail::write_manifest(dir, "dsep", 0, to_json(cfg), {"dsep.txt"});
  }
  return 0;
}

// ---- audit ----------------------------------------------------------------

struct AuditCliConfig {
  std::string preset;  // empty = read --data
  std::string data;
  std::size_t n = 4000;
  std::string adjust = "none";
  std::string clf = "logistic";
  std::size_t splits = 30;
  double train_frac = 0.7;
  double alpha = 0.05;
  std::size_t B_dcor = 1000;
  std::size_t strata = 10;
  std::size_t trees = 500;
  std::size_t mtry = 7;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
};

inline ordered_json to_json(const AuditCliConfig& c) {
  ordered_json j;
  j["preset"] = c.preset;
  j["data"] = c.data;
  j["n"] = c.n;
  j["adjust"] = c.adjust;
  j["clf"] = c.clf;
  j["splits"] = c.splits;
  j["train_frac"] = c.train_frac;
  j["alpha"] = c.alpha;
  j["B_dcor"] = c.B_dcor;
  j["strata"] = c.strata;
  j["trees"] = c.trees;
  j["mtry"] = c.mtry;
  return j;
}

inline AuditCliConfig audit_config_from_json(const ordered_json& j, std::uint64_t seed,
                                             std::size_t threads) {
  AuditCliConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.data = j.at("data").get<std::string>();
  c.n = j.at("n").get<std::size_t>();
  c.adjust = j.at("adjust").get<std::string>();
  c.clf = j.at("clf").get<std::string>();
  c.splits = j.at("splits").get<std::size_t>();
  c.train_frac = j.at("train_frac").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.B_dcor = j.at("B_dcor").get<std::size_t>();
  c.strata = j.at("strata").get<std::size_t>();
  c.trees = j.at("trees").get<std::size_t>();
  c.mtry = j.at("mtry").get<std::size_t>();
  c.seed = seed;
  c.threads = threads;
  return c;
}

inline int run_audit_cmd(const AuditCliConfig& cfg, const std::string& out,
                         std::ostream& os) {
  Dataset d;
  if (!cfg.preset.empty()) {
    d = simulate_binary(scm_preset(cfg.preset.at(0)), cfg.n, derive_seed(cfg.seed, {0}));
  } else {
    if (cfg.data.empty()) throw SpecError("audit needs --preset or --data");
    d = read_csv(cfg.data);
  }

  AuditConfig acfg;
  acfg.adjustment.method = parse_adjust_method(cfg.adjust);
  acfg.adjustment.strata = cfg.strata;
  acfg.adjustment.seed = derive_seed(cfg.seed, {2});
  if (cfg.clf == "logistic")
    acfg.classifier = ClassifierKind::logistic;
  else if (cfg.clf == "forest")
    acfg.classifier = ClassifierKind::forest;
  else
    throw SpecError("unknown classifier `" + cfg.clf + "`");
  acfg.forest_params.n_trees = cfg.trees;
  acfg.forest_params.mtry = cfg.mtry;
  acfg.splits.n_splits = cfg.splits;
  acfg.splits.train_fraction = cfg.train_frac;
  acfg.splits.seed = derive_seed(cfg.seed, {1});
  acfg.alpha = cfg.alpha;
  acfg.B_dcor = cfg.B_dcor;
  acfg.threads = cfg.threads;

  const AuditReport report = run_audit(d, acfg);

  const fs::path dir = detail::prepare_out_dir(out);
  detail::write_text(dir / "report.json", report_json(report).dump(2) + "\n");
  detail::write_text(dir / "pvalues.csv", pvalue_csv(report));
  detail::write_text(dir / "balance.json", report.balance.dump(2) + "\n");
  detail::write_manifest(dir, "audit", cfg.seed, to_json(cfg),
                         {"report.json", "pvalues.csv", "balance.json"});
  os << "verdict: " << report.verdict << "\n";
  return report.verdict == "unrecognized" ? 2 : 0;
}

// ---- replay ---------------------------------------------------------------

inline int run_replay(const std::string& manifest_path,
                      const std::optional<std::string>& out_override, std::ostream& os) {
  std::ifstream f(manifest_path);
  if (!f) throw IoError("cannot open `" + manifest_path + "`");
  ordered_json m;
  try {
    m = ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  const std::string command = m.at("command").get<std::string>();
  const std::uint64_t seed = m.value("seed", std::uint64_t{0});
  const std::string out =
      out_override ? *out_override : fs::path(manifest_path).parent_path().string();
  const ordered_json& config = m.at("config");

  if (command == "simulate")
    return run_simulate(simulate_config_from_json(config, seed), out, os);
  if (command == "theorem1")
    return run_theorem1(theorem1_config_from_json(config, seed), out, os);
  if (command == "dsep") return run_dsep(dsep_config_from_json(config), out, os);
  if (command == "audit")
    return run_audit_cmd(audit_config_from_json(config, seed, 0), out, os);
  throw SpecError("manifest names unknown command `" + command + "`");
}

// ---- entry point ----------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& os = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"confaudit: confounding audits for probabilistic classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  SimulateConfig sim;
  std::string sim_out = ".";
  auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset CSV");
  sim_cmd->add_option("--preset", sim.preset, "configuration a, b or c")
      ->check(CLI::IsMember({"a", "b", "c"}));
  sim_cmd->add_option("--beta-ya", sim.spec.beta_ya, "effect of A on Y");
  sim_cmd->add_option("--beta-xa", sim.spec.beta_xa, "effect of A on X");
  sim_cmd->add_option("--beta-xy", sim.spec.beta_xy, "effect of Y on X");
  sim_cmd->add_option("--sigma2-y", sim.spec.sigma2_y, "disturbance variance of Y");
  sim_cmd->add_option("--sigma2-x", sim.spec.sigma2_x, "disturbance variance of X");
  sim_cmd->add_option("-p,--prevalence", sim.spec.p, "Bernoulli parameter of A");
  sim_cmd->add_option("-n,--rows", sim.n, "sample size");
  sim_cmd->add_option("--seed", sim.seed, "master seed");
  sim_cmd->add_option("--out", sim_out, "output directory");

  Theorem1Config th;
  std::string th_out = ".";
  auto* th_cmd = app.add_subcommand("theorem1", "restricted-permutation null of the covariance");
  th_cmd->add_option("--preset", th.preset, "configuration a, b or c")
      ->check(CLI::IsMember({"a", "b", "c"}));
  th_cmd->add_option("--data", th.data, "dataset CSV (alternative to --preset)");
  th_cmd->add_option("-n,--rows", th.n, "sample size for --preset");
  th_cmd->add_option("-B,--permutations", th.B, "number of restricted shuffles");
  th_cmd->add_option("--seed", th.seed, "master seed");
  th_cmd->add_option("--out", th_out, "output directory");

  DsepConfig ds;
  std::optional<std::string> ds_out;
  auto* ds_cmd = app.add_subcommand("dsep", "d-separation queries on a DAG file");
  ds_cmd->add_option("--dag", ds.dag, "edge-list file")->required();
  ds_cmd->add_option("--query", ds.query, "e.g. \"R _||_ Y | A\"");
  ds_cmd->add_flag("--pattern", ds.pattern, "print the five-slot CI pattern");
  ds_cmd->add_option("--out", ds_out, "optional output directory");

  AuditCliConfig au;
  std::string au_out = ".";
  auto* au_cmd = app.add_subcommand("audit", "run the full confounding audit");
  au_cmd->add_option("--preset", au.preset, "simulate configuration a, b or c")
      ->check(CLI::IsMember({"a", "b", "c"}));
  au_cmd->add_option("--data", au.data, "dataset CSV (alternative to --preset)");
  au_cmd->add_option("-n,--rows", au.n, "sample size for --preset");
  au_cmd->add_option("--adjust", au.adjust, "none|matching|ipw|residualize")
      ->check(CLI::IsMember({"none", "matching", "ipw", "residualize"}));
  au_cmd->add_option("--clf", au.clf, "logistic|forest")
      ->check(CLI::IsMember({"logistic", "forest"}));
  au_cmd->add_option("--splits", au.splits, "number of train/test splits");
  au_cmd->add_option("--train-frac", au.train_frac, "training fraction");
  au_cmd->add_option("--alpha", au.alpha, "test level");
  au_cmd->add_option("--B-dcor", au.B_dcor, "permutations for stage-2 tests");
  au_cmd->add_option("--strata", au.strata, "confounder strata for matching");
  au_cmd->add_option("--trees", au.trees, "forest size");
  au_cmd->add_option("--mtry", au.mtry, "candidate features per node split");
  au_cmd->add_option("--seed", au.seed, "master seed");
  au_cmd->add_option("--threads", au.threads, "worker cap (0 = all cores)");
  au_cmd->add_option("--out", au_out, "output directory");

  std::string replay_manifest;
  std::optional<std::string> replay_out;
  auto* re_cmd = app.add_subcommand("replay", "re-run a command from its manifest");
  re_cmd->add_option("manifest", replay_manifest, "manifest.json path")->required();
  re_cmd->add_option("--out", replay_out, "override output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, os, err);
  }

  try {
    if (sim_cmd->parsed()) return run_simulate(sim, sim_out, os);
    if (th_cmd->parsed()) return run_theorem1(th, th_out, os);
    if (ds_cmd->parsed()) return run_dsep(ds, ds_out, os);
    if (au_cmd->parsed()) return run_audit_cmd(au, au_out, os);
    if (re_cmd->parsed()) return run_replay(replay_manifest, replay_out, os);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  err << "error: no command\n";
  return 1;
}

}  // namespace cli
}  // namespace confaudit
