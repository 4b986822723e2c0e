#pragma once

// Causal DAGs with bidirected edges, d-separation queries, and the implied
// conditional-independence pattern over the prediction-score triple
// (R, Y, A).
//
// A bidirected edge u <-> v stands for an unspecified exogenous association;
// queries expand it into a fresh latent common parent L -> u, L -> v before
// path blocking is evaluated. Reachability follows the standard active-trail
// rules: chains and forks are blocked by conditioning on the middle node,
// colliders are open only if the middle node or one of its descendants is
// conditioned on.
//
// Text format (one edge per line): `A -> B`, `A <-> B`, `#` comments.

#include <array>
#include <deque>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "confaudit/errors.hpp"

namespace confaudit {

class CausalDag {
 public:
  int add_node(const std::string& name) {
    auto it = index_.find(name);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.push_back(name);
    index_.emplace(name, id);
    return id;
  }

  bool has_node(const std::string& name) const { return index_.count(name) > 0; }

  int node(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw SpecError("unknown node `" + name + "`");
    return it->second;
  }

  void add_edge(const std::string& from, const std::string& to) {
    const int u = add_node(from);
    const int v = add_node(to);
    if (u == v) throw SpecError("self-loop on `" + from + "`");
    directed_.emplace_back(u, v);
  }

  void add_bidirected(const std::string& a, const std::string& b) {
    const int u = add_node(a);
    const int v = add_node(b);
    if (u == v) throw SpecError("self-loop on `" + a + "`");
    bidirected_.emplace_back(u, v);
  }

  std::size_t n_nodes() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::pair<int, int>>& directed_edges() const { return directed_; }
  const std::vector<std::pair<int, int>>& bidirected_edges() const { return bidirected_; }

  // Throws if the directed part has a cycle.
  void validate() const {
    std::vector<int> indeg(names_.size(), 0);
    std::vector<std::vector<int>> children(names_.size());
    for (auto [u, v] : directed_) {
      children[u].push_back(v);
      ++indeg[v];
    }
    std::deque<int> ready;
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (indeg[i] == 0) ready.push_back(static_cast<int>(i));
    std::size_t seen = 0;
    while (!ready.empty()) {
      const int u = ready.front();
      ready.pop_front();
      ++seen;
      for (int v : children[u])
        if (--indeg[v] == 0) ready.push_back(v);
    }
    if (seen != names_.size()) throw SpecError("directed part of the graph has a cycle");
  }

  // Directed graph with every bidirected edge replaced by a latent parent.
  // Latent nodes are appended after the observed ones.
  struct Expanded {
    std::size_t n = 0;
    std::vector<std::vector<int>> parents;
    std::vector<std::vector<int>> children;
  };

  Expanded expand_latents() const {
    Expanded g;
    g.n = names_.size() + bidirected_.size();
    g.parents.resize(g.n);
    g.children.resize(g.n);
    for (auto [u, v] : directed_) {
      g.children[u].push_back(v);
      g.parents[v].push_back(u);
    }
    std::size_t latent = names_.size();
    for (auto [u, v] : bidirected_) {
      g.children[latent] = {u, v};
      g.parents[u].push_back(static_cast<int>(latent));
      g.parents[v].push_back(static_cast<int>(latent));
      ++latent;
    }
    return g;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
  std::vector<std::pair<int, int>> directed_;
  std::vector<std::pair<int, int>> bidirected_;
};

namespace detail {

// Active-trail reachability on the latent-expanded graph.
inline bool d_connected(const CausalDag::Expanded& g, int src, int dst,
                        const std::vector<bool>& conditioned) {
  const std::size_t n = g.n;

  // Ancestors of the conditioning set (inclusive), for collider activation.
  std::vector<bool> anc(n, false);
  std::deque<int> work;
  for (std::size_t i = 0; i < n; ++i)
    if (conditioned[i]) {
      anc[i] = true;
      work.push_back(static_cast<int>(i));
    }
  while (!work.empty()) {
    const int v = work.front();
    work.pop_front();
    for (int p : g.parents[v])
      if (!anc[p]) {
        anc[p] = true;
        work.push_back(p);
      }
  }

  // States: (node, arrived-from-child) and (node, arrived-from-parent).
  std::vector<std::array<bool, 2>> visited(n, {false, false});
  std::deque<std::pair<int, int>> queue;
  queue.emplace_back(src, 0);  // as if entered from a child
  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    if (visited[v][dir]) continue;
    visited[v][dir] = true;
    if (v == dst && !conditioned[v]) return true;

    if (dir == 0) {  // entered from a child: acts as chain tail or fork
      if (!conditioned[v]) {
        for (int p : g.parents[v]) queue.emplace_back(p, 0);
        for (int c : g.children[v]) queue.emplace_back(c, 1);
      }
    } else {  // entered from a parent: chain head or collider
      if (!conditioned[v])
        for (int c : g.children[v]) queue.emplace_back(c, 1);
      if (anc[v])
        for (int p : g.parents[v]) queue.emplace_back(p, 0);
    }
  }
  return false;
}

}  // namespace detail

inline bool is_d_separated(const CausalDag& g, const std::string& i, const std::string& j,
                           const std::set<std::string>& cond) {
  const int u = g.node(i);
  const int v = g.node(j);
  if (u == v) throw SpecError("i and j must differ");
  std::vector<bool> conditioned(g.n_nodes() + g.bidirected_edges().size(), false);
  for (const auto& name : cond) {
    const int c = g.node(name);
    if (c == u || c == v)
      throw SpecError("conditioning set must exclude the queried nodes");
    conditioned[c] = true;
  }
  g.validate();
  return !detail::d_connected(g.expand_latents(), u, v, conditioned);
}

// The five queries, in fixed order:
//   R _||_ Y,  R _||_ A,  A _||_ Y,  R _||_ Y | A,  R _||_ A | Y
// `true` means independent (d-separated).
struct CiPattern {
  std::array<bool, 5> independent{};

  static const std::array<const char*, 5>& labels() {
    static const std::array<const char*, 5> kLabels = {
        "R _||_ Y", "R _||_ A", "A _||_ Y", "R _||_ Y | A", "R _||_ A | Y"};
    return kLabels;
  }

  bool operator==(const CiPattern& other) const {
    return independent == other.independent;
  }
};

inline CiPattern implied_ci_pattern(const CausalDag& g) {
  for (const char* name : {"R", "Y", "A"})
    if (!g.has_node(name)) throw SpecError(std::string("graph lacks node `") + name + "`");
  CiPattern p;
  p.independent[0] = is_d_separated(g, "R", "Y", {});
  p.independent[1] = is_d_separated(g, "R", "A", {});
  p.independent[2] = is_d_separated(g, "A", "Y", {});
  p.independent[3] = is_d_separated(g, "R", "Y", {"A"});
  p.independent[4] = is_d_separated(g, "R", "A", {"Y"});
  return p;
}

struct Scenario {
  std::string name;
  CausalDag graph;
  CiPattern pattern;
};

// The four adjustment scenarios as collapsed test-set graphs over {R, Y, A}:
//   confounded       A -> R, Y -> R, A <-> Y
//   confounder_only  A -> R,         A <-> Y
//   feature_adjusted         Y -> R, A <-> Y
//   label_decoupled  A -> R, Y -> R
// Patterns are derived by implied_ci_pattern, never hardcoded.
inline const std::vector<Scenario>& scenario_catalogue() {
  static const std::vector<Scenario> kCatalogue = [] {
    std::vector<Scenario> out;
    auto add = [&out](const std::string& name, bool a_to_r, bool y_to_r, bool a_y) {
      CausalDag g;
      g.add_node("R");
      g.add_node("Y");
      g.add_node("A");
      if (a_to_r) g.add_edge("A", "R");
      if (y_to_r) g.add_edge("Y", "R");
      if (a_y) g.add_bidirected("A", "Y");
      out.push_back({name, g, implied_ci_pattern(g)});
    };
    add("confounded", true, true, true);
    add("confounder_only", true, false, true);
    add("feature_adjusted", false, true, true);
    add("label_decoupled", true, true, false);
    return out;
  }();
  return kCatalogue;
}

struct PatternMatch {
  std::vector<std::string> matches;
  // For non-matching scenarios: which slots disagree.
  std::map<std::string, std::vector<std::string>> diffs;

  std::string verdict() const {
    if (matches.empty()) return "unrecognized";
    std::string out = matches.front();
    for (std::size_t i = 1; i < matches.size(); ++i) out += "+" + matches[i];
    return out;
  }
};

inline PatternMatch match_pattern(const CiPattern& observed) {
  PatternMatch m;
  for (const auto& scenario : scenario_catalogue()) {
    if (scenario.pattern == observed) {
      m.matches.push_back(scenario.name);
      continue;
    }
    std::vector<std::string> slots;
    for (std::size_t k = 0; k < 5; ++k)
      if (scenario.pattern.independent[k] != observed.independent[k])
        slots.emplace_back(CiPattern::labels()[k]);
    m.diffs.emplace(scenario.name, std::move(slots));
  }
  return m;
}

// One edge per line: `A -> B` or `A <-> B`; `#` starts a comment.
inline CausalDag parse_dag(std::istream& is) {
  CausalDag g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::stringstream ss(line);
    std::string lhs, arrow, rhs, extra;
    if (!(ss >> lhs)) continue;  // blank line
    if (!(ss >> arrow >> rhs) || (ss >> extra))
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected `A -> B` or `A <-> B`");
    if (arrow == "->")
      g.add_edge(lhs, rhs);
    else if (arrow == "<->")
      g.add_bidirected(lhs, rhs);
    else
      throw ParseError("line " + std::to_string(line_no) + ": unknown edge `" + arrow +
                       "`");
  }
  g.validate();
  return g;
}

inline CausalDag parse_dag(const std::string& text) {
  std::stringstream ss(text);
  return parse_dag(ss);
}

}  // namespace confaudit
