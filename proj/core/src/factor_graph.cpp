#include "xview/factor_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace xview {

int FactorGraph::add_variable(int domain_size) {
  if (domain_size < 1) throw Error("variable domain must be nonempty");
  domains_.push_back(domain_size);
  unary_.emplace_back(domain_size, 0.0);
  return static_cast<int>(domains_.size()) - 1;
}

void FactorGraph::add_unary(int var, std::vector<double> log_potential) {
  if (static_cast<int>(log_potential.size()) != domains_[var])
    throw Error("unary potential size does not match the variable domain");
  for (int i = 0; i < domains_[var]; ++i) unary_[var][i] += log_potential[i];
}

void FactorGraph::add_pairwise(int var_u, int var_v, std::vector<double> log_potential) {
  if (var_u == var_v) throw NotATree("pairwise factor connects a variable to itself");
  if (static_cast<int>(log_potential.size()) !=
      domains_[var_u] * domains_[var_v])
    throw Error("pairwise potential size does not match the variable domains");
  pairwise_.push_back({var_u, var_v, std::move(log_potential)});
}

double FactorGraph::assignment_log_score(const std::vector<int>& assignment) const {
  double s = 0.0;
  for (int v = 0; v < num_variables(); ++v) s += unary_[v][assignment[v]];
  for (const auto& f : pairwise_)
    s += f.table[static_cast<std::size_t>(assignment[f.u]) * domains_[f.v] + assignment[f.v]];
  return s;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Edge {
  int neighbor;
  int factor;  // index into pairwise()
};

struct TreeOrder {
  std::vector<std::vector<Edge>> adjacency;
  std::vector<int> bfs;     // parents before children
  std::vector<int> parent;  // -1 at roots
  std::vector<int> parent_factor;
};

TreeOrder build_tree(const FactorGraph& g) {
  const int n = g.num_variables();
  TreeOrder t;
  t.adjacency.resize(n);

  std::vector<int> uf(n);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&uf](int x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };
  for (int fi = 0; fi < static_cast<int>(g.pairwise().size()); ++fi) {
    const auto& f = g.pairwise()[fi];
    const int ru = find(f.u), rv = find(f.v);
    if (ru == rv) throw NotATree("pairwise factors form a cycle");
    uf[ru] = rv;
    t.adjacency[f.u].push_back({f.v, fi});
    t.adjacency[f.v].push_back({f.u, fi});
  }

  t.parent.assign(n, -2);
  t.parent_factor.assign(n, -1);
  for (int root = 0; root < n; ++root) {
    if (t.parent[root] != -2) continue;
    t.parent[root] = -1;
    t.bfs.push_back(root);
    for (std::size_t head = t.bfs.size() - 1; head < t.bfs.size(); ++head) {
      const int v = t.bfs[head];
      for (const Edge& e : t.adjacency[v]) {
        if (t.parent[e.neighbor] != -2) continue;
        t.parent[e.neighbor] = v;
        t.parent_factor[e.neighbor] = e.factor;
        t.bfs.push_back(e.neighbor);
      }
    }
  }
  return t;
}

double edge_value(const FactorGraph& g, int factor, int var_from, int state_from,
                  int state_to) {
  const auto& f = g.pairwise()[factor];
  if (f.u == var_from)
    return f.table[static_cast<std::size_t>(state_from) * g.domain_size(f.v) + state_to];
  return f.table[static_cast<std::size_t>(state_to) * g.domain_size(f.v) + state_from];
}

double log_sum_exp(const std::vector<double>& xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

MapAssignment max_product(const FactorGraph& g) {
  const int n = g.num_variables();
  MapAssignment result;
  result.values.assign(n, 0);
  if (n == 0) return result;

  TreeOrder tree = build_tree(g);

  // upward pass: message from v to its parent, with argmax backpointers
  std::vector<std::vector<double>> up(n);      // indexed by parent state
  std::vector<std::vector<int>> choice(n);     // best state of v per parent state
  std::vector<std::vector<double>> belief(n);  // unary + children messages

  for (auto it = tree.bfs.rbegin(); it != tree.bfs.rend(); ++it) {
    const int v = *it;
    belief[v] = g.unaries()[v];
    for (const Edge& e : tree.adjacency[v]) {
      if (tree.parent[e.neighbor] != v) continue;  // only children
      for (int s = 0; s < g.domain_size(v); ++s) belief[v][s] += up[e.neighbor][s];
    }
    const int p = tree.parent[v];
    if (p < 0) continue;
    const int dp = g.domain_size(p);
    up[v].assign(dp, kNegInf);
    choice[v].assign(dp, 0);
    for (int sp = 0; sp < dp; ++sp) {
      double best = kNegInf;
      int best_state = 0;
      for (int sv = 0; sv < g.domain_size(v); ++sv) {
        const double cand =
            belief[v][sv] + edge_value(g, tree.parent_factor[v], v, sv, sp);
        if (cand > best) {
          best = cand;
          best_state = sv;
        }
      }
      up[v][sp] = best;
      choice[v][sp] = best_state;
    }
  }

  // downward pass: pick root argmax (lowest index on ties), then backtrack
  for (const int v : tree.bfs) {
    if (tree.parent[v] < 0) {
      int best_state = 0;
      for (int s = 1; s < g.domain_size(v); ++s)
        if (belief[v][s] > belief[v][best_state]) best_state = s;
      result.values[v] = best_state;
    } else {
      result.values[v] = choice[v][result.values[tree.parent[v]]];
    }
  }
  result.log_score = g.assignment_log_score(result.values);
  return result;
}

std::vector<std::vector<double>> sum_product(const FactorGraph& g) {
  const int n = g.num_variables();
  std::vector<std::vector<double>> marginals(n);
  if (n == 0) return marginals;

  TreeOrder tree = build_tree(g);

  std::vector<std::vector<double>> up(n);
  std::vector<std::vector<double>> belief(n);
  for (auto it = tree.bfs.rbegin(); it != tree.bfs.rend(); ++it) {
    const int v = *it;
    belief[v] = g.unaries()[v];
    for (const Edge& e : tree.adjacency[v]) {
      if (tree.parent[e.neighbor] != v) continue;
      for (int s = 0; s < g.domain_size(v); ++s) belief[v][s] += up[e.neighbor][s];
    }
    const int p = tree.parent[v];
    if (p < 0) continue;
    up[v].assign(g.domain_size(p), kNegInf);
    std::vector<double> terms(g.domain_size(v));
    for (int sp = 0; sp < g.domain_size(p); ++sp) {
      for (int sv = 0; sv < g.domain_size(v); ++sv)
        terms[sv] = belief[v][sv] + edge_value(g, tree.parent_factor[v], v, sv, sp);
      up[v][sp] = log_sum_exp(terms);
    }
  }

  std::vector<std::vector<double>> down(n);
  for (const int v : tree.bfs) {
    std::vector<double> total = belief[v];
    if (tree.parent[v] >= 0)
      for (int s = 0; s < g.domain_size(v); ++s) total[s] += down[v][s];

    // normalized marginal
    const double z = log_sum_exp(total);
    marginals[v].resize(g.domain_size(v));
    double sum = 0.0;
    for (int s = 0; s < g.domain_size(v); ++s) {
      marginals[v][s] = std::exp(total[s] - z);
      sum += marginals[v][s];
    }
    for (auto& m : marginals[v]) m /= sum;

    // messages to children: product over everything except that child
    for (const Edge& e : tree.adjacency[v]) {
      const int c = e.neighbor;
      if (tree.parent[c] != v) continue;
      std::vector<double> without = g.unaries()[v];
      if (tree.parent[v] >= 0)
        for (int s = 0; s < g.domain_size(v); ++s) without[s] += down[v][s];
      for (const Edge& o : tree.adjacency[v]) {
        if (tree.parent[o.neighbor] != v || o.neighbor == c) continue;
        for (int s = 0; s < g.domain_size(v); ++s) without[s] += up[o.neighbor][s];
      }
      down[c].assign(g.domain_size(c), kNegInf);
      std::vector<double> terms(g.domain_size(v));
      for (int sc = 0; sc < g.domain_size(c); ++sc) {
        for (int s = 0; s < g.domain_size(v); ++s)
          terms[s] = without[s] + edge_value(g, e.factor, v, s, sc);
        down[c][sc] = log_sum_exp(terms);
      }
    }
  }
  return marginals;
}

}  // namespace xview
