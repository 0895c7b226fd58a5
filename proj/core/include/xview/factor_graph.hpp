#pragma once

#include <vector>

#include "xview/errors.hpp"

namespace xview {

/// Discrete factor graph with unary and pairwise log-potentials. Exact
/// inference requires the pairwise structure to be a forest.
class FactorGraph {
 public:
  int add_variable(int domain_size);
  void add_unary(int var, std::vector<double> log_potential);
  /// log_potential is row-major: value(u_state, v_state) at u_state*|v|+v_state.
  void add_pairwise(int var_u, int var_v, std::vector<double> log_potential);

  int num_variables() const { return static_cast<int>(domains_.size()); }
  int domain_size(int var) const { return domains_[var]; }

  struct Pairwise {
    int u = 0;
    int v = 0;
    std::vector<double> table;
  };
  const std::vector<std::vector<double>>& unaries() const { return unary_; }
  const std::vector<Pairwise>& pairwise() const { return pairwise_; }

  /// Total log-potential of a full assignment.
  double assignment_log_score(const std::vector<int>& assignment) const;

 private:
  std::vector<int> domains_;
  std::vector<std::vector<double>> unary_;  // accumulated per variable
  std::vector<Pairwise> pairwise_;
};

struct MapAssignment {
  std::vector<int> values;
  double log_score = 0.0;
};

/// Exact MAP by max-product message passing; ties break to the lowest state
/// index. Throws NotATree on cyclic structure.
MapAssignment max_product(const FactorGraph& graph);

/// Exact per-variable marginals by sum-product, each normalized to sum 1.
std::vector<std::vector<double>> sum_product(const FactorGraph& graph);

}  // namespace xview
