#pragma once

#include <cstdint>
#include <vector>

#include "declist/regime.hpp"

namespace declist {

struct MinCostOptions {
  int l_max = 10;
  bool disable_bound = false;  // exhaustive mode (pruning-soundness tests)
  std::int64_t node_budget = 2000000;  // stop refining past this many nodes
};

struct MinCostResult {
  DecisionList list;
  double cost = 0.0;
  std::int64_t nodes_visited = 0;
  bool truncated = false;  // node budget hit; result may not be globally minimal
  std::vector<double> incumbent_costs;  // strictly decreasing as found
};

// Enumerates decision lists over the atoms of pi_tilde that recommend
// identically to pi_tilde for every sample subject, and returns one with
// minimal empirical cost (branch and bound on the partial-list cost lower
// bound). pi_tilde's own representation is always reachable, so the search
// cannot come back empty.
MinCostResult min_cost_equivalent(const DecisionList& pi_tilde,
                                  const Eigen::MatrixXd& covariates, const CostModel& costs = {},
                                  const MinCostOptions& options = {});

// True iff the two lists give the same recommendation for every row.
bool sample_equivalence_check(const DecisionList& pi_a, const DecisionList& pi_b,
                              const Eigen::MatrixXd& covariates);

}  // namespace declist
