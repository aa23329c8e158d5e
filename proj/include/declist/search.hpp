#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "declist/grid.hpp"
#include "declist/regime.hpp"
#include "declist/value.hpp"

namespace declist {

struct SearchConfig {
  int l_max = 10;
  double alpha = 0.05;       // one-sided gate at z_{1-alpha}
  int min_region_size = 0;   // candidate clauses must leave/catch at least this many
  bool use_reference_kernel = false;  // serial brute-force clause search (tests/bench)
};

// Winning clause of one exhaustive sweep over C x A x A restricted to the
// active subjects. `objective` is the best achievable sum of selected
// weighted pseudo-outcomes over the active set.
struct BestClause {
  Condition condition;
  int in_action = 1;
  int out_action = 1;
  double objective = 0.0;
  std::int64_t in_count = 0;
  std::int64_t out_count = 0;
  // Deterministic tie-break key: (form, col1+1, col2+1, cut1, cut2, a, a').
  std::array<int, 7> key{};
};

// Search diagnostics: one node per FindList invocation.
struct TraceNode {
  int id = 0;
  int depth = 0;                    // clause position j being chosen
  bool has_candidate = false;
  Condition condition;              // chosen candidate, when present
  int in_action = 1;
  int out_action = 1;
  double delta = 0.0;               // estimated value increment
  double variance = 0.0;            // Var(delta), plug-in
  double gate = 0.0;                // z_{1-alpha} * sqrt(variance)
  std::string stop;                 // "", "variance-gate", "l-max",
                                    // "no-admissible-clause", "empty-active"
  int child_keep = -1;              // node ids of the two expansions
  int child_negated = -1;
  int finalized_index = -1;         // index into SearchTrace::finals for leaves
};

struct SearchTrace {
  int best_constant_action = 1;
  double constant_value = 0.0;
  std::vector<TraceNode> nodes;
  std::vector<std::pair<DecisionList, double>> finals;  // leaf lists with values
  int chosen_final = -1;

  std::string to_json(const RenderNames& names, int indent = 2) const;
};

struct SearchResult {
  DecisionList list;
  double value = 0.0;
  SearchTrace trace;
};

// Exhaustive per-node clause search over the ten condition forms, all
// covariate (pairs) and grid cutoffs, and all treatment pairs. The fast path
// accumulates the D array per covariate pair in O(nm) and sweeps cutoff pairs
// via 2-D prefix sums in O(m s^2); covariate pairs run under OpenMP with a
// deterministic merge. Returns nullopt when every candidate is filtered
// (vacuous or below min_region_size).
std::optional<BestClause> best_clause(const std::vector<std::int32_t>& active,
                                      const Eigen::MatrixXd& weighted_xi, const BinIndex& bins,
                                      const CutoffGrid& grid, const SearchConfig& cfg);

// Serial reference: direct evaluation of every candidate, kept independent of
// the prefix-sum kernel for testing and benchmarking.
std::optional<BestClause> best_clause_reference(const std::vector<std::int32_t>& active,
                                                const Eigen::MatrixXd& weighted_xi,
                                                const BinIndex& bins, const CutoffGrid& grid,
                                                const SearchConfig& cfg);

// Greedy variance-gated list construction (recursive FindList). Both
// representations of each accepted clause are expanded; leaves are collected
// and the best estimated value wins, ties to the first encountered.
SearchResult find_list(const InfluenceContext& ctx, const BinIndex& bins, const CutoffGrid& grid,
                       const SearchConfig& cfg);

SearchResult find_list(const Dataset& data, const FittedPropensity& propensity,
                       const FittedOutcome& outcome, const CutoffGrid& grid,
                       const SearchConfig& cfg);

// Empirical scaling probe of the clause-search kernel.
struct ComplexityReport {
  struct Point {
    int n = 0;
    int p = 0;
    double seconds = 0.0;
  };
  std::vector<Point> p_sweep;
  std::vector<Point> n_sweep;
  double p_exponent = 0.0;
  double n_exponent = 0.0;
  std::string to_json(int indent = 2) const;
};

ComplexityReport complexity_probe(int base_n, int base_p, int m, int s, int l_max,
                                  std::uint64_t seed);

}  // namespace declist
