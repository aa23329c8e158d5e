#pragma once

#include "declist/costmin.hpp"
#include "declist/dataset.hpp"
#include "declist/grid.hpp"
#include "declist/models.hpp"
#include "declist/search.hpp"
#include "declist/value.hpp"

namespace declist {

// Everything needed to go from a Dataset to an estimated regime.
struct FitSpec {
  PropensitySpec propensity;
  OutcomeSpec outcome;
  GridPolicy grid_policy;
  SearchConfig search;
  bool run_mincost = true;
  CostModel costs;
};

struct FitResult {
  FittedPropensity propensity;
  FittedOutcome outcome;
  CutoffGrid grid;
  SearchResult search;    // pi_tilde (value maximizer) + trace
  DecisionList pi_hat;    // minimal-cost equivalent (== pi_tilde when disabled)
  double cost_hat = 0.0;  // empirical cost of pi_hat on the training data
};

FitResult fit_pipeline(const Dataset& data, const FitSpec& spec);

// Weighted refit + search reusing a fixed cutoff grid; the lasso lambda, when
// penalized, should already be pinned in spec.outcome (bootstrap replicates).
SearchResult search_weighted(const Dataset& data, const FitSpec& spec, const CutoffGrid& grid,
                             const BinIndex& bins, const Eigen::VectorXd& weights,
                             FittedPropensity* prop_out = nullptr,
                             FittedOutcome* out_out = nullptr);

}  // namespace declist
