#include "declist/pipeline.hpp"

namespace declist {

FitResult fit_pipeline(const Dataset& data, const FitSpec& spec) {
  FitResult res;
  res.propensity = fit_propensity(data, spec.propensity);
  res.outcome = fit_outcome(data, spec.outcome);
  res.grid = build_grid(data, spec.grid_policy);
  const BinIndex bins = bin(data, res.grid);
  InfluenceContext ctx(data, res.propensity, res.outcome);
  res.search = find_list(ctx, bins, res.grid, spec.search);
  if (spec.run_mincost) {
    MinCostOptions opt;
    opt.l_max = spec.search.l_max;
    res.pi_hat = min_cost_equivalent(res.search.list, data.covariates, spec.costs, opt).list;
  } else {
    res.pi_hat = res.search.list;
  }
  res.cost_hat = empirical_cost(res.pi_hat, data.covariates, spec.costs);
  return res;
}

SearchResult search_weighted(const Dataset& data, const FitSpec& spec, const CutoffGrid& grid,
                             const BinIndex& bins, const Eigen::VectorXd& weights,
                             FittedPropensity* prop_out, FittedOutcome* out_out) {
  FittedPropensity prop = fit_propensity(data, spec.propensity, weights);
  FittedOutcome out = fit_outcome(data, spec.outcome, weights);
  InfluenceContext ctx(data, prop, out, weights);
  SearchResult res = find_list(ctx, bins, grid, spec.search);
  if (prop_out) *prop_out = std::move(prop);
  if (out_out) *out_out = std::move(out);
  return res;
}

}  // namespace declist
