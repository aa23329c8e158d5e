#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "declist/dataset.hpp"

namespace declist {

// How candidate cutoffs are chosen for each covariate.
struct GridPolicy {
  enum class Kind { EmpiricalPercentiles, Explicit };
  Kind kind = Kind::EmpiricalPercentiles;
  int percentile_count = 9;                        // k equally spaced quantiles
  std::vector<std::vector<double>> explicit_cutoffs;  // one vector per covariate
};

// Per-covariate sorted candidate cutoffs. Cutoff indices are 1-based in the
// search: "x_j <= tau_{j,t}" with t in 1..s_j.
struct CutoffGrid {
  std::vector<std::vector<double>> cutoffs;  // strictly increasing, size >= 1 each
  std::vector<std::string> warnings;         // e.g. degenerate constant covariates

  Eigen::Index p() const { return static_cast<Eigen::Index>(cutoffs.size()); }
  int size(Eigen::Index j) const { return static_cast<int>(cutoffs[j].size()); }
  int max_size() const;
};

// Interval codes b_ij in {0..s_j}: b_ij = k iff x_ij lies in the k-th of the
// s_j+1 intervals (tau_k, tau_{k+1}] induced by the cutoffs (tau_0 = -inf,
// right-closed). Consequently "x_ij <= tau_{j,t}" is equivalent to "b_ij < t".
struct BinIndex {
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> codes;  // n x p
};

// Type-7 quantile of sorted values at probability prob.
double quantile_type7(const std::vector<double>& sorted, double prob);

CutoffGrid build_grid(const Dataset& data, const GridPolicy& policy);
CutoffGrid build_grid(const Eigen::MatrixXd& covariates, const GridPolicy& policy);

BinIndex bin(const Eigen::MatrixXd& covariates, const CutoffGrid& grid);
inline BinIndex bin(const Dataset& data, const CutoffGrid& grid) {
  return bin(data.covariates, grid);
}

int bin_value(double x, const std::vector<double>& cutoffs);

}  // namespace declist
