#include "declist/grid.hpp"

#include <algorithm>
#include <cmath>

#include "declist/error.hpp"

namespace declist {

int CutoffGrid::max_size() const {
  int s = 0;
  for (const auto& c : cutoffs) s = std::max(s, static_cast<int>(c.size()));
  return s;
}

double quantile_type7(const std::vector<double>& sorted, double prob) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = (static_cast<double>(n) - 1.0) * prob;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

CutoffGrid build_grid(const Eigen::MatrixXd& covariates, const GridPolicy& policy) {
  const Eigen::Index p = covariates.cols();
  CutoffGrid grid;
  grid.cutoffs.resize(p);

  if (policy.kind == GridPolicy::Kind::Explicit) {
    if (static_cast<Eigen::Index>(policy.explicit_cutoffs.size()) != p) {
      throw_validation("explicit cutoffs given for " +
                       std::to_string(policy.explicit_cutoffs.size()) + " covariates, need " +
                       std::to_string(p));
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      auto c = policy.explicit_cutoffs[j];
      if (c.empty()) throw_validation("covariate " + std::to_string(j + 1) + " has no cutoffs");
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      const double lo = covariates.col(j).minCoeff();
      const double hi = covariates.col(j).maxCoeff();
      for (double t : c) {
        if (t < lo || t > hi) {
          throw_validation("cutoff " + std::to_string(t) + " outside data range of covariate " +
                           std::to_string(j + 1));
        }
      }
      grid.cutoffs[j] = std::move(c);
    }
    return grid;
  }

  const int k = policy.percentile_count;
  if (k < 1) throw_validation("percentile count must be >= 1");
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> col(covariates.col(j).data(), covariates.col(j).data() + covariates.rows());
    std::sort(col.begin(), col.end());
    std::vector<double> c;
    c.reserve(k);
    for (int i = 1; i <= k; ++i) {
      c.push_back(quantile_type7(col, static_cast<double>(i) / (k + 1.0)));
    }
    c.erase(std::unique(c.begin(), c.end()), c.end());
    if (c.size() == 1 && col.front() == col.back()) {
      grid.warnings.push_back("covariate " + std::to_string(j + 1) +
                              " is constant; degenerate single cutoff");
    }
    grid.cutoffs[j] = std::move(c);
  }
  return grid;
}

CutoffGrid build_grid(const Dataset& data, const GridPolicy& policy) {
  return build_grid(data.covariates, policy);
}

int bin_value(double x, const std::vector<double>& cutoffs) {
  // First cutoff >= x; ties at a cutoff fall in the interval it closes.
  return static_cast<int>(std::lower_bound(cutoffs.begin(), cutoffs.end(), x) -
                          cutoffs.begin());
}

BinIndex bin(const Eigen::MatrixXd& covariates, const CutoffGrid& grid) {
  if (grid.p() != covariates.cols()) {
    throw_validation("grid covers " + std::to_string(grid.p()) + " covariates, data has " +
                     std::to_string(covariates.cols()));
  }
  BinIndex b;
  b.codes.resize(covariates.rows(), covariates.cols());
  for (Eigen::Index j = 0; j < covariates.cols(); ++j) {
    const auto& c = grid.cutoffs[j];
    for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
      b.codes(i, j) = bin_value(covariates(i, j), c);
    }
  }
  return b;
}

}  // namespace declist
