#pragma once

#include <Eigen/Core>
#include <vector>

namespace declist {

// Weighted lasso on a dense design whose first column must be an all-ones
// intercept (always unpenalized). Penalized columns are standardized to
// weighted mean zero / variance one internally; coefficients are reported on
// the original scale. The objective is
//   (1/(2 norm_n)) sum_i w_i (y_i - x_i^T b)^2 + lambda * sum_j s_j |b_j|
// where s_j is the internal column scale, matching the standardized problem.
struct LassoProblem {
  Eigen::MatrixXd X;       // n x d, column 0 == 1
  Eigen::VectorXd y;       // n
  Eigen::VectorXd weights; // n, nonnegative
  double norm_n = 0.0;     // divisor of the loss (global n when arms are split)
};

struct LassoPath {
  std::vector<double> lambdas;   // descending
  Eigen::MatrixXd coefficients;  // d x lambdas.size(), original scale
  std::vector<double> scales;    // internal per-column scales (0 => dropped)
};

// Smallest lambda at which every penalized coefficient is zero.
double lasso_lambda_max(const LassoProblem& prob);

// Cyclic coordinate descent with covariance updates, warm-started along the
// descending lambda sequence.
LassoPath lasso_path_gaussian(const LassoProblem& prob, const std::vector<double>& lambdas,
                              double tol = 1e-8, int max_sweeps = 10000);

// Single-lambda logistic lasso via IRLS around the gaussian solver.
// y must be in {0,1}; returns coefficients on the original scale.
Eigen::VectorXd lasso_logistic(const LassoProblem& prob, double lambda,
                               const Eigen::VectorXd& beta_init, double tol = 1e-7,
                               int max_irls = 50);

}  // namespace declist
