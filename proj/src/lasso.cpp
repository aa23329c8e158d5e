#include "declist/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "declist/error.hpp"
#include "declist/rng.hpp"

namespace declist {

namespace {

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

struct Standardized {
  Eigen::MatrixXd Xs;        // centered/scaled penalized columns (intercept dropped)
  Eigen::VectorXd yc;        // y - weighted mean
  Eigen::VectorXd col_mean;  // per original column (excluding intercept)
  Eigen::VectorXd col_scale; // 0 for constant columns
  double y_mean = 0.0;
  double wsum = 0.0;
};

Standardized standardize(const LassoProblem& prob) {
  const Eigen::Index n = prob.X.rows();
  const Eigen::Index d = prob.X.cols();
  Standardized s;
  s.wsum = prob.weights.sum();
  if (s.wsum <= 0.0) throw_validation("lasso: nonpositive total weight");
  s.y_mean = prob.weights.dot(prob.y) / s.wsum;
  s.yc = prob.y.array() - s.y_mean;
  s.col_mean.resize(d - 1);
  s.col_scale.resize(d - 1);
  s.Xs.resize(n, d - 1);
  for (Eigen::Index j = 1; j < d; ++j) {
    const auto col = prob.X.col(j);
    const double mean = prob.weights.dot(col) / s.wsum;
    const double var = (prob.weights.array() * (col.array() - mean).square()).sum() / s.wsum;
    const double scale = std::sqrt(std::max(var, 0.0));
    s.col_mean[j - 1] = mean;
    s.col_scale[j - 1] = scale > 1e-12 ? scale : 0.0;
    if (s.col_scale[j - 1] > 0.0) {
      s.Xs.col(j - 1) = (col.array() - mean) / s.col_scale[j - 1];
    } else {
      s.Xs.col(j - 1).setZero();
    }
  }
  return s;
}

}  // namespace

double lasso_lambda_max(const LassoProblem& prob) {
  const Standardized s = standardize(prob);
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < s.Xs.cols(); ++j) {
    if (s.col_scale[j] == 0.0) continue;
    const double g = (prob.weights.array() * s.Xs.col(j).array() * s.yc.array()).sum() /
                     prob.norm_n;
    lmax = std::max(lmax, std::abs(g));
  }
  return lmax;
}

LassoPath lasso_path_gaussian(const LassoProblem& prob, const std::vector<double>& lambdas,
                              double tol, int max_sweeps) {
  if (lambdas.empty()) throw_validation("lasso: empty lambda grid");
  const Eigen::Index d = prob.X.cols();
  const Standardized s = standardize(prob);
  const Eigen::Index k = s.Xs.cols();

  // Covariance-mode sufficient statistics: G = Xs' W Xs, c = Xs' W yc.
  Eigen::MatrixXd weighted = s.Xs.array().colwise() * prob.weights.array();
  Eigen::MatrixXd G = weighted.transpose() * s.Xs;
  Eigen::VectorXd c = weighted.transpose() * s.yc;
  const double v = s.wsum / prob.norm_n;  // curvature of every standardized column

  LassoPath path;
  path.lambdas = lambdas;
  path.coefficients = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(lambdas.size()));
  path.scales.assign(s.col_scale.data(), s.col_scale.data() + k);

  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);  // standardized coefficients
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(k); // G * b, maintained incrementally

  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    const double lambda = lambdas[li];
    bool converged = false;
    for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
      double max_delta = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (s.col_scale[j] == 0.0) continue;
        const double rho = (c[j] - gb[j] + G(j, j) * b[j]) / prob.norm_n;
        const double bj = soft_threshold(rho, lambda) / v;
        const double delta = bj - b[j];
        if (delta != 0.0) {
          gb += G.col(j) * delta;
          b[j] = bj;
          max_delta = std::max(max_delta, std::abs(delta));
        }
      }
      converged = max_delta < tol;
    }
    // Map back to the original scale and recover the intercept.
    double intercept = s.y_mean;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (s.col_scale[j] == 0.0) continue;
      const double orig = b[j] / s.col_scale[j];
      path.coefficients(j + 1, static_cast<Eigen::Index>(li)) = orig;
      intercept -= orig * s.col_mean[j];
    }
    path.coefficients(0, static_cast<Eigen::Index>(li)) = intercept;
  }
  return path;
}

Eigen::VectorXd lasso_logistic(const LassoProblem& prob, double lambda,
                               const Eigen::VectorXd& beta_init, double tol, int max_irls) {
  const Eigen::Index n = prob.X.rows();
  const Eigen::Index d = prob.X.cols();
  Eigen::VectorXd beta = beta_init.size() == d ? beta_init : Eigen::VectorXd::Zero(d);
  if (beta_init.size() != d) {
    const double ybar =
        std::clamp(prob.weights.dot(prob.y) / prob.weights.sum(), 1e-6, 1.0 - 1e-6);
    beta[0] = logit(ybar);
  }
  for (int it = 0; it < max_irls; ++it) {
    Eigen::VectorXd eta = prob.X * beta;
    Eigen::VectorXd mu(n), irls_w(n), z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu[i] = expit(eta[i]);
      double w2 = std::max(mu[i] * (1.0 - mu[i]), 1e-6);
      irls_w[i] = prob.weights[i] * w2;
      z[i] = eta[i] + (prob.y[i] - mu[i]) / w2;
    }
    LassoProblem quad{prob.X, z, irls_w, prob.norm_n};
    LassoPath step = lasso_path_gaussian(quad, {lambda});
    Eigen::VectorXd next = step.coefficients.col(0);
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < tol * std::max(1.0, beta.cwiseAbs().maxCoeff())) break;
  }
  return beta;
}

}  // namespace declist
