#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "declist/error.hpp"
#include "declist/lasso.hpp"
#include "declist/models.hpp"
#include "declist/rng.hpp"
#include "declist/simlab.hpp"

using namespace declist;

namespace {

Dataset randomized_dataset(Eigen::Index n, int p, int m, std::uint64_t seed,
                           OutcomeKind kind = OutcomeKind::Continuous) {
  Rng rng(seed);
  Dataset ds;
  ds.outcome_kind = kind;
  ds.covariates.resize(n, p);
  ds.treatments.resize(n);
  ds.outcomes.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) ds.covariates(i, j) = rng.normal();
    ds.treatments[i] = rng.uniform_int(1, m);
    const double mean = 0.5 * ds.covariates(i, 0) + 0.3 * ds.treatments[i];
    ds.outcomes[i] =
        kind == OutcomeKind::Binary ? (rng.uniform() < expit(mean) ? 1.0 : 0.0) : mean + rng.normal();
  }
  const RenderNames names = default_names(p, m);
  ds.covariate_names = names.covariates;
  ds.treatment_labels = names.treatments;
  return ds;
}

Dataset with_arm_counts(Eigen::Index n1, Eigen::Index n2, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.covariates.resize(n1 + n2, 1);
  ds.treatments.resize(n1 + n2);
  ds.outcomes.resize(n1 + n2);
  for (Eigen::Index i = 0; i < n1 + n2; ++i) {
    ds.covariates(i, 0) = rng.normal();
    ds.treatments[i] = i < n1 ? 1 : 2;
    ds.outcomes[i] = rng.normal();
  }
  const RenderNames names = default_names(1, 2);
  ds.covariate_names = names.covariates;
  ds.treatment_labels = names.treatments;
  return ds;
}

}  // namespace

TEST_CASE("sample-proportion propensity returns arm frequencies for every x") {
  Dataset ds = with_arm_counts(250, 250, 1);
  PropensitySpec spec;
  spec.kind = PropensitySpec::Kind::SampleProportion;
  const FittedPropensity fit = fit_propensity(ds, spec);
  const Eigen::VectorXd probs = fit.predict(ds.covariates.row(7));
  CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("intercept-only logistic fit on (300,200) arms equals the saturated proportions") {
  Dataset ds = with_arm_counts(300, 200, 2);
  PropensitySpec spec;
  spec.kind = PropensitySpec::Kind::MultinomialLogistic;
  spec.u = FeatureMap::intercept_only();
  const FittedPropensity fit = fit_propensity(ds, spec);
  CHECK(fit.gamma[0] == doctest::Approx(std::log(300.0 / 200.0)).epsilon(1e-8));
  const Eigen::VectorXd probs = fit.predict(ds.covariates.row(0));
  CHECK(probs[0] == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(probs[1] == doctest::Approx(0.4).epsilon(1e-8));
}

TEST_CASE("multinomial logistic recovers the generating coefficients within 3 SEs") {
  // m = 3, u = (1, x1, x2); draw treatments from a known gamma*.
  Rng rng(33);
  const Eigen::Index n = 2000;
  Dataset ds;
  ds.covariates.resize(n, 2);
  ds.treatments.resize(n);
  ds.outcomes.resize(n);
  const Eigen::Vector3d g1(0.3, 0.8, -0.5);
  const Eigen::Vector3d g2(-0.2, 0.1, 0.6);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.covariates(i, 0) = rng.normal();
    ds.covariates(i, 1) = rng.normal();
    const Eigen::Vector3d u(1.0, ds.covariates(i, 0), ds.covariates(i, 1));
    const double e1 = std::exp(u.dot(g1)), e2 = std::exp(u.dot(g2));
    const double denom = 1.0 + e1 + e2;
    const double r = rng.uniform();
    ds.treatments[i] = r < e1 / denom ? 1 : (r < (e1 + e2) / denom ? 2 : 3);
    ds.outcomes[i] = rng.normal();
  }
  const RenderNames names = default_names(2, 3);
  ds.covariate_names = names.covariates;
  ds.treatment_labels = names.treatments;

  PropensitySpec spec;
  spec.kind = PropensitySpec::Kind::MultinomialLogistic;
  const FittedPropensity fit = fit_propensity(ds, spec);
  // SEs from the inverse information: Var(gamma_hat) = H^{-1} / n approx.
  const Eigen::MatrixXd cov = fit.neg_hessian.ldlt().solve(
      Eigen::MatrixXd::Identity(fit.gamma.size(), fit.gamma.size())) /
      static_cast<double>(n);
  Eigen::VectorXd truth(6);
  truth << g1, g2;
  for (int k = 0; k < 6; ++k) {
    const double se = std::sqrt(cov(k, k));
    CHECK(std::abs(fit.gamma[k] - truth[k]) < 3.0 * se);
  }
}

TEST_CASE("propensity probabilities sum to one on random inputs") {
  Dataset ds = randomized_dataset(600, 3, 3, 4);
  PropensitySpec spec;
  spec.kind = PropensitySpec::Kind::MultinomialLogistic;
  const FittedPropensity fit = fit_propensity(ds, spec);
  Rng rng(5);
  for (int k = 0; k < 1000; ++k) {
    Eigen::RowVectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = 3.0 * rng.normal();
    const Eigen::VectorXd probs = fit.predict(x);
    CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(probs.minCoeff() > 0.0);
    CHECK(probs.maxCoeff() < 1.0);
  }
}

TEST_CASE("intercept-only outcome model fits arm means") {
  Dataset ds = with_arm_counts(40, 60, 6);
  OutcomeSpec spec;
  spec.link = LinkKind::Identity;
  spec.z = FeatureMap::intercept_only();
  const FittedOutcome fit = fit_outcome(ds, spec);
  double m1 = 0.0, m2 = 0.0;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    (ds.treatments[i] == 1 ? m1 : m2) += ds.outcomes[i];
  }
  CHECK(fit.beta(0, 0) == doctest::Approx(m1 / 40).epsilon(1e-10));
  CHECK(fit.beta(0, 1) == doctest::Approx(m2 / 60).epsilon(1e-10));
}

TEST_CASE("huge lasso penalty zeroes all slopes; intercepts equal arm means") {
  Dataset ds = randomized_dataset(200, 4, 2, 7);
  OutcomeSpec spec;
  spec.link = LinkKind::Identity;
  spec.lasso = LassoSpec{};
  spec.lasso->fixed_lambda = 1e6;
  const FittedOutcome fit = fit_outcome(ds, spec);
  std::vector<double> mean(2, 0.0);
  std::vector<int> cnt(2, 0);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    mean[ds.treatments[i] - 1] += ds.outcomes[i];
    ++cnt[ds.treatments[i] - 1];
  }
  for (int a = 0; a < 2; ++a) {
    CHECK(fit.beta(0, a) == doctest::Approx(mean[a] / cnt[a]).epsilon(1e-9));
    for (int j = 1; j < fit.r; ++j) CHECK(fit.beta(j, a) == 0.0);
  }
}

TEST_CASE("lasso solution satisfies the KKT conditions at a fixed lambda") {
  Rng rng(8);
  const Eigen::Index n = 40;
  const int d = 4;  // intercept + 3 covariates
  Eigen::MatrixXd X(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (int j = 1; j < d; ++j) X(i, j) = rng.normal();
    y[i] = 1.5 * X(i, 1) - 0.7 * X(i, 2) + rng.normal();
  }
  LassoProblem prob{X, y, Eigen::VectorXd::Ones(n), static_cast<double>(n)};
  const double lambda = 0.15;
  const LassoPath path = lasso_path_gaussian(prob, {lambda}, 1e-12);
  const Eigen::VectorXd beta = path.coefficients.col(0);

  // KKT in the standardized coordinates: |grad_j| <= lambda for zero
  // coefficients, grad_j = -lambda * sign(b_j) for active ones.
  const Eigen::VectorXd resid = y - X * beta;
  CHECK(std::abs(resid.mean()) < 1e-9);  // unpenalized intercept: zero-mean residual
  for (int j = 1; j < d; ++j) {
    const double scale = path.scales[j - 1];
    REQUIRE(scale > 0.0);
    const double mean_j = X.col(j).mean();
    const Eigen::VectorXd xs = (X.col(j).array() - mean_j) / scale;
    const double grad = xs.dot(resid) / static_cast<double>(n);
    const double b_std = beta[j] * scale;
    if (b_std == 0.0) {
      CHECK(std::abs(grad) <= lambda + 1e-6);
    } else {
      CHECK(grad == doctest::Approx(lambda * (b_std > 0 ? 1.0 : -1.0)).epsilon(1e-6));
    }
  }
}

TEST_CASE("lasso path: nonzero count is non-increasing in lambda on the fitted grid") {
  Dataset ds = randomized_dataset(150, 6, 2, 9);
  const Eigen::MatrixXd Z = FeatureMap::linear().build(ds.covariates);
  // Single-arm problem (arm 1 subjects only).
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.treatments[i] == 1) rows.push_back(i);
  }
  Eigen::MatrixXd X(rows.size(), Z.cols());
  Eigen::VectorXd y(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    X.row(static_cast<Eigen::Index>(k)) = Z.row(rows[k]);
    y[static_cast<Eigen::Index>(k)] = ds.outcomes[rows[k]];
  }
  LassoProblem prob{X, y, Eigen::VectorXd::Ones(X.rows()), static_cast<double>(X.rows())};
  const double lmax = lasso_lambda_max(prob);
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) grid.push_back(lmax * std::pow(1e-3, i / 29.0));
  const LassoPath path = lasso_path_gaussian(prob, grid);
  int prev = 0;
  for (std::size_t li = 0; li < grid.size(); ++li) {
    int nnz = 0;
    for (int j = 1; j < X.cols(); ++j) {
      if (path.coefficients(j, static_cast<Eigen::Index>(li)) != 0.0) ++nnz;
    }
    CHECK(nnz >= prev);  // lambda descends along the grid
    prev = nnz;
  }
  // At lambda_max everything penalized is zero.
  for (int j = 1; j < X.cols(); ++j) CHECK(path.coefficients(j, 0) == 0.0);
}

TEST_CASE("score contributions: mean score vanishes at the MLE") {
  Dataset ds = randomized_dataset(400, 3, 3, 10);
  PropensitySpec pspec;
  pspec.kind = PropensitySpec::Kind::MultinomialLogistic;
  const FittedPropensity prop = fit_propensity(ds, pspec);
  const PropensityScores ps = score_contributions(ds, prop);
  CHECK((ps.scores.colwise().mean()).cwiseAbs().maxCoeff() < 1e-6);

  OutcomeSpec ospec;
  const FittedOutcome out = fit_outcome(ds, ospec);
  const OutcomeScores os = score_contributions(ds, out);
  CHECK((os.full_scores().colwise().mean()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sample-proportion information is p(1-p) for two arms") {
  Dataset ds = with_arm_counts(300, 200, 11);
  PropensitySpec spec;
  spec.kind = PropensitySpec::Kind::SampleProportion;
  const FittedPropensity fit = fit_propensity(ds, spec);
  REQUIRE(fit.neg_hessian.rows() == 1);
  CHECK(fit.neg_hessian(0, 0) == doctest::Approx(0.6 * 0.4).epsilon(1e-7));
}

TEST_CASE("averaged Hessians match finite differences of the mean score") {
  Dataset ds = randomized_dataset(250, 2, 2, 12);

  SUBCASE("propensity") {
    PropensitySpec spec;
    spec.kind = PropensitySpec::Kind::MultinomialLogistic;
    FittedPropensity fit = fit_propensity(ds, spec);
    const int dim = static_cast<int>(fit.gamma.size());
    const double h = 1e-5;
    Eigen::MatrixXd fd(dim, dim);
    for (int k = 0; k < dim; ++k) {
      FittedPropensity hi = fit, lo = fit;
      hi.gamma[k] += h;
      lo.gamma[k] -= h;
      const Eigen::VectorXd ghi = score_contributions(ds, hi).scores.colwise().mean();
      const Eigen::VectorXd glo = score_contributions(ds, lo).scores.colwise().mean();
      fd.col(k) = -(ghi - glo) / (2.0 * h);
    }
    const double rel = (fd - fit.neg_hessian).norm() / fit.neg_hessian.norm();
    CHECK(rel < 1e-4);
  }

  SUBCASE("outcome, logit link") {
    Dataset bin = randomized_dataset(250, 2, 2, 13, OutcomeKind::Binary);
    OutcomeSpec spec = OutcomeSpec::for_outcome(OutcomeKind::Binary);
    FittedOutcome fit = fit_outcome(bin, spec);
    const int dim = fit.r * fit.m;
    const double h = 1e-5;
    Eigen::MatrixXd fd(dim, dim);
    for (int a = 0; a < fit.m; ++a) {
      for (int j = 0; j < fit.r; ++j) {
        const int k = a * fit.r + j;
        FittedOutcome hi = fit, lo = fit;
        hi.beta(j, a) += h;
        lo.beta(j, a) -= h;
        const Eigen::VectorXd ghi = score_contributions(bin, hi).full_scores().colwise().mean();
        const Eigen::VectorXd glo = score_contributions(bin, lo).full_scores().colwise().mean();
        fd.col(k) = -(ghi - glo) / (2.0 * h);
      }
    }
    const Eigen::MatrixXd H = fit.neg_hessian();
    const double rel = (fd - H).norm() / H.norm();
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("outcome Hessian is exactly block diagonal across arms") {
  Dataset ds = randomized_dataset(300, 3, 3, 14);
  const FittedOutcome fit = fit_outcome(ds, OutcomeSpec{});
  const Eigen::MatrixXd H = fit.neg_hessian();
  for (int a = 0; a < fit.m; ++a) {
    for (int b = 0; b < fit.m; ++b) {
      if (a == b) continue;
      CHECK(H.block(a * fit.r, b * fit.r, fit.r, fit.r).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("weighted fits reduce to unweighted at unit weights") {
  Dataset ds = randomized_dataset(180, 3, 2, 15);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(ds.n());
  PropensitySpec pspec;
  pspec.kind = PropensitySpec::Kind::MultinomialLogistic;
  CHECK((fit_propensity(ds, pspec).gamma - fit_propensity(ds, pspec, ones).gamma)
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  OutcomeSpec ospec;
  CHECK((fit_outcome(ds, ospec).beta - fit_outcome(ds, ospec, ones).beta).cwiseAbs().maxCoeff() <
        1e-12);
}

TEST_CASE("rank-deficient outcome design is reported as a fit failure") {
  Dataset ds = randomized_dataset(50, 2, 2, 16);
  ds.covariates.col(1) = ds.covariates.col(0);  // collinear
  CHECK_THROWS_AS(fit_outcome(ds, OutcomeSpec{}), Error);
}
