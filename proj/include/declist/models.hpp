#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "declist/dataset.hpp"

namespace declist {

// Feature construction u(x) / z(x) for the working models.
struct FeatureMap {
  enum class Kind { InterceptOnly, Linear, Custom };  // Linear = (1, x^T)
  Kind kind = Kind::Linear;
  int custom_dim = 0;
  std::function<void(const Eigen::RowVectorXd&, Eigen::Ref<Eigen::VectorXd>)> custom;

  static FeatureMap intercept_only() { return {Kind::InterceptOnly, 0, nullptr}; }
  static FeatureMap linear() { return {Kind::Linear, 0, nullptr}; }

  int dim(int p) const {
    switch (kind) {
      case Kind::InterceptOnly: return 1;
      case Kind::Linear: return p + 1;
      case Kind::Custom: return custom_dim;
    }
    return 0;
  }
  void apply(const Eigen::RowVectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const;
  Eigen::MatrixXd build(const Eigen::MatrixXd& X) const;  // n x dim
  std::string name() const;
};

struct PropensitySpec {
  enum class Kind { SampleProportion, MultinomialLogistic };
  Kind kind = Kind::SampleProportion;
  FeatureMap u = FeatureMap::linear();  // ignored for SampleProportion (u == 1)

  FeatureMap effective_map() const {
    return kind == Kind::SampleProportion ? FeatureMap::intercept_only() : u;
  }
};

// Multinomial logistic propensity with arm m as reference. gamma stacks
// (gamma_1,...,gamma_{m-1}), each of length q. The sample-proportion
// estimator is the u(x) == 1 special case of the same path.
struct FittedPropensity {
  PropensitySpec spec;
  int m = 0;
  int q = 0;
  Eigen::VectorXd gamma;        // q*(m-1)
  Eigen::MatrixXd neg_hessian;  // averaged -d2 loglik, q(m-1) square, SPD
  int iterations = 0;

  Eigen::VectorXd gamma_block(int a) const { return gamma.segment((a - 1) * q, q); }

  // omega(x, a) for a = 1..m.
  Eigen::VectorXd predict(const Eigen::RowVectorXd& x) const;
  Eigen::MatrixXd predict_all(const Eigen::MatrixXd& X) const;  // n x m
  Eigen::VectorXd probs_from_features(const Eigen::VectorXd& u) const;
};

enum class LinkKind { Identity, Logit };

struct LassoSpec {
  std::vector<double> lambda_grid;      // empty => automatic 50-value grid
  int cv_folds = 10;
  std::optional<double> fixed_lambda;   // skip CV, fit at this lambda
  int grid_size = 50;
  double lambda_min_ratio = 1e-3;
};

struct OutcomeSpec {
  LinkKind link = LinkKind::Identity;
  FeatureMap z = FeatureMap::linear();
  std::optional<LassoSpec> lasso;  // nullopt => unpenalized maximum likelihood
  std::uint64_t cv_seed = 1;       // deterministic fold assignment

  static OutcomeSpec for_outcome(OutcomeKind kind, bool penalized = false) {
    OutcomeSpec s;
    s.link = kind == OutcomeKind::Binary ? LinkKind::Logit : LinkKind::Identity;
    if (penalized) s.lasso = LassoSpec{};
    return s;
  }
};

// Canonical-link GLM per arm: g{mu(x,a)} = z(x)^T beta_a. Blocks are
// independent across arms, so the negative Hessian is block diagonal.
struct FittedOutcome {
  OutcomeSpec spec;
  int m = 0;
  int r = 0;
  Eigen::MatrixXd beta;                      // r x m, column a-1 = beta_a
  std::vector<Eigen::MatrixXd> neg_hessian_blocks;  // per arm, r x r (without 1/phi)
  double dispersion = 1.0;                   // mean squared Pearson residual (1 for logit)
  std::optional<double> selected_lambda;
  int iterations = 0;
  // True for hand-set models (e.g. zero_model): no parameters were estimated,
  // so influence-function corrections do not apply.
  bool fixed_parameters = false;

  double mean_from_features(const Eigen::VectorXd& z, int a) const;
  double predict(const Eigen::RowVectorXd& x, int a) const;
  Eigen::MatrixXd predict_all(const Eigen::MatrixXd& X) const;  // n x m

  // Full (r*m) x (r*m) block-diagonal averaged negative Hessian including the
  // 1/dispersion factor, matching the score scaling below.
  Eigen::MatrixXd neg_hessian() const;

  static FittedOutcome zero_model(int m, int p);  // mu == 0 everywhere (test/DR hook)
};

inline double link_inverse(LinkKind link, double eta) {
  if (link == LinkKind::Identity) return eta;
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

inline double canonical_b2(LinkKind link, double theta) {  // b''(theta)
  if (link == LinkKind::Identity) return 1.0;
  const double mu = link_inverse(LinkKind::Logit, theta);
  return mu * (1.0 - mu);
}

FittedPropensity fit_propensity(const Dataset& data, const PropensitySpec& spec,
                                const Eigen::VectorXd& weights = Eigen::VectorXd());

FittedOutcome fit_outcome(const Dataset& data, const OutcomeSpec& spec,
                          const Eigen::VectorXd& weights = Eigen::VectorXd());

// Per-subject score vectors and averaged negative Hessians, as used by the
// influence-function calculations. Scores include the subject weight.
struct PropensityScores {
  Eigen::MatrixXd scores;       // n x q(m-1)
  Eigen::MatrixXd neg_hessian;  // q(m-1) square
};
struct OutcomeScores {
  Eigen::MatrixXd scores_block;  // n x r, nonzero block of the score (1/phi applied)
  std::vector<int> arm;          // which block, per subject
  Eigen::MatrixXd neg_hessian;   // (r m) square block diagonal (1/phi applied)
  Eigen::MatrixXd full_scores() const;  // n x (r m), for tests
};

PropensityScores score_contributions(const Dataset& data, const FittedPropensity& fit,
                                     const Eigen::VectorXd& weights = Eigen::VectorXd());
OutcomeScores score_contributions(const Dataset& data, const FittedOutcome& fit,
                                  const Eigen::VectorXd& weights = Eigen::VectorXd());

std::string models_to_json(const FittedPropensity& prop, const FittedOutcome& out, int indent = 2);

}  // namespace declist
