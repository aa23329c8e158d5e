#pragma once

#include <Eigen/Core>
#include <vector>

#include "declist/dataset.hpp"
#include "declist/models.hpp"
#include "declist/regime.hpp"

namespace declist {

// Estimated value with an explicit "minus infinity" tag (used for decision
// lists with sample-vacuous clause regions) so comparisons stay total without
// floating-point specials.
struct RegimeValue {
  double v = 0.0;
  bool neg_inf = false;

  static RegimeValue minus_infinity() { return {0.0, true}; }
  static RegimeValue finite(double x) { return {x, false}; }

  bool operator<(const RegimeValue& o) const {
    if (neg_inf != o.neg_inf) return neg_inf;
    return !neg_inf && v < o.v;
  }
  bool operator>=(const RegimeValue& o) const { return !(*this < o); }

  double require_finite() const;
};

// AIPW pseudo-outcomes xi_ia; the value of any regime is the (weighted) mean
// of the entries it selects.
struct PseudoOutcomeMatrix {
  Eigen::MatrixXd xi;  // n x m
};

// Propensities below this floor are clipped before any division (positivity).
inline constexpr double kPropensityFloor = 1e-3;

PseudoOutcomeMatrix pseudo_outcomes(const Dataset& data, const FittedPropensity& propensity,
                                    const FittedOutcome& outcome);
// Building block taking explicit model predictions (also used by tests with
// hand-set omega / mu matrices).
PseudoOutcomeMatrix pseudo_outcomes_from(const Dataset& data, const Eigen::MatrixXd& omega,
                                         const Eigen::MatrixXd& mu);

RegimeValue value(const PseudoOutcomeMatrix& xi, const DecisionList& pi, const Dataset& data,
                  const Eigen::VectorXd& weights = Eigen::VectorXd());

// Plug-in influence-function machinery for Var{R(pi)} and
// Var{R(pi1) - R(pi2)}. All expectations are sample averages over the same n
// subjects; correction terms for the estimated propensity and outcome
// parameters are always included (the sample-proportion propensity runs
// through the same u == 1 multinomial path).
class InfluenceContext {
public:
  InfluenceContext(const Dataset& data, const FittedPropensity& propensity,
                   const FittedOutcome& outcome,
                   const Eigen::VectorXd& weights = Eigen::VectorXd());

  const PseudoOutcomeMatrix& xi() const { return xi_; }
  const Eigen::MatrixXd& omega() const { return omega_; }
  const Eigen::MatrixXd& mu() const { return mu_; }
  const Eigen::VectorXd& weights() const { return w_; }
  Eigen::Index n() const { return xi_.xi.rows(); }
  int arms() const { return static_cast<int>(xi_.xi.cols()); }

  double value_of(const std::vector<int>& rec) const;

  // Correction expectation vectors of the value's influence function: the
  // gamma term uses d omega / d gamma, the beta term uses d mu / d beta.
  Eigen::VectorXd gamma_correction(const std::vector<int>& rec) const;
  Eigen::VectorXd beta_correction(const std::vector<int>& rec) const;

  // Per-subject influence values phi_R for the regime with recommendations
  // rec (rec[i] in 1..m).
  Eigen::VectorXd influence(const std::vector<int>& rec) const;

  double variance_of_value(const std::vector<int>& rec) const;
  double variance_of_difference(const std::vector<int>& rec1,
                                const std::vector<int>& rec2) const;

private:
  Eigen::MatrixXd U_;          // n x q propensity features
  Eigen::MatrixXd Z_;          // n x r outcome features
  Eigen::MatrixXd omega_;      // n x m raw model probabilities; clipped at use sites
  Eigen::MatrixXd mu_;         // n x m
  PseudoOutcomeMatrix xi_;
  Eigen::VectorXd w_;
  Eigen::VectorXd y_;
  std::vector<int> a_obs_;
  Eigen::MatrixXd phi_gamma_;  // n x q(m-1), H^{-1} score per subject
  Eigen::MatrixXd phi_beta_;   // n x r, nonzero block of H^{-1} score
  Eigen::MatrixXd b2_;         // n x m, b''(z^T beta_a)
  int q_ = 0;
  int r_ = 0;
  int m_ = 0;
  bool beta_fixed_ = false;
  LinkKind link_ = LinkKind::Identity;
};

// Convenience wrappers over InfluenceContext for one-off queries.
double variance_of_value(const DecisionList& pi, const Dataset& data,
                         const FittedPropensity& propensity, const FittedOutcome& outcome);
double variance_of_difference(const DecisionList& pi1, const DecisionList& pi2,
                              const Dataset& data, const FittedPropensity& propensity,
                              const FittedOutcome& outcome);

}  // namespace declist
