#include "declist/value.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "declist/error.hpp"

namespace declist {

namespace {

bool ldlt_is_spd(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  return dmax > 0.0 && d.minCoeff() > 1e-12 * dmax;
}

}  // namespace

double RegimeValue::require_finite() const {
  if (neg_inf) throw_validation("regime has a sample-vacuous clause (value -inf)");
  return v;
}

PseudoOutcomeMatrix pseudo_outcomes_from(const Dataset& data, const Eigen::MatrixXd& omega,
                                         const Eigen::MatrixXd& mu) {
  const Eigen::Index n = data.n();
  PseudoOutcomeMatrix out;
  out.xi = mu;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = data.treatments[i];
    const double om = std::max(omega(i, a - 1), kPropensityFloor);
    out.xi(i, a - 1) += (data.outcomes[i] - mu(i, a - 1)) / om;
  }
  return out;
}

PseudoOutcomeMatrix pseudo_outcomes(const Dataset& data, const FittedPropensity& propensity,
                                    const FittedOutcome& outcome) {
  return pseudo_outcomes_from(data, propensity.predict_all(data.covariates),
                              outcome.predict_all(data.covariates));
}

RegimeValue value(const PseudoOutcomeMatrix& xi, const DecisionList& pi, const Dataset& data,
                  const Eigen::VectorXd& weights) {
  const Eigen::Index n = data.n();
  if (weights.size() != 0 && weights.size() != n) throw_validation("weight length mismatch");
  std::vector<Eigen::Index> caught(pi.length(), 0);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int arm = pi.default_action;
    for (int l = 0; l < pi.length(); ++l) {
      if (pi.clauses[l].condition.contains(data.covariates.row(i))) {
        ++caught[l];
        arm = pi.clauses[l].action;
        break;
      }
    }
    const double w = weights.size() ? weights[i] : 1.0;
    sum += w * xi.xi(i, arm - 1);
  }
  for (int l = 0; l < pi.length(); ++l) {
    if (caught[l] == 0) return RegimeValue::minus_infinity();
  }
  return RegimeValue::finite(sum / static_cast<double>(n));
}

InfluenceContext::InfluenceContext(const Dataset& data, const FittedPropensity& propensity,
                                   const FittedOutcome& outcome, const Eigen::VectorXd& weights) {
  const Eigen::Index n = data.n();
  m_ = data.num_arms();
  q_ = propensity.q;
  r_ = outcome.r;
  link_ = outcome.spec.link;
  w_ = weights.size() ? weights : Eigen::VectorXd::Ones(n);
  if (w_.size() != n) throw_validation("weight length mismatch");
  y_ = data.outcomes;
  a_obs_ = data.treatments;

  U_ = propensity.spec.effective_map().build(data.covariates);
  Z_ = outcome.spec.z.build(data.covariates);
  omega_ = propensity.predict_all(data.covariates);
  mu_.resize(n, m_);
  b2_.resize(n, m_);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int a = 1; a <= m_; ++a) {
      const double theta = Z_.row(i).dot(outcome.beta.col(a - 1));
      mu_(i, a - 1) = link_inverse(link_, theta);
      b2_(i, a - 1) = canonical_b2(link_, theta);
    }
  }
  xi_ = pseudo_outcomes_from(data, omega_, mu_);

  // phi_gamma(O_i) = H_t^{-1} s_t(O_i); scores carry the subject weight.
  PropensityScores ps = score_contributions(data, propensity, w_);
  Eigen::LDLT<Eigen::MatrixXd> ldlt_t(ps.neg_hessian);
  if (!ldlt_is_spd(ldlt_t)) {
    throw_fit("singular propensity information matrix");
  }
  phi_gamma_ = ldlt_t.solve(ps.scores.transpose()).transpose();

  // phi_beta(O_i): block-diagonal solve; only the observed arm's block is
  // nonzero. The dispersion cancels between score and Hessian. Fixed
  // (non-estimated) outcome models contribute no correction.
  beta_fixed_ = outcome.fixed_parameters;
  phi_beta_ = Eigen::MatrixXd::Zero(n, r_);
  if (!beta_fixed_) {
    std::vector<Eigen::LDLT<Eigen::MatrixXd>> arm_solvers;
    arm_solvers.reserve(m_);
    for (int a = 0; a < m_; ++a) {
      arm_solvers.emplace_back(outcome.neg_hessian_blocks[a]);
      if (!ldlt_is_spd(arm_solvers.back())) {
        throw_fit("singular outcome information matrix in arm " + std::to_string(a + 1));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = a_obs_[i];
      const Eigen::VectorXd s =
          w_[i] * (y_[i] - mu_(i, a - 1)) * Z_.row(i).transpose();
      phi_beta_.row(i) = arm_solvers[a - 1].solve(s).transpose();
    }
  }
}

double InfluenceContext::value_of(const std::vector<int>& rec) const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n(); ++i) sum += w_[i] * xi_.xi(i, rec[i] - 1);
  return sum / static_cast<double>(n());
}

Eigen::VectorXd InfluenceContext::gamma_correction(const std::vector<int>& rec) const {
  const int dim = q_ * (m_ - 1);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index i = 0; i < n(); ++i) {
    const int a = rec[i];
    if (a_obs_[i] != a) continue;  // the I(A_i = a) factor
    const double om = std::max(omega_(i, a - 1), kPropensityFloor);
    const double s = -w_[i] * (y_[i] - mu_(i, a - 1)) / (om * om);
    // d omega(x,a)/d gamma, block b: omega_a (delta_ab - omega_b) u.
    for (int b = 1; b < m_; ++b) {
      const double factor =
          omega_(i, a - 1) * ((a == b ? 1.0 : 0.0) - omega_(i, b - 1));
      c.segment((b - 1) * q_, q_) += (s * factor) * U_.row(i).transpose();
    }
  }
  return c / static_cast<double>(n());
}

Eigen::VectorXd InfluenceContext::beta_correction(const std::vector<int>& rec) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(r_ * m_);
  if (beta_fixed_) return c;
  for (Eigen::Index i = 0; i < n(); ++i) {
    const int a = rec[i];
    const double om = std::max(omega_(i, a - 1), kPropensityFloor);
    const double s = w_[i] * (1.0 - (a_obs_[i] == a ? 1.0 / om : 0.0));
    c.segment((a - 1) * r_, r_) += (s * b2_(i, a - 1)) * Z_.row(i).transpose();
  }
  return c / static_cast<double>(n());
}

Eigen::VectorXd InfluenceContext::influence(const std::vector<int>& rec) const {
  const double rhat = value_of(rec);
  const Eigen::VectorXd cg = gamma_correction(rec);
  const Eigen::VectorXd cb = beta_correction(rec);
  Eigen::VectorXd phi(n());
  for (Eigen::Index i = 0; i < n(); ++i) {
    double v = w_[i] * xi_.xi(i, rec[i] - 1) - rhat;
    v += cg.dot(phi_gamma_.row(i));
    v += cb.segment((a_obs_[i] - 1) * r_, r_).dot(phi_beta_.row(i));
    phi[i] = v;
  }
  return phi;
}

double InfluenceContext::variance_of_value(const std::vector<int>& rec) const {
  const Eigen::VectorXd phi = influence(rec);
  return phi.squaredNorm() / (static_cast<double>(n()) * static_cast<double>(n()));
}

double InfluenceContext::variance_of_difference(const std::vector<int>& rec1,
                                                const std::vector<int>& rec2) const {
  const Eigen::VectorXd d = influence(rec1) - influence(rec2);
  return d.squaredNorm() / (static_cast<double>(n()) * static_cast<double>(n()));
}

double variance_of_value(const DecisionList& pi, const Dataset& data,
                         const FittedPropensity& propensity, const FittedOutcome& outcome) {
  InfluenceContext ctx(data, propensity, outcome);
  return ctx.variance_of_value(pi.evaluate_all(data.covariates));
}

double variance_of_difference(const DecisionList& pi1, const DecisionList& pi2,
                              const Dataset& data, const FittedPropensity& propensity,
                              const FittedOutcome& outcome) {
  InfluenceContext ctx(data, propensity, outcome);
  return ctx.variance_of_difference(pi1.evaluate_all(data.covariates),
                                    pi2.evaluate_all(data.covariates));
}

}  // namespace declist
