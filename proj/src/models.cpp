#include "declist/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "declist/error.hpp"
#include "declist/lasso.hpp"
#include "declist/rng.hpp"

namespace declist {

namespace {

constexpr double kGradTol = 1e-8;
constexpr int kMaxIter = 100;
constexpr int kMaxHalvings = 30;

// Strict positive-definiteness check: all LDLT pivots positive and not
// vanishingly small relative to the largest (rank-deficient designs fail).
bool ldlt_is_spd(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.maxCoeff();
  return dmax > 0.0 && d.minCoeff() > 1e-12 * dmax;
}

Eigen::VectorXd resolve_weights(const Eigen::VectorXd& weights, Eigen::Index n) {
  if (weights.size() == 0) return Eigen::VectorXd::Ones(n);
  if (weights.size() != n) throw_validation("weight vector length mismatch");
  if ((weights.array() < 0.0).any()) throw_validation("negative subject weight");
  return weights;
}

}  // namespace

void FeatureMap::apply(const Eigen::RowVectorXd& x, Eigen::Ref<Eigen::VectorXd> out) const {
  switch (kind) {
    case Kind::InterceptOnly:
      out[0] = 1.0;
      return;
    case Kind::Linear:
      out[0] = 1.0;
      out.tail(x.size()) = x.transpose();
      return;
    case Kind::Custom:
      custom(x, out);
      return;
  }
}

Eigen::MatrixXd FeatureMap::build(const Eigen::MatrixXd& X) const {
  const int q = dim(static_cast<int>(X.cols()));
  Eigen::MatrixXd out(X.rows(), q);
  Eigen::VectorXd row(q);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    apply(X.row(i), row);
    out.row(i) = row.transpose();
  }
  return out;
}

std::string FeatureMap::name() const {
  switch (kind) {
    case Kind::InterceptOnly: return "intercept-only";
    case Kind::Linear: return "intercept-plus-identity";
    case Kind::Custom: return "custom";
  }
  return "?";
}

Eigen::VectorXd FittedPropensity::probs_from_features(const Eigen::VectorXd& u) const {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(m);
  for (int a = 1; a < m; ++a) eta[a - 1] = u.dot(gamma_block(a));
  const double emax = eta.maxCoeff();
  Eigen::VectorXd ex = (eta.array() - emax).exp();
  return ex / ex.sum();
}

Eigen::VectorXd FittedPropensity::predict(const Eigen::RowVectorXd& x) const {
  Eigen::VectorXd u(q);
  spec.effective_map().apply(x, u);
  return probs_from_features(u);
}

Eigen::MatrixXd FittedPropensity::predict_all(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(X.rows(), m);
  Eigen::VectorXd u(q);
  const FeatureMap map = spec.effective_map();
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    map.apply(X.row(i), u);
    out.row(i) = probs_from_features(u).transpose();
  }
  return out;
}

namespace {

// Mean weighted multinomial log-likelihood and its derivatives. The gradient
// block for arm a is (1/n) sum_i w_i U_i {I(A_i=a) - omega_ia}; the negative
// Hessian block (a,b) is (1/n) sum_i w_i U_i U_i^T {omega_ia delta_ab -
// omega_ia omega_ib}.
struct MultinomialEval {
  double loglik = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd neg_hessian;
};

MultinomialEval eval_multinomial(const Eigen::MatrixXd& U, const std::vector<int>& A, int m,
                                 const Eigen::VectorXd& w, const Eigen::VectorXd& gamma,
                                 bool need_hessian) {
  const Eigen::Index n = U.rows();
  const int q = static_cast<int>(U.cols());
  const int dim = q * (m - 1);
  MultinomialEval ev;
  ev.gradient = Eigen::VectorXd::Zero(dim);
  if (need_hessian) ev.neg_hessian = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd eta(m), probs(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    eta.setZero();
    for (int a = 1; a < m; ++a) eta[a - 1] = U.row(i).dot(gamma.segment((a - 1) * q, q));
    const double emax = std::max(eta.maxCoeff(), 0.0);
    double denom = 0.0;
    for (int a = 0; a < m; ++a) denom += std::exp(eta[a] - emax);
    for (int a = 0; a < m; ++a) probs[a] = std::exp(eta[a] - emax) / denom;
    const double wi = w[i];
    ev.loglik += wi * (eta[A[i] - 1] - emax - std::log(denom));
    for (int a = 1; a < m; ++a) {
      const double resid = (A[i] == a ? 1.0 : 0.0) - probs[a - 1];
      ev.gradient.segment((a - 1) * q, q) += wi * resid * U.row(i).transpose();
    }
    if (need_hessian) {
      for (int a = 1; a < m; ++a) {
        for (int b = a; b < m; ++b) {
          const double wab =
              wi * (probs[a - 1] * ((a == b ? 1.0 : 0.0) - probs[b - 1]));
          ev.neg_hessian.block((a - 1) * q, (b - 1) * q, q, q) +=
              wab * (U.row(i).transpose() * U.row(i));
        }
      }
    }
  }
  ev.loglik /= static_cast<double>(n);
  ev.gradient /= static_cast<double>(n);
  if (need_hessian) {
    ev.neg_hessian /= static_cast<double>(n);
    ev.neg_hessian = ev.neg_hessian.selfadjointView<Eigen::Upper>();
  }
  return ev;
}

}  // namespace

FittedPropensity fit_propensity(const Dataset& data, const PropensitySpec& spec,
                                const Eigen::VectorXd& weights) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXd w = resolve_weights(weights, n);
  const int m = data.num_arms();
  const FeatureMap map = spec.effective_map();
  const Eigen::MatrixXd U = map.build(data.covariates);
  const int q = static_cast<int>(U.cols());
  const int dim = q * (m - 1);

  FittedPropensity fit;
  fit.spec = spec;
  fit.m = m;
  fit.q = q;
  fit.gamma = Eigen::VectorXd::Zero(dim);

  // Weighted arm proportions give the exact MLE when u == 1 and a good
  // starting point otherwise (for the intercept coordinate).
  {
    Eigen::VectorXd wsum = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) wsum[data.treatments[i] - 1] += w[i];
    if ((wsum.array() > 0.0).all()) {
      for (int a = 1; a < m; ++a) fit.gamma[(a - 1) * q] = std::log(wsum[a - 1] / wsum[m - 1]);
    }
  }

  MultinomialEval ev = eval_multinomial(U, data.treatments, m, w, fit.gamma, true);
  int it = 0;
  for (; it < kMaxIter; ++it) {
    if (ev.gradient.cwiseAbs().maxCoeff() <= kGradTol) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.neg_hessian);
    if (!ldlt_is_spd(ldlt)) {
      throw_fit("propensity model: rank-deficient design (negative Hessian not PD)");
    }
    const Eigen::VectorXd step = ldlt.solve(ev.gradient);
    double scale = 1.0;
    MultinomialEval next;
    bool improved = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      next = eval_multinomial(U, data.treatments, m, w, fit.gamma + scale * step, true);
      if (next.loglik >= ev.loglik) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      throw_fit("propensity model: no ascent step found (gradient sup-norm " +
                std::to_string(ev.gradient.cwiseAbs().maxCoeff()) + ")");
    }
    fit.gamma += scale * step;
    ev = std::move(next);
  }
  if (ev.gradient.cwiseAbs().maxCoeff() > kGradTol) {
    throw_fit("propensity model did not converge in " + std::to_string(kMaxIter) +
              " iterations (gradient sup-norm " +
              std::to_string(ev.gradient.cwiseAbs().maxCoeff()) + ")");
  }
  fit.iterations = it;
  fit.neg_hessian = ev.neg_hessian;
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(fit.neg_hessian);
    if (!ldlt_is_spd(ldlt)) {
      throw_fit("propensity model: negative Hessian not positive definite at the MLE");
    }
  }
  return fit;
}

double FittedOutcome::mean_from_features(const Eigen::VectorXd& z, int a) const {
  return link_inverse(spec.link, z.dot(beta.col(a - 1)));
}

double FittedOutcome::predict(const Eigen::RowVectorXd& x, int a) const {
  Eigen::VectorXd z(r);
  spec.z.apply(x, z);
  return mean_from_features(z, a);
}

Eigen::MatrixXd FittedOutcome::predict_all(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd out(X.rows(), m);
  Eigen::VectorXd z(r);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    spec.z.apply(X.row(i), z);
    for (int a = 1; a <= m; ++a) out(i, a - 1) = mean_from_features(z, a);
  }
  return out;
}

Eigen::MatrixXd FittedOutcome::neg_hessian() const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(r * m, r * m);
  for (int a = 0; a < m; ++a) {
    H.block(a * r, a * r, r, r) = neg_hessian_blocks[a] / dispersion;
  }
  return H;
}

FittedOutcome FittedOutcome::zero_model(int m, int p) {
  FittedOutcome fit;
  fit.spec.link = LinkKind::Identity;
  fit.m = m;
  fit.r = p + 1;
  fit.beta = Eigen::MatrixXd::Zero(fit.r, m);
  fit.neg_hessian_blocks.assign(m, Eigen::MatrixXd::Identity(fit.r, fit.r));
  fit.fixed_parameters = true;
  return fit;
}

namespace {

struct ArmData {
  Eigen::MatrixXd Z;  // n_a x r
  Eigen::VectorXd y;
  Eigen::VectorXd w;
  std::vector<Eigen::Index> rows;  // original indices
};

std::vector<ArmData> split_by_arm(const Eigen::MatrixXd& Z, const Dataset& data,
                                  const Eigen::VectorXd& w) {
  std::vector<ArmData> arms(data.num_arms());
  for (Eigen::Index i = 0; i < data.n(); ++i) arms[data.treatments[i] - 1].rows.push_back(i);
  for (auto& arm : arms) {
    const Eigen::Index na = static_cast<Eigen::Index>(arm.rows.size());
    arm.Z.resize(na, Z.cols());
    arm.y.resize(na);
    arm.w.resize(na);
    for (Eigen::Index k = 0; k < na; ++k) {
      arm.Z.row(k) = Z.row(arm.rows[k]);
      arm.y[k] = data.outcomes[arm.rows[k]];
      arm.w[k] = w[arm.rows[k]];
    }
  }
  return arms;
}

// Per-arm maximum likelihood via damped Newton (IRLS). The log-likelihood is
// non-decreasing across iterations by construction of the step halving.
Eigen::VectorXd fit_glm_arm(const ArmData& arm, LinkKind link, double norm_n, int* iters) {
  const int r = static_cast<int>(arm.Z.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(r);
  if (link == LinkKind::Logit) {
    const double ybar = std::clamp(arm.w.dot(arm.y) / std::max(arm.w.sum(), 1e-12), 1e-6,
                                   1.0 - 1e-6);
    beta[0] = logit(ybar);
  }
  auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd theta = arm.Z * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double bfun = link == LinkKind::Identity ? 0.5 * theta[i] * theta[i]
                                                     : std::log1p(std::exp(-std::abs(theta[i]))) +
                                                           std::max(theta[i], 0.0);
      ll += arm.w[i] * (arm.y[i] * theta[i] - bfun);
    }
    return ll / norm_n;
  };
  double cur = loglik(beta);
  int it = 0;
  for (; it < kMaxIter; ++it) {
    const Eigen::VectorXd theta = arm.Z * beta;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(r);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(r, r);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double mu = link_inverse(link, theta[i]);
      grad += arm.w[i] * (arm.y[i] - mu) * arm.Z.row(i).transpose();
      info.noalias() +=
          arm.w[i] * canonical_b2(link, theta[i]) * (arm.Z.row(i).transpose() * arm.Z.row(i));
    }
    grad /= norm_n;
    info /= norm_n;
    if (grad.cwiseAbs().maxCoeff() <= kGradTol) break;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (!ldlt_is_spd(ldlt)) {
      throw_fit("outcome model: rank-deficient design in one arm");
    }
    const Eigen::VectorXd step = ldlt.solve(grad);
    double scale = 1.0;
    bool improved = false;
    for (int h = 0; h <= kMaxHalvings; ++h) {
      const double cand = loglik(beta + scale * step);
      if (cand >= cur) {
        cur = cand;
        beta += scale * step;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      throw_fit("outcome model: no ascent step found (gradient sup-norm " +
                std::to_string(grad.cwiseAbs().maxCoeff()) + ")");
    }
  }
  if (it >= kMaxIter) throw_fit("outcome model did not converge in 100 iterations");
  if (iters) *iters = std::max(*iters, it);
  return beta;
}

// Deterministic per-arm stratified fold labels in {0..folds-1}.
std::vector<int> cv_fold_labels(const Dataset& data, int folds, std::uint64_t seed) {
  std::vector<int> label(data.n(), 0);
  Rng rng = Rng::keyed(seed, 0x6f6c64f5ULL);
  for (int a = 1; a <= data.num_arms(); ++a) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.treatments[i] == a) idx.push_back(i);
    }
    // Fisher-Yates with the shared stream.
    for (std::size_t k = idx.size(); k > 1; --k) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(k) - 1));
      std::swap(idx[k - 1], idx[j]);
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      label[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
    }
  }
  return label;
}

std::vector<double> make_lambda_grid(double lmax, const LassoSpec& spec) {
  if (!spec.lambda_grid.empty()) {
    auto grid = spec.lambda_grid;
    std::sort(grid.begin(), grid.end(), std::greater<>());
    return grid;
  }
  if (lmax <= 0.0) lmax = 1e-3;
  std::vector<double> grid(spec.grid_size);
  const double lmin = lmax * spec.lambda_min_ratio;
  for (int i = 0; i < spec.grid_size; ++i) {
    const double t = spec.grid_size == 1 ? 0.0 : static_cast<double>(i) / (spec.grid_size - 1);
    grid[i] = lmax * std::exp(t * std::log(lmin / lmax));
  }
  return grid;
}

// Fits the per-arm lasso path at the shared lambda grid; returns one r x L
// coefficient matrix per arm.
std::vector<Eigen::MatrixXd> lasso_paths_by_arm(const std::vector<ArmData>& arms, LinkKind link,
                                                double norm_n,
                                                const std::vector<double>& lambdas) {
  std::vector<Eigen::MatrixXd> paths;
  for (const auto& arm : arms) {
    if (arm.rows.empty()) {
      paths.push_back(Eigen::MatrixXd::Zero(arms[0].Z.cols(),
                                            static_cast<Eigen::Index>(lambdas.size())));
      continue;
    }
    LassoProblem prob{arm.Z, arm.y, arm.w, norm_n};
    if (link == LinkKind::Identity) {
      paths.push_back(lasso_path_gaussian(prob, lambdas).coefficients);
    } else {
      Eigen::MatrixXd coefs(arm.Z.cols(), static_cast<Eigen::Index>(lambdas.size()));
      Eigen::VectorXd warm;
      for (std::size_t li = 0; li < lambdas.size(); ++li) {
        warm = lasso_logistic(prob, lambdas[li], warm);
        coefs.col(static_cast<Eigen::Index>(li)) = warm;
      }
      paths.push_back(std::move(coefs));
    }
  }
  return paths;
}

}  // namespace

FittedOutcome fit_outcome(const Dataset& data, const OutcomeSpec& spec,
                          const Eigen::VectorXd& weights) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXd w = resolve_weights(weights, n);
  if (spec.link == LinkKind::Logit && data.outcome_kind != OutcomeKind::Binary) {
    throw_validation("logit link requires a binary outcome");
  }
  const int m = data.num_arms();
  const Eigen::MatrixXd Z = spec.z.build(data.covariates);
  const int r = static_cast<int>(Z.cols());
  const double norm_n = static_cast<double>(n);
  const std::vector<ArmData> arms = split_by_arm(Z, data, w);

  FittedOutcome fit;
  fit.spec = spec;
  fit.m = m;
  fit.r = r;
  fit.beta.resize(r, m);
  fit.iterations = 0;

  if (!spec.lasso) {
    for (int a = 0; a < m; ++a) {
      fit.beta.col(a) = fit_glm_arm(arms[a], spec.link, norm_n, &fit.iterations);
    }
  } else {
    const LassoSpec& ls = *spec.lasso;
    if (!ls.fixed_lambda && ls.lambda_grid.empty() && ls.grid_size < 1) {
      throw_validation("lasso: empty lambda grid");
    }
    double lambda = 0.0;
    if (ls.fixed_lambda) {
      lambda = *ls.fixed_lambda;
    } else {
      double lmax = 0.0;
      for (const auto& arm : arms) {
        // For both links the null-fit gradient reduces to X~' W (y - ybar),
        // which is what lasso_lambda_max computes (it centers y internally).
        lmax = std::max(lmax, lasso_lambda_max({arm.Z, arm.y, arm.w, norm_n}));
      }
      const std::vector<double> grid = make_lambda_grid(lmax, ls);
      // 10-fold CV on the shared grid; deterministic stratified folds.
      const std::vector<int> fold = cv_fold_labels(data, ls.cv_folds, spec.cv_seed);
      std::vector<double> cv_err(grid.size(), 0.0);
      for (int f = 0; f < ls.cv_folds; ++f) {
        std::vector<ArmData> train(m);
        for (int a = 0; a < m; ++a) {
          const ArmData& arm = arms[a];
          for (std::size_t k = 0; k < arm.rows.size(); ++k) {
            if (fold[arm.rows[k]] == f) continue;
            train[a].rows.push_back(arm.rows[k]);
          }
          const Eigen::Index na = static_cast<Eigen::Index>(train[a].rows.size());
          train[a].Z.resize(na, r);
          train[a].y.resize(na);
          train[a].w.resize(na);
          Eigen::Index t = 0;
          for (std::size_t k = 0; k < arm.rows.size(); ++k) {
            if (fold[arm.rows[k]] == f) continue;
            train[a].Z.row(t) = arm.Z.row(static_cast<Eigen::Index>(k));
            train[a].y[t] = arm.y[static_cast<Eigen::Index>(k)];
            train[a].w[t] = arm.w[static_cast<Eigen::Index>(k)];
            ++t;
          }
        }
        double train_n = 0.0;
        for (const auto& t : train) train_n += static_cast<double>(t.rows.size());
        const auto paths = lasso_paths_by_arm(train, spec.link, train_n, grid);
        // Held-out prediction error (squared error / deviance).
        for (int a = 0; a < m; ++a) {
          const ArmData& arm = arms[a];
          for (std::size_t k = 0; k < arm.rows.size(); ++k) {
            if (fold[arm.rows[k]] != f) continue;
            const Eigen::Index kk = static_cast<Eigen::Index>(k);
            for (std::size_t li = 0; li < grid.size(); ++li) {
              const double eta = arm.Z.row(kk).dot(paths[a].col(static_cast<Eigen::Index>(li)));
              if (spec.link == LinkKind::Identity) {
                const double e = arm.y[kk] - eta;
                cv_err[li] += arm.w[kk] * e * e;
              } else {
                const double bfun = std::log1p(std::exp(-std::abs(eta))) + std::max(eta, 0.0);
                cv_err[li] += 2.0 * arm.w[kk] * (bfun - arm.y[kk] * eta);
              }
            }
          }
        }
      }
      std::size_t best = 0;
      for (std::size_t li = 1; li < grid.size(); ++li) {
        if (cv_err[li] < cv_err[best]) best = li;
      }
      lambda = grid[best];
    }
    const auto paths = lasso_paths_by_arm(arms, spec.link, norm_n, {lambda});
    for (int a = 0; a < m; ++a) fit.beta.col(a) = paths[a].col(0);
    fit.selected_lambda = lambda;
  }

  // Averaged negative Hessian blocks and the dispersion estimate.
  fit.neg_hessian_blocks.assign(m, Eigen::MatrixXd::Zero(r, r));
  double pearson = 0.0;
  double wsum = 0.0;
  for (int a = 0; a < m; ++a) {
    const ArmData& arm = arms[a];
    const Eigen::VectorXd theta = arm.Z * fit.beta.col(a);
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      fit.neg_hessian_blocks[a].noalias() +=
          arm.w[k] * canonical_b2(spec.link, theta[k]) *
          (arm.Z.row(k).transpose() * arm.Z.row(k));
      const double mu = link_inverse(spec.link, theta[k]);
      const double vfun = spec.link == LinkKind::Identity ? 1.0 : std::max(mu * (1.0 - mu), 1e-12);
      pearson += arm.w[k] * (arm.y[k] - mu) * (arm.y[k] - mu) / vfun;
      wsum += arm.w[k];
    }
    fit.neg_hessian_blocks[a] /= norm_n;
  }
  fit.dispersion = spec.link == LinkKind::Logit ? 1.0 : std::max(pearson / wsum, 1e-12);
  return fit;
}

PropensityScores score_contributions(const Dataset& data, const FittedPropensity& fit,
                                     const Eigen::VectorXd& weights) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXd w = resolve_weights(weights, n);
  const Eigen::MatrixXd U = fit.spec.effective_map().build(data.covariates);
  MultinomialEval ev = eval_multinomial(U, data.treatments, fit.m, w, fit.gamma, true);
  PropensityScores out;
  out.neg_hessian = std::move(ev.neg_hessian);
  out.scores.resize(n, fit.q * (fit.m - 1));
  Eigen::VectorXd probs(fit.m);
  for (Eigen::Index i = 0; i < n; ++i) {
    probs = fit.probs_from_features(U.row(i).transpose());
    for (int a = 1; a < fit.m; ++a) {
      const double resid = (data.treatments[i] == a ? 1.0 : 0.0) - probs[a - 1];
      out.scores.row(i).segment((a - 1) * fit.q, fit.q) = w[i] * resid * U.row(i);
    }
  }
  return out;
}

Eigen::MatrixXd OutcomeScores::full_scores() const {
  const Eigen::Index n = scores_block.rows();
  const Eigen::Index r = scores_block.cols();
  const int m = static_cast<int>(neg_hessian.rows() / r);
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, r * m);
  for (Eigen::Index i = 0; i < n; ++i) {
    full.row(i).segment((arm[i] - 1) * r, r) = scores_block.row(i);
  }
  return full;
}

OutcomeScores score_contributions(const Dataset& data, const FittedOutcome& fit,
                                  const Eigen::VectorXd& weights) {
  const Eigen::Index n = data.n();
  const Eigen::VectorXd w = resolve_weights(weights, n);
  const Eigen::MatrixXd Z = fit.spec.z.build(data.covariates);
  OutcomeScores out;
  out.arm = data.treatments;
  out.scores_block.resize(n, fit.r);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = data.treatments[i];
    const double theta = Z.row(i).dot(fit.beta.col(a - 1));
    const double mu = link_inverse(fit.spec.link, theta);
    out.scores_block.row(i) = (w[i] * (data.outcomes[i] - mu) / fit.dispersion) * Z.row(i);
  }
  out.neg_hessian = fit.neg_hessian();
  return out;
}

std::string models_to_json(const FittedPropensity& prop, const FittedOutcome& out, int indent) {
  nlohmann::json doc;
  doc["propensity"] = {
      {"kind", prop.spec.kind == PropensitySpec::Kind::SampleProportion ? "sample-proportion"
                                                                        : "multinomial-logistic"},
      {"feature_map", prop.spec.effective_map().name()},
      {"arms", prop.m},
      {"gamma", std::vector<double>(prop.gamma.data(), prop.gamma.data() + prop.gamma.size())},
  };
  nlohmann::json betas = nlohmann::json::array();
  for (int a = 0; a < out.m; ++a) {
    betas.push_back(std::vector<double>(out.beta.col(a).data(), out.beta.col(a).data() + out.r));
  }
  doc["outcome"] = {
      {"link", out.spec.link == LinkKind::Identity ? "identity" : "logit"},
      {"feature_map", out.spec.z.name()},
      {"beta", std::move(betas)},
      {"dispersion", out.dispersion},
  };
  if (out.selected_lambda) doc["outcome"]["lambda"] = *out.selected_lambda;
  return doc.dump(indent);
}

}  // namespace declist
