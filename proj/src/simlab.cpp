#include "declist/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "declist/error.hpp"

namespace declist {

namespace {

constexpr std::uint64_t kTestStream = 0x7E57BE7Cull;

}  // namespace

SimSetting SimSetting::make(int id, OutcomeKind kind, int p) {
  if (id < 1 || id > 7) throw_validation("setting id must be in 1..7");
  SimSetting s;
  s.id = id;
  s.m = id >= 5 ? 3 : 2;
  s.p = p;
  s.outcome_kind = kind;
  // The main-effect term uses x1, x3, x5, x7.
  if (p < 7) throw_validation("p must be at least 7 for these generative models");
  return s;
}

int SimSetting::parse_id(const std::string& roman) {
  static const std::vector<std::string> names = {"I", "II", "III", "IV", "V", "VI", "VII"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (roman == names[i]) return static_cast<int>(i) + 1;
  }
  throw_validation("unknown setting '" + roman + "' (expect I..VII)");
}

std::string SimSetting::roman() const {
  static const std::vector<std::string> names = {"I", "II", "III", "IV", "V", "VI", "VII"};
  return names[id - 1];
}

double SimSetting::phi(const Eigen::RowVectorXd& x, int a) const {
  switch (id) {
    case 1:
      return a == 2 ? 3.0 * ((x[0] <= 1.0 && x[1] > -0.6) ? 1.0 : 0.0) - 1.0 : 0.0;
    case 2:
      return a == 2 ? x[0] + x[1] - 1.0 : 0.0;
    case 3:
      return a == 2 ? std::atan(std::exp(1.0 + x[0]) - 3.0 * x[1] - 5.0) : 0.0;
    case 4:
      return a == 2 ? x[0] - x[1] + x[2] - x[3] : 0.0;
    case 5:
      if (a == 2) return 4.0 * (x[0] > 1.0 ? 1.0 : 0.0) - 2.0;
      if (a == 3) return (x[0] <= 1.0 ? 1.0 : 0.0) * (2.0 * (x[1] <= -0.3 ? 1.0 : 0.0) - 1.0);
      return 0.0;
    case 6:
      if (a == 2) return 2.0 * x[0];
      if (a == 3) return -x[0] * x[1];
      return 0.0;
    default:  // 7
      if (a == 2) return x[0] - x[1];
      if (a == 3) return x[2] - x[3];
      return 0.0;
  }
}

double SimSetting::linear_predictor(const Eigen::RowVectorXd& x, int a) const {
  return 2.0 + x[0] + x[2] + x[4] + x[6] + phi(x, a);
}

double SimSetting::conditional_mean(const Eigen::RowVectorXd& x, int a) const {
  const double lp = linear_predictor(x, a);
  return outcome_kind == OutcomeKind::Binary ? expit(lp) : lp;
}

int SimSetting::pi_opt(const Eigen::RowVectorXd& x) const {
  int best = 1;
  double best_phi = phi(x, 1);
  for (int a = 2; a <= m; ++a) {
    const double v = phi(x, a);
    if (v > best_phi) {
      best_phi = v;
      best = a;
    }
  }
  return best;
}

Eigen::Index SimSetting::default_n() const {
  if (outcome_kind == OutcomeKind::Continuous) return m == 2 ? 500 : 750;
  return m == 2 ? 1000 : 1500;
}

std::vector<int> SimSetting::signal_covariates() const {
  if (id == 4 || id == 7) return {0, 1, 2, 3};
  return {0, 1};
}

Eigen::MatrixXd generate_covariates(Eigen::Index n, int p, Rng& rng) {
  // AR(1) with var 4 and lag-one correlation 1/5; the recursion is the
  // Cholesky transport of the stated covariance.
  const double rho = 0.2;
  const double sd0 = 2.0;
  const double sd = 2.0 * std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = sd0 * rng.normal();
    for (int j = 1; j < p; ++j) X(i, j) = rho * X(i, j - 1) + sd * rng.normal();
  }
  return X;
}

Dataset generate(const SimSetting& setting, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.outcome_kind = setting.outcome_kind;
  ds.covariates = generate_covariates(n, setting.p, rng);
  ds.treatments.resize(n);
  ds.outcomes.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.treatments[i] = std::min(setting.m, 1 + static_cast<int>(rng.uniform() * setting.m));
    const double lp = setting.linear_predictor(ds.covariates.row(i), ds.treatments[i]);
    if (setting.outcome_kind == OutcomeKind::Binary) {
      ds.outcomes[i] = rng.uniform() < expit(lp) ? 1.0 : 0.0;
    } else {
      ds.outcomes[i] = lp + rng.normal();
    }
  }
  const RenderNames names = default_names(setting.p, setting.m);
  ds.covariate_names = names.covariates;
  ds.treatment_labels = names.treatments;
  ds.validate();
  return ds;
}

double true_value(const DecisionList& pi, const SimSetting& setting,
                  const Eigen::MatrixXd& test_X) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < test_X.rows(); ++i) {
    acc += setting.conditional_mean(test_X.row(i), pi.evaluate(test_X.row(i)));
  }
  return static_cast<double>(acc / test_X.rows());
}

double true_value_opt(const SimSetting& setting, const Eigen::MatrixXd& test_X) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < test_X.rows(); ++i) {
    acc += setting.conditional_mean(test_X.row(i), setting.pi_opt(test_X.row(i)));
  }
  return static_cast<double>(acc / test_X.rows());
}

namespace {

struct TestBench {
  Eigen::MatrixXd X;                  // test_n x p
  Eigen::MatrixXd cond_mean;          // test_n x m
  std::vector<std::int8_t> opt_rec;   // pi_opt per row
  double opt_value = 0.0;

  double value_of_recs(const std::vector<std::int8_t>& rec) const {
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < X.rows(); ++i) acc += cond_mean(i, rec[i] - 1);
    return static_cast<double>(acc / X.rows());
  }
};

TestBench make_bench(const SimSetting& setting, const SimConfig& cfg) {
  TestBench bench;
  Rng rng = Rng::keyed(cfg.seed, kTestStream);
  bench.X = generate_covariates(cfg.test_n, setting.p, rng);
  bench.cond_mean.resize(cfg.test_n, setting.m);
  bench.opt_rec.resize(cfg.test_n);
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
    for (int a = 1; a <= setting.m; ++a) {
      bench.cond_mean(i, a - 1) = setting.conditional_mean(bench.X.row(i), a);
    }
    bench.opt_rec[i] = static_cast<std::int8_t>(setting.pi_opt(bench.X.row(i)));
    acc += bench.cond_mean(i, bench.opt_rec[i] - 1);
  }
  bench.opt_value = static_cast<double>(acc / cfg.test_n);
  return bench;
}

FitSpec sim_fit_spec(const SimSetting& setting, const SimConfig& cfg, std::uint64_t rep) {
  FitSpec spec;
  spec.propensity.kind = PropensitySpec::Kind::SampleProportion;
  spec.outcome = OutcomeSpec::for_outcome(setting.outcome_kind, /*penalized=*/true);
  spec.outcome.cv_seed = cfg.seed * 1000003ULL + rep;
  spec.grid_policy.kind = GridPolicy::Kind::EmpiricalPercentiles;
  spec.grid_policy.percentile_count = cfg.grid_k > 0 ? cfg.grid_k : 9;
  spec.search = cfg.search;
  if (spec.search.min_region_size <= 0) {
    // Discard candidate clauses inducing partitions with too few subjects;
    // keeps fine cutoff grids from promoting noise slivers.
    spec.search.min_region_size =
        static_cast<int>(std::max<Eigen::Index>(25, (cfg.n + 9) / 10));
  }
  spec.run_mincost = cfg.mincost;
  return spec;
}

struct RepRow {
  bool ok = false;
  double dl_value = 0.0, dl_cost = 0.0, dl_tpr = 0.0, dl_fpr = 0.0, dl_best = 0.0;
  double dl_length = 0.0;
  double q_value = 0.0, q_cost = 0.0, q_best = 0.0;
  // consistency extras
  bool correct = false;
  double cut1 = 0.0, cut2 = 0.0;
};

void variable_selection(const DecisionList& pi, const std::vector<int>& signal, int p,
                        double* tpr, double* fpr) {
  const std::vector<int> used = pi.used_covariates();
  int tp = 0, fp = 0;
  for (int c : used) {
    if (std::find(signal.begin(), signal.end(), c) != signal.end()) {
      ++tp;
    } else {
      ++fp;
    }
  }
  *tpr = static_cast<double>(tp) / static_cast<double>(signal.size());
  const int noise = p - static_cast<int>(signal.size());
  *fpr = noise > 0 ? static_cast<double>(fp) / noise : 0.0;
}

}  // namespace

StudyResult run_study(const SimSetting& setting, const SimConfig& config,
                      EstimatorKind estimators) {
  if (config.reps < 1) throw_validation("reps must be >= 1");
  SimConfig cfg = config;
  if (cfg.n == 0) cfg.n = setting.default_n();
  const TestBench bench = make_bench(setting, cfg);
  const bool with_q = estimators == EstimatorKind::Both;

  std::vector<RepRow> rows(cfg.reps);
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < cfg.reps; ++rep) {
    try {
      const Dataset train = generate(setting, cfg.n, Rng::keyed(cfg.seed, rep).engine()());
      const FitSpec spec = sim_fit_spec(setting, cfg, rep);
      const FitResult fit = fit_pipeline(train, spec);
      RepRow row;
      row.ok = true;
      row.dl_length = fit.pi_hat.length();

      std::vector<std::int8_t> rec(cfg.test_n);
      for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
        rec[i] = static_cast<std::int8_t>(fit.pi_hat.evaluate(bench.X.row(i)));
      }
      row.dl_value = bench.value_of_recs(rec);
      row.dl_cost = empirical_cost(fit.pi_hat, bench.X, spec.costs);
      variable_selection(fit.pi_hat, setting.signal_covariates(), setting.p, &row.dl_tpr,
                         &row.dl_fpr);
      Eigen::Index agree = 0;
      for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
        if (rec[i] == bench.opt_rec[i]) ++agree;
      }
      row.dl_best = static_cast<double>(agree) / cfg.test_n;

      // Consistency extras: exact form recovery and the two cutoffs.
      const std::vector<int> used = fit.pi_hat.used_covariates();
      std::set<double> taus1, taus2;
      for (const Clause& cl : fit.pi_hat.clauses) {
        if (cl.condition.col1 == 0) taus1.insert(cl.condition.tau1);
        if (cl.condition.col1 == 1) taus2.insert(cl.condition.tau1);
        if (!cl.condition.is_single()) {
          if (cl.condition.col2 == 0) taus1.insert(cl.condition.tau2);
          if (cl.condition.col2 == 1) taus2.insert(cl.condition.tau2);
        }
      }
      row.correct = used == std::vector<int>{0, 1} && taus1.size() == 1 && taus2.size() == 1;
      if (row.correct) {
        row.cut1 = *taus1.begin();
        row.cut2 = *taus2.begin();
      }

      if (with_q) {
        // Parametric Q baseline: argmax_a of the fitted penalized regression.
        const FittedOutcome& q = fit.outcome;
        Eigen::Index qagree = 0;
        long double qacc = 0.0L;
        Eigen::VectorXd z(q.r);
        for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
          q.spec.z.apply(bench.X.row(i), z);
          int best = 1;
          double best_mu = q.mean_from_features(z, 1);
          for (int a = 2; a <= setting.m; ++a) {
            const double mu = q.mean_from_features(z, a);
            if (mu > best_mu) {
              best_mu = mu;
              best = a;
            }
          }
          qacc += bench.cond_mean(i, best - 1);
          if (best == bench.opt_rec[i]) ++qagree;
        }
        row.q_value = static_cast<double>(qacc / cfg.test_n);
        row.q_best = static_cast<double>(qagree) / cfg.test_n;
        double qcost = 0.0;
        for (int j = 0; j < setting.p; ++j) {
          bool used_j = false;
          for (int a = 0; a < setting.m; ++a) {
            if (q.beta(j + 1, a) != 0.0) used_j = true;
          }
          if (used_j) qcost += 1.0;
        }
        row.q_cost = qcost;
      }
      rows[rep] = row;
    } catch (const Error&) {
      rows[rep].ok = false;
    }
  }

  StudyResult out;
  out.setting = setting;
  out.n = cfg.n;
  out.reps = cfg.reps;
  out.opt_value = bench.opt_value;
  int ok = 0;
  EstimatorMetrics dl{}, q{};
  for (const RepRow& r : rows) {
    if (!r.ok) continue;
    ++ok;
    dl.mean_value += r.dl_value;
    dl.mean_cost += r.dl_cost;
    dl.tpr += r.dl_tpr;
    dl.fpr += r.dl_fpr;
    dl.pr_best += r.dl_best;
    dl.mean_length += r.dl_length;
    q.mean_value += r.q_value;
    q.mean_cost += r.q_cost;
    q.pr_best += r.q_best;
  }
  out.failures = cfg.reps - ok;
  if (out.failures > cfg.max_failure_rate * cfg.reps) {
    throw_fit("study aborted: " + std::to_string(out.failures) + " of " +
              std::to_string(cfg.reps) + " replicates failed");
  }
  const double denom = std::max(ok, 1);
  for (EstimatorMetrics* em : {&dl, &q}) {
    em->mean_value /= denom;
    em->mean_cost /= denom;
    em->tpr /= denom;
    em->fpr /= denom;
    em->pr_best /= denom;
    em->mean_length /= denom;
  }
  dl.loss = bench.opt_value - dl.mean_value;
  q.loss = bench.opt_value - q.mean_value;
  out.dl = dl;
  if (with_q) {
    q.tpr = 0.0;
    q.fpr = 0.0;
    out.qlinear = q;
  }
  return out;
}

int consistency_grid_k(Eigen::Index n) {
  // Percentile count growing like sqrt(n): grid quantization then contributes
  // O(1/n) to the squared cutoff error, matching the n * MSE ~ const regime.
  return std::clamp(static_cast<int>(std::ceil(1.2 * std::sqrt(static_cast<double>(n)))), 9, 400);
}

ConsistencyRow consistency_probe(const SimSetting& setting, Eigen::Index n,
                                 const SimConfig& config) {
  if (setting.id != 1 && setting.id != 5) {
    throw_validation("consistency probe needs a setting whose optimum is a decision list (I, V)");
  }
  SimConfig cfg = config;
  cfg.n = n;
  if (cfg.grid_k == 0) cfg.grid_k = consistency_grid_k(n);
  const double target1 = 1.0;
  const double target2 = setting.id == 1 ? -0.6 : -0.3;

  const TestBench bench = make_bench(setting, cfg);
  std::vector<RepRow> rows(cfg.reps);
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < cfg.reps; ++rep) {
    try {
      const Dataset train = generate(setting, cfg.n, Rng::keyed(cfg.seed, rep).engine()());
      const FitSpec spec = sim_fit_spec(setting, cfg, rep);
      const FitResult fit = fit_pipeline(train, spec);
      RepRow row;
      row.ok = true;
      std::set<double> taus1, taus2;
      for (const Clause& cl : fit.pi_hat.clauses) {
        if (cl.condition.col1 == 0) taus1.insert(cl.condition.tau1);
        if (cl.condition.col1 == 1) taus2.insert(cl.condition.tau1);
        if (!cl.condition.is_single()) {
          if (cl.condition.col2 == 0) taus1.insert(cl.condition.tau2);
          if (cl.condition.col2 == 1) taus2.insert(cl.condition.tau2);
        }
      }
      row.correct = fit.pi_hat.used_covariates() == std::vector<int>{0, 1} &&
                    taus1.size() == 1 && taus2.size() == 1;
      if (row.correct) {
        row.cut1 = *taus1.begin();
        row.cut2 = *taus2.begin();
      }
      std::vector<std::int8_t> rec(cfg.test_n);
      for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
        rec[i] = static_cast<std::int8_t>(fit.pi_hat.evaluate(bench.X.row(i)));
      }
      row.dl_value = bench.value_of_recs(rec);
      Eigen::Index agree = 0;
      for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
        if (rec[i] == bench.opt_rec[i]) ++agree;
      }
      row.dl_best = static_cast<double>(agree) / cfg.test_n;
      rows[rep] = row;
    } catch (const Error&) {
      rows[rep].ok = false;
    }
  }

  ConsistencyRow out;
  out.n = n;
  int ok = 0, correct = 0;
  double loss = 0.0, best = 0.0, mse1 = 0.0, mse2 = 0.0;
  for (const RepRow& r : rows) {
    if (!r.ok) continue;
    ++ok;
    loss += bench.opt_value - r.dl_value;
    best += r.dl_best;
    if (r.correct) {
      ++correct;
      mse1 += (r.cut1 - target1) * (r.cut1 - target1);
      mse2 += (r.cut2 - target2) * (r.cut2 - target2);
    }
  }
  out.failures = cfg.reps - ok;
  if (out.failures > cfg.max_failure_rate * cfg.reps) {
    throw_fit("consistency probe aborted: too many failed replicates");
  }
  out.loss = loss / std::max(ok, 1);
  out.pr_best = best / std::max(ok, 1);
  out.correct = static_cast<double>(correct) / std::max(ok, 1);
  out.n_mse1 = correct > 0 ? static_cast<double>(n) * mse1 / correct : 0.0;
  out.n_mse2 = correct > 0 ? static_cast<double>(n) * mse2 / correct : 0.0;
  return out;
}

std::vector<ConsistencyRow> consistency_probe(const SimSetting& setting,
                                              const std::vector<Eigen::Index>& n_grid,
                                              const SimConfig& config) {
  std::vector<ConsistencyRow> rows;
  for (Eigen::Index n : n_grid) rows.push_back(consistency_probe(setting, n, config));
  return rows;
}

std::vector<AlphaAgreement> alpha_sensitivity(const SimSetting& setting, const SimConfig& config,
                                              const std::vector<double>& gate_levels) {
  if (gate_levels.size() < 2) throw_validation("need at least two gate levels");
  SimConfig cfg = config;
  if (cfg.n == 0) cfg.n = setting.default_n();
  const TestBench bench = make_bench(setting, cfg);
  const std::size_t g = gate_levels.size();

  std::vector<std::vector<double>> agree(cfg.reps,
                                         std::vector<double>(g * g, 0.0));
  std::vector<char> ok(cfg.reps, 0);
#pragma omp parallel for schedule(dynamic)
  for (int rep = 0; rep < cfg.reps; ++rep) {
    try {
      const Dataset train = generate(setting, cfg.n, Rng::keyed(cfg.seed, rep).engine()());
      FitSpec spec = sim_fit_spec(setting, cfg, rep);
      const FittedPropensity prop = fit_propensity(train, spec.propensity);
      const FittedOutcome outc = fit_outcome(train, spec.outcome);
      const CutoffGrid grid = build_grid(train, spec.grid_policy);
      const BinIndex bins = bin(train, grid);
      const InfluenceContext ctx(train, prop, outc);
      std::vector<std::vector<std::int8_t>> recs(g);
      for (std::size_t gi = 0; gi < g; ++gi) {
        SearchConfig sc = spec.search;
        sc.alpha = 1.0 - gate_levels[gi];
        const SearchResult res = find_list(ctx, bins, grid, sc);
        recs[gi].resize(cfg.test_n);
        for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
          recs[gi][i] = static_cast<std::int8_t>(res.list.evaluate(bench.X.row(i)));
        }
      }
      for (std::size_t g1 = 0; g1 < g; ++g1) {
        for (std::size_t g2 = g1 + 1; g2 < g; ++g2) {
          Eigen::Index same = 0;
          for (Eigen::Index i = 0; i < cfg.test_n; ++i) {
            if (recs[g1][i] == recs[g2][i]) ++same;
          }
          agree[rep][g1 * g + g2] = static_cast<double>(same) / cfg.test_n;
        }
      }
      ok[rep] = 1;
    } catch (const Error&) {
      ok[rep] = 0;
    }
  }

  int used = 0;
  for (char c : ok) used += c;
  if (cfg.reps - used > cfg.max_failure_rate * cfg.reps) {
    throw_fit("alpha sensitivity aborted: too many failed replicates");
  }
  std::vector<AlphaAgreement> out;
  for (std::size_t g1 = 0; g1 < g; ++g1) {
    for (std::size_t g2 = g1 + 1; g2 < g; ++g2) {
      double s = 0.0;
      for (int rep = 0; rep < cfg.reps; ++rep) {
        if (ok[rep]) s += agree[rep][g1 * g + g2];
      }
      out.push_back({gate_levels[g1], gate_levels[g2], s / std::max(used, 1)});
    }
  }
  return out;
}

std::string StudyResult::to_json(int indent) const {
  nlohmann::json doc;
  doc["setting"] = setting.roman();
  doc["m"] = setting.m;
  doc["p"] = setting.p;
  doc["outcome"] = setting.outcome_kind == OutcomeKind::Binary ? "binary" : "continuous";
  doc["n"] = static_cast<std::int64_t>(n);
  doc["reps"] = reps;
  doc["failures"] = failures;
  doc["opt_value"] = opt_value;
  auto emit = [](const EstimatorMetrics& em) {
    return nlohmann::json{{"value", em.mean_value},   {"cost", em.mean_cost},
                          {"tpr", em.tpr},            {"fpr", em.fpr},
                          {"loss", em.loss},          {"pr_best", em.pr_best},
                          {"mean_length", em.mean_length}};
  };
  doc["decision_list"] = emit(dl);
  if (qlinear) doc["q_linear"] = emit(*qlinear);
  return doc.dump(indent);
}

}  // namespace declist
