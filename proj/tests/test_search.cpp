#include <doctest.h>

#include <omp.h>

#include "declist/rng.hpp"
#include "declist/search.hpp"
#include "declist/simlab.hpp"

using namespace declist;

namespace {

// Random clause-search instance: covariates, explicit grid, weighted xi.
struct Instance {
  Eigen::MatrixXd X;
  CutoffGrid grid;
  BinIndex bins;
  Eigen::MatrixXd xi;
  std::vector<std::int32_t> active;
};

Instance random_instance(Rng& rng, int n, int p, int s, int m) {
  Instance inst;
  inst.X.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) inst.X(i, j) = rng.normal();
  }
  GridPolicy policy;
  policy.kind = GridPolicy::Kind::Explicit;
  for (int j = 0; j < p; ++j) {
    std::vector<double> cuts;
    for (int t = 0; t < s; ++t) {
      // Occasionally reuse a data value so ties get exercised.
      cuts.push_back(rng.uniform() < 0.3 ? inst.X(rng.uniform_int(0, n - 1), j)
                                         : rng.normal());
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    // Keep cutoffs within the data range (grid contract).
    const double lo = inst.X.col(j).minCoeff(), hi = inst.X.col(j).maxCoeff();
    for (double& c : cuts) c = std::clamp(c, lo, hi);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    policy.explicit_cutoffs.push_back(cuts);
  }
  inst.grid = build_grid(inst.X, policy);
  inst.bins = bin(inst.X, inst.grid);
  inst.xi.resize(n, m);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < m; ++a) inst.xi(i, a) = rng.normal();
  }
  inst.active.resize(n);
  for (int i = 0; i < n; ++i) inst.active[i] = i;
  return inst;
}

// Builds a fitted context over a dataset whose xi values the tests control
// only loosely; used for the whole-search oracle and property checks.
struct FittedProblem {
  Dataset data;
  FittedPropensity prop;
  FittedOutcome outcome;
  CutoffGrid grid;
  BinIndex bins;
};

FittedProblem random_problem(Rng& rng, int n, int p, int s, int m) {
  FittedProblem fp;
  fp.data.covariates.resize(n, p);
  fp.data.treatments.resize(n);
  fp.data.outcomes.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) fp.data.covariates(i, j) = rng.normal();
    fp.data.treatments[i] = 1 + i % m;  // every arm populated
    fp.data.outcomes[i] = rng.normal() + 0.8 * fp.data.covariates(i, 0) *
                                             (fp.data.treatments[i] == 1 ? 1.0 : -1.0);
  }
  const RenderNames names = default_names(p, m);
  fp.data.covariate_names = names.covariates;
  fp.data.treatment_labels = names.treatments;
  fp.prop = fit_propensity(fp.data, PropensitySpec{});
  OutcomeSpec ospec;
  ospec.z = FeatureMap::intercept_only();
  fp.outcome = fit_outcome(fp.data, ospec);
  GridPolicy gp;
  gp.percentile_count = s;
  fp.grid = build_grid(fp.data, gp);
  fp.bins = bin(fp.data, fp.grid);
  return fp;
}

}  // namespace

TEST_CASE("separable one-covariate problem picks form [1] at the separating cutoff") {
  // xi favors arm 1 exactly when x1 <= 0; the grid contains 0.
  const int n = 60;
  Rng rng(3);
  Instance inst;
  inst.X.resize(n, 1);
  inst.xi.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    inst.X(i, 0) = rng.normal();
    const bool low = inst.X(i, 0) <= 0.0;
    inst.xi(i, 0) = low ? 1.0 : 0.0;
    inst.xi(i, 1) = low ? 0.0 : 1.0;
  }
  GridPolicy policy;
  policy.kind = GridPolicy::Kind::Explicit;
  policy.explicit_cutoffs = {{-0.5, 0.0, 0.5}};
  inst.grid = build_grid(inst.X, policy);
  inst.bins = bin(inst.X, inst.grid);
  inst.active.resize(n);
  for (int i = 0; i < n; ++i) inst.active[i] = i;

  const auto best = best_clause(inst.active, inst.xi, inst.bins, inst.grid, SearchConfig{});
  REQUIRE(best.has_value());
  CHECK(best->condition.form == 1);
  CHECK(best->condition.col1 == 0);
  CHECK(best->condition.tau1 == 0.0);
  CHECK(best->in_action == 1);
  CHECK(best->out_action == 2);
  CHECK(best->objective == doctest::Approx(n));
}

TEST_CASE("fast kernel equals the exhaustive reference on random instances") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = rng.uniform_int(5, 40);
    const int p = rng.uniform_int(1, 3);
    const int s = rng.uniform_int(1, 3);
    const int m = rng.uniform_int(2, 3);
    Instance inst = random_instance(rng, n, p, s, m);
    SearchConfig cfg;
    cfg.min_region_size = rng.uniform_int(0, 2);
    const auto fast = best_clause(inst.active, inst.xi, inst.bins, inst.grid, cfg);
    const auto ref = best_clause_reference(inst.active, inst.xi, inst.bins, inst.grid, cfg);
    REQUIRE(fast.has_value() == ref.has_value());
    if (!fast) continue;
    CHECK(fast->objective == doctest::Approx(ref->objective).epsilon(1e-12));
    // Identical recommendation partition over the active subjects.
    for (std::int32_t i : inst.active) {
      const bool in_fast = fast->condition.contains(inst.X.row(i));
      const bool in_ref = ref->condition.contains(inst.X.row(i));
      const int rec_fast = in_fast ? fast->in_action : fast->out_action;
      const int rec_ref = in_ref ? ref->in_action : ref->out_action;
      CHECK(rec_fast == rec_ref);
    }
  }
}

TEST_CASE("single-atom forms are enumerated once, not as degenerate pairs") {
  // With p = 1 no pair exists, so any winning condition must be form 1 or 10;
  // the reference enumerates singles separately and must agree.
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    Instance inst = random_instance(rng, 25, 1, 3, 2);
    const auto fast = best_clause(inst.active, inst.xi, inst.bins, inst.grid, SearchConfig{});
    const auto ref = best_clause_reference(inst.active, inst.xi, inst.bins, inst.grid,
                                           SearchConfig{});
    REQUIRE(fast.has_value());
    CHECK(fast->condition.is_single());
    CHECK(ref->condition.is_single());
    CHECK(fast->objective == doctest::Approx(ref->objective).epsilon(1e-12));
    for (std::int32_t i : inst.active) {
      const int rec_fast =
          fast->condition.contains(inst.X.row(i)) ? fast->in_action : fast->out_action;
      const int rec_ref =
          ref->condition.contains(inst.X.row(i)) ? ref->in_action : ref->out_action;
      CHECK(rec_fast == rec_ref);
    }
  }
}

TEST_CASE("null treatment effect: the first gate fires and a constant list is returned") {
  Rng rng(23);
  FittedProblem fp = random_problem(rng, 120, 3, 3, 2);
  // Constant outcomes make every pseudo-outcome equal (residuals vanish and
  // the per-arm means coincide), so the xi columns are exactly identical.
  for (int i = 0; i < 120; ++i) fp.data.outcomes[i] = 1.75;
  fp.prop = fit_propensity(fp.data, PropensitySpec{});
  OutcomeSpec ospec;
  ospec.z = FeatureMap::intercept_only();
  fp.outcome = fit_outcome(fp.data, ospec);
  InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
  CHECK(ctx.xi().xi.col(0).isApprox(ctx.xi().xi.col(1)));
  const SearchResult res = find_list(ctx, fp.bins, fp.grid, SearchConfig{});
  CHECK(res.list.length() == 0);
  CHECK(res.value == doctest::Approx(1.75));
  REQUIRE(!res.trace.nodes.empty());
  CHECK(res.trace.nodes[0].stop == "variance-gate");
  CHECK(res.trace.nodes[0].delta == doctest::Approx(0.0));
}

TEST_CASE("whole-search oracle: fast and reference kernels produce equal values") {
  Rng rng(29);
  for (int trial = 0; trial < 15; ++trial) {
    FittedProblem fp = random_problem(rng, rng.uniform_int(20, 40), rng.uniform_int(2, 3),
                                      rng.uniform_int(2, 3), rng.uniform_int(2, 3));
    InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
    SearchConfig cfg;
    cfg.l_max = 2;
    const SearchResult fast = find_list(ctx, fp.bins, fp.grid, cfg);
    cfg.use_reference_kernel = true;
    const SearchResult ref = find_list(ctx, fp.bins, fp.grid, cfg);
    CHECK(fast.value == doctest::Approx(ref.value).epsilon(1e-10));
    CHECK(fast.list.length() == ref.list.length());
  }
}

TEST_CASE("L_max = 0 degenerates to the best constant regime") {
  Rng rng(31);
  FittedProblem fp = random_problem(rng, 80, 2, 3, 3);
  InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
  SearchConfig cfg;
  cfg.l_max = 0;
  const SearchResult res = find_list(ctx, fp.bins, fp.grid, cfg);
  CHECK(res.list.length() == 0);
  CHECK(res.list.default_action == res.trace.best_constant_action);
  CHECK(res.value == doctest::Approx(res.trace.constant_value));
}

TEST_CASE("an L_max=1 list never beats the L_max=10 list on the same data") {
  Rng rng(37);
  for (int trial = 0; trial < 8; ++trial) {
    FittedProblem fp = random_problem(rng, 150, 3, 4, 2);
    InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
    SearchConfig narrow;
    narrow.l_max = 1;
    SearchConfig wide;
    wide.l_max = 10;
    const double v1 = find_list(ctx, fp.bins, fp.grid, narrow).value;
    const double v10 = find_list(ctx, fp.bins, fp.grid, wide).value;
    CHECK(v1 <= v10 + 1e-12);
  }
}

TEST_CASE("trace properties: two children per expansion, recorded values, monotone deltas") {
  Rng rng(41);
  FittedProblem fp = random_problem(rng, 200, 3, 4, 2);
  InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
  const SearchResult res = find_list(ctx, fp.bins, fp.grid, SearchConfig{});
  const PseudoOutcomeMatrix& xi = ctx.xi();
  for (const auto& [pi, v] : res.trace.finals) {
    CHECK(value(xi, pi, fp.data).require_finite() == doctest::Approx(v).epsilon(1e-12));
  }
  int expanded = 0;
  for (const TraceNode& t : res.trace.nodes) {
    if (t.stop.empty()) {
      // expanded node: exactly two children recorded
      CHECK(t.child_keep >= 0);
      CHECK(t.child_negated >= 0);
      CHECK(t.child_keep != t.child_negated);
      CHECK(t.delta >= t.gate);
      CHECK(t.delta > 0.0);
      ++expanded;
    }
  }
  // chosen final is the argmax with first-encountered tie-break
  double best = res.trace.finals[res.trace.chosen_final].second;
  for (int i = 0; i < static_cast<int>(res.trace.finals.size()); ++i) {
    if (i < res.trace.chosen_final) CHECK(res.trace.finals[i].second < best);
    CHECK(res.trace.finals[i].second <= best + 1e-15);
  }
}

TEST_CASE("search is deterministic and thread-count independent") {
  Rng rng(43);
  FittedProblem fp = random_problem(rng, 300, 4, 5, 2);
  InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
  const RenderNames names = default_names(4, 2);
  const SearchResult a = find_list(ctx, fp.bins, fp.grid, SearchConfig{});
  const SearchResult b = find_list(ctx, fp.bins, fp.grid, SearchConfig{});
  CHECK(render(a.list, names) == render(b.list, names));
  CHECK(a.trace.to_json(names) == b.trace.to_json(names));

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const SearchResult serial = find_list(ctx, fp.bins, fp.grid, SearchConfig{});
  omp_set_num_threads(saved);
  CHECK(render(serial.list, names) == render(a.list, names));
  CHECK(serial.value == a.value);
  CHECK(serial.trace.to_json(names) == a.trace.to_json(names));
}

TEST_CASE("setting-I search recovers the signal covariates and cutoffs") {
  const SimSetting setting = SimSetting::make(1, OutcomeKind::Continuous, 10);
  int hits = 0;
  for (int rep = 0; rep < 3; ++rep) {
    const Dataset ds = generate(setting, 10000, 515 + rep);
    FitSpec spec;
    spec.outcome = OutcomeSpec::for_outcome(OutcomeKind::Continuous, true);
    spec.grid_policy.percentile_count = 120;
    spec.search.min_region_size = 1000;
    const FitResult fit = fit_pipeline(ds, spec);
    const auto used = fit.pi_hat.used_covariates();
    if (used != std::vector<int>{0, 1}) continue;
    double tau1 = 0, tau2 = 0;
    for (const Clause& cl : fit.pi_hat.clauses) {
      if (cl.condition.col1 == 0) tau1 = cl.condition.tau1;
      if (cl.condition.col1 == 1) tau2 = cl.condition.tau1;
      if (!cl.condition.is_single()) {
        if (cl.condition.col2 == 0) tau1 = cl.condition.tau2;
        if (cl.condition.col2 == 1) tau2 = cl.condition.tau2;
      }
    }
    if (std::abs(tau1 - 1.0) < 0.15 && std::abs(tau2 + 0.6) < 0.15) ++hits;
  }
  CHECK(hits == 3);
}

TEST_CASE("all candidates filtered: search falls back to the constant list") {
  Rng rng(61);
  FittedProblem fp = random_problem(rng, 50, 2, 3, 2);
  InfluenceContext ctx(fp.data, fp.prop, fp.outcome);
  SearchConfig cfg;
  cfg.min_region_size = 51;  // nothing can satisfy both sides
  const SearchResult res = find_list(ctx, fp.bins, fp.grid, cfg);
  CHECK(res.list.length() == 0);
  CHECK(res.list.default_action == res.trace.best_constant_action);
  REQUIRE(!res.trace.nodes.empty());
  CHECK(res.trace.nodes[0].stop == "no-admissible-clause");
}
