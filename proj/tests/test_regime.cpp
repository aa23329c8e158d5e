#include <doctest.h>

#include "declist/regime.hpp"
#include "declist/rng.hpp"

using namespace declist;

namespace {

Eigen::RowVectorXd point(std::initializer_list<double> vals) {
  Eigen::RowVectorXd x(static_cast<Eigen::Index>(vals.size()));
  Eigen::Index i = 0;
  for (double v : vals) x[i++] = v;
  return x;
}

Condition random_condition(Rng& rng, int p) {
  const int form = rng.uniform_int(1, 10);
  const int j1 = rng.uniform_int(0, p - 2);
  const double t1 = rng.normal();
  if (form == 1 || form == 10) {
    return make_single(j1, t1, form == 1 ? Sense::Le : Sense::Gt);
  }
  Condition c;
  c.form = form;
  c.col1 = j1;
  c.tau1 = t1;
  c.col2 = rng.uniform_int(j1 + 1, p - 1);
  c.tau2 = rng.normal();
  return c;
}

DecisionList random_list(Rng& rng, int p, int m, int len) {
  DecisionList pi;
  for (int l = 0; l < len; ++l) {
    pi.clauses.push_back(Clause{random_condition(rng, p), rng.uniform_int(1, m)});
  }
  pi.default_action = rng.uniform_int(1, m);
  return pi;
}

}  // namespace

TEST_CASE("constant list recommends the default everywhere") {
  DecisionList pi;
  pi.default_action = 2;
  CHECK(pi.evaluate(point({-10, 3})) == 2);
  CHECK(pi.evaluate(point({10, -3})) == 2);
}

TEST_CASE("first-true-clause semantics on a two-clause list") {
  // If x1 > t1 then a1; else if x2 > t2 then a2; else a0.
  const double t1 = 0.5, t2 = -0.25;
  DecisionList pi;
  pi.clauses.push_back(Clause{make_single(0, t1, Sense::Gt), 1});
  pi.clauses.push_back(Clause{make_single(1, t2, Sense::Gt), 2});
  pi.default_action = 3;
  CHECK(pi.evaluate(point({t1 + 1, t2 - 1})) == 1);
  CHECK(pi.evaluate(point({t1 - 1, t2 + 1})) == 2);
  CHECK(pi.evaluate(point({t1 - 1, t2 - 1})) == 3);
}

TEST_CASE("list evaluation equals region decomposition on random points") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const DecisionList pi = random_list(rng, 4, 3, rng.uniform_int(0, 3));
    for (int k = 0; k < 500; ++k) {
      Eigen::RowVectorXd x(4);
      for (int j = 0; j < 4; ++j) x[j] = rng.normal();
      // Region decomposition: R_l = T(c_l) \ union of earlier T's.
      int expected = pi.default_action;
      for (int l = 0; l < pi.length(); ++l) {
        bool in_earlier = false;
        for (int e = 0; e < l; ++e) in_earlier |= pi.clauses[e].condition.contains(x);
        if (!in_earlier && pi.clauses[l].condition.contains(x)) {
          expected = pi.clauses[l].action;
          break;
        }
      }
      CHECK(pi.evaluate(x) == expected);
    }
  }
}

TEST_CASE("negation maps forms as 1<->10, 2<->9, 3<->8, 4<->7, 5<->6") {
  // Paper example: "x1 <= t1 and x2 <= t2" negates to "x1 > t1 or x2 > t2".
  Condition c;
  c.form = 2;
  c.col1 = 0;
  c.tau1 = 1.0;
  c.col2 = 1;
  c.tau2 = 2.0;
  const Condition nc = negate(c);
  CHECK(nc.form == 9);
  CHECK(nc.col1 == 0);
  CHECK(nc.tau1 == 1.0);
  CHECK(negate(nc) == c);

  const int expected_neg[11] = {0, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  for (int form = 1; form <= 10; ++form) {
    Condition base = c;
    base.form = form;
    CHECK(negate(base).form == expected_neg[form]);
    CHECK(negate(negate(base)) == base);
  }
}

TEST_CASE("negation is a pointwise complement for all ten forms") {
  Rng rng(17);
  for (int form = 1; form <= 10; ++form) {
    Condition c;
    c.form = form;
    c.col1 = 0;
    c.tau1 = 0.3;
    c.col2 = 1;
    c.tau2 = -0.8;
    const Condition nc = negate(c);
    for (int k = 0; k < 1000; ++k) {
      const Eigen::RowVectorXd x = point({rng.normal(), rng.normal()});
      CHECK(c.contains(x) != nc.contains(x));
    }
  }
}

TEST_CASE("negation-swap representations recommend identically") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const Condition c = random_condition(rng, 3);
    const int a1 = rng.uniform_int(1, 3), a2 = rng.uniform_int(1, 3);
    DecisionList pi, swapped;
    pi.clauses.push_back(Clause{c, a1});
    pi.default_action = a2;
    swapped.clauses.push_back(Clause{negate(c), a2});
    swapped.default_action = a1;
    for (int k = 0; k < 200; ++k) {
      const Eigen::RowVectorXd x = point({rng.normal(), rng.normal(), rng.normal()});
      CHECK(pi.evaluate(x) == swapped.evaluate(x));
    }
  }
}

TEST_CASE("empirical cost: constant list costs zero") {
  DecisionList pi;
  pi.default_action = 1;
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(50, 3);
  CHECK(empirical_cost(pi, X) == 0.0);
}

TEST_CASE("single-covariate first clause is cheaper than a two-covariate one") {
  // Same recommendations, two representations: {x1 > t1 -> a1; x2 > t2 -> a2; a0} vs
  // {x1 <= t1 and x2 > t2 -> a2; x1 > t1 -> a1; a0}.
  Rng rng(5);
  Eigen::MatrixXd X(400, 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
  }
  DecisionList cheap;
  cheap.clauses.push_back(Clause{make_single(0, 0.0, Sense::Gt), 1});
  cheap.clauses.push_back(Clause{make_single(1, 0.0, Sense::Gt), 2});
  cheap.default_action = 3;

  DecisionList expensive;
  expensive.clauses.push_back(
      Clause{make_pair({0, 0.0, Sense::Le}, {1, 0.0, Sense::Gt}, true), 2});
  expensive.clauses.push_back(Clause{make_single(0, 0.0, Sense::Gt), 1});
  expensive.default_action = 3;

  // Same recommendations, different cost.
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    CHECK(cheap.evaluate(X.row(i)) == expensive.evaluate(X.row(i)));
  }
  const double n_cheap = empirical_cost(cheap, X);
  const double n_exp = empirical_cost(expensive, X);
  const double p_first = (X.col(0).array() > 0.0).cast<double>().mean();
  CHECK(n_cheap == doctest::Approx(1.0 * p_first + 2.0 * (1.0 - p_first)));
  CHECK(n_exp == doctest::Approx(2.0));
  CHECK(n_cheap <= n_exp);
}

TEST_CASE("empirical cost equals the per-subject accumulation oracle") {
  Rng rng(31);
  Eigen::MatrixXd X(2000, 4);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < 4; ++j) X(i, j) = rng.normal();
  }
  CostModel costs;
  costs.covariate_costs = {1.0, 2.5, 0.5, 3.0};
  for (int trial = 0; trial < 10; ++trial) {
    const DecisionList pi = random_list(rng, 4, 2, rng.uniform_int(1, 4));
    const auto nl = prefix_costs(pi, costs);
    double oracle = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      int caught = pi.length();
      for (int l = 0; l < pi.length(); ++l) {
        if (pi.clauses[l].condition.contains(X.row(i))) {
          caught = l + 1;
          break;
        }
      }
      oracle += nl[caught];
    }
    oracle /= static_cast<double>(X.rows());
    CHECK(empirical_cost(pi, X, costs) == doctest::Approx(oracle).epsilon(1e-9));
    // Short-circuit bound: never more than measuring everything in the list.
    CHECK(empirical_cost(pi, X, costs) <= nl[pi.length()] + 1e-12);
  }
}

TEST_CASE("rendering: constant list and round trip") {
  const RenderNames names{{"age", "PR level"}, {"chemo", "chemo+tam"}};
  DecisionList pi;
  pi.default_action = 2;
  CHECK(render(pi, names) == "Everyone chemo+tam.");
  CHECK(parse_rendered(render(pi, names), names).same_rules(pi));

  pi.clauses.push_back(Clause{make_pair({0, 50.0, Sense::Le}, {1, 10.0, Sense::Le}, true), 1});
  const std::string text = render(pi, names);
  CHECK(text == "If age <= 50 and PR level <= 10 then chemo;\nelse chemo+tam.");
  CHECK(parse_rendered(text, names).same_rules(pi));
}

TEST_CASE("render/parse and JSON round-trips preserve random lists exactly") {
  Rng rng(47);
  const RenderNames names = default_names(5, 3);
  for (int trial = 0; trial < 60; ++trial) {
    DecisionList pi = random_list(rng, 5, 3, rng.uniform_int(0, 4));
    CHECK(parse_rendered(render(pi, names), names).same_rules(pi));
    const DecisionList back = regime_from_json(regime_to_json(pi, names));
    CHECK(back.same_rules(pi));
  }
}

TEST_CASE("appending a clause over already-measured covariates never raises a subject's cost") {
  Rng rng(53);
  Eigen::MatrixXd X(300, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
  }
  DecisionList pi;
  pi.clauses.push_back(Clause{make_pair({0, 0.0, Sense::Le}, {1, 0.5, Sense::Gt}, false), 1});
  pi.default_action = 2;
  DecisionList longer = pi;
  longer.clauses.push_back(Clause{make_single(1, -0.5, Sense::Le), 2});

  const auto nl_short = prefix_costs(pi, {});
  const auto nl_long = prefix_costs(longer, {});
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    int caught_s = pi.length();
    for (int l = 0; l < pi.length(); ++l) {
      if (pi.clauses[l].condition.contains(X.row(i))) {
        caught_s = l + 1;
        break;
      }
    }
    int caught_l = longer.length();
    for (int l = 0; l < longer.length(); ++l) {
      if (longer.clauses[l].condition.contains(X.row(i))) {
        caught_l = l + 1;
        break;
      }
    }
    CHECK(nl_long[caught_l] <= nl_short[caught_s] + 1e-12);
  }
}

TEST_CASE("malformed regime JSON is rejected with clear errors") {
  const RenderNames names = default_names(2, 2);
  DecisionList pi;
  pi.clauses.push_back(Clause{make_pair({0, 1.0, Sense::Le}, {1, 2.0, Sense::Gt}, true), 1});
  pi.default_action = 2;
  const std::string good = regime_to_json(pi, names);

  // Inconsistent form tag vs atoms.
  std::string bad = good;
  const auto pos = bad.find("\"form\": 3");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 9, "\"form\": 5");
  CHECK_THROWS(regime_from_json(bad));

  // Unknown treatment label and syntactically broken documents.
  std::string bad2 = good;
  const auto dpos = bad2.find("\"default\": \"2\"");
  REQUIRE(dpos != std::string::npos);
  bad2.replace(dpos, 14, "\"default\": \"9\"");
  CHECK_THROWS(regime_from_json(bad2));
  CHECK_THROWS(regime_from_json("{not json"));
}
