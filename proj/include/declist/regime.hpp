#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "declist/dataset.hpp"

namespace declist {

enum class Sense : int { Le, Gt };

// Single-covariate threshold test x_j <= tau or x_j > tau (0-based column).
struct Atom {
  int col = 0;
  double threshold = 0.0;
  Sense sense = Sense::Le;

  bool contains(double x) const { return sense == Sense::Le ? x <= threshold : x > threshold; }
  Atom negated() const { return {col, threshold, sense == Sense::Le ? Sense::Gt : Sense::Le}; }
  bool operator==(const Atom&) const = default;
};

// One of the ten admissible condition shapes. Forms 1 and 10 test a single
// covariate; 2-5 are conjunctions and 6-9 disjunctions of two atoms with
// col1 < col2 (canonical order).
//
//   [1] x1 <= t1            [10] x1 > t1
//   [2] x1 <= t1 and x2 <= t2   [9] x1 > t1 or x2 > t2
//   [3] x1 <= t1 and x2 > t2    [8] x1 > t1 or x2 <= t2
//   [4] x1 > t1 and x2 <= t2    [7] x1 <= t1 or x2 > t2
//   [5] x1 > t1 and x2 > t2     [6] x1 <= t1 or x2 <= t2
struct Condition {
  int form = 1;
  int col1 = 0;
  double tau1 = 0.0;
  int col2 = 0;      // unused for forms 1, 10
  double tau2 = 0.0;

  bool is_single() const { return form == 1 || form == 10; }
  bool is_conjunction() const { return form >= 2 && form <= 5; }

  Atom atom1() const;
  Atom atom2() const;  // forms 2..9 only

  bool contains(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  bool contains(double x1, double x2) const;

  bool operator==(const Condition&) const = default;
};

Condition make_single(int col, double tau, Sense sense);
// Builds the canonical two-atom condition (columns reordered so col1 < col2).
// The two atoms must reference distinct covariates.
Condition make_pair(Atom a, Atom b, bool conjunction);

// Pointwise complement; closed over the ten forms
// (1<->10, 2<->9, 3<->8, 4<->7, 5<->6).
Condition negate(const Condition& c);

struct Clause {
  Condition condition;
  int action = 1;  // 1-based treatment arm
  bool operator==(const Clause&) const = default;
};

// Ordered if-then clauses plus a default arm; first true clause fires.
struct DecisionList {
  std::vector<Clause> clauses;
  int default_action = 1;
  std::optional<double> estimated_value;  // provenance metadata, not identity

  int length() const { return static_cast<int>(clauses.size()); }

  int evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::vector<int> evaluate_all(const Eigen::MatrixXd& covariates) const;

  // 0-based indices of the distinct covariates appearing in the list,
  // ascending.
  std::vector<int> used_covariates() const;

  bool same_rules(const DecisionList& other) const {
    return clauses == other.clauses && default_action == other.default_action;
  }
};

// Per-covariate measurement costs; the cost of reaching clause l is the cost
// of the distinct covariates in clauses 1..l.
struct CostModel {
  std::vector<double> covariate_costs;  // empty => unit cost for every covariate

  double cost_of(int col) const {
    return covariate_costs.empty() ? 1.0 : covariate_costs[col];
  }
};

// Cumulative costs N_1..N_L of checking the first l clauses (N_0 = 0).
std::vector<double> prefix_costs(const DecisionList& pi, const CostModel& costs);

// Empirical expected measurement cost: subjects caught by clause l incur N_l,
// default-region subjects incur N_L.
double empirical_cost(const DecisionList& pi, const Eigen::MatrixXd& covariates,
                      const CostModel& costs = {});

// Rendering context mapping internal indices back to user-facing names.
struct RenderNames {
  std::vector<std::string> covariates;  // size >= p referenced by the list
  std::vector<std::string> treatments;  // size >= m
};

RenderNames default_names(int p, int m);
inline RenderNames names_from(const Dataset& ds) {
  return {ds.covariate_names, ds.treatment_labels};
}

std::string render_condition(const Condition& c, const RenderNames& names);
// Clinical if/else-if text: "If c1 then a1; else if ...; else a0."; a constant list
// renders as "Everyone a0."
std::string render(const DecisionList& pi, const RenderNames& names);
// Inverse of render; names are required to resolve covariates and treatments.
DecisionList parse_rendered(const std::string& text, const RenderNames& names);

// Stable JSON regime format (see README): clauses as
// {form, atoms:[{col,op,threshold}], action}.
std::string regime_to_json(const DecisionList& pi, const RenderNames& names, int indent = 2);
DecisionList regime_from_json(const std::string& json_text, RenderNames* names_out = nullptr);

}  // namespace declist
