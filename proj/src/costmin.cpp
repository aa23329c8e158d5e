#include "declist/costmin.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "declist/error.hpp"

namespace declist {

namespace {

struct PoolAtom {
  int col = 0;
  double tau = 0.0;  // stored in "<=" orientation
};

// Candidate clause over the atom pool, with precomputed truth values.
struct PoolCondition {
  Condition condition;
  std::vector<char> truth;  // per subject
  std::string text;         // used only to fix a deterministic enumeration order
};

class MinCostSearch {
public:
  MinCostSearch(const DecisionList& pi_tilde, const Eigen::MatrixXd& X, const CostModel& costs,
                const MinCostOptions& opt)
      : X_(X), costs_(costs), opt_(opt), n_(X.rows()) {
    target_ = pi_tilde.evaluate_all(X);
    arms_ = pi_tilde.default_action;
    for (const Clause& cl : pi_tilde.clauses) arms_ = std::max(arms_, cl.action);
    for (int a : target_) arms_ = std::max(arms_, a);
    fallback_default_ = pi_tilde.default_action;
    build_pool(pi_tilde);
  }

  MinCostResult run(const DecisionList& pi_tilde) {
    // pi_tilde itself is feasible, so its cost is a valid initial incumbent;
    // ties at exactly this cost keep the input representation.
    result_.cost = empirical_cost(pi_tilde, X_, costs_);
    result_.list = pi_tilde;
    std::vector<std::int32_t> all(n_);
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(n_); ++i) all[i] = i;
    Frame root;
    root.remaining = std::move(all);
    recurse(root);
    MinCostResult out = std::move(result_);
    out.nodes_visited = nodes_;
    return out;
  }

private:
  struct Frame {
    std::vector<Clause> clauses;
    std::vector<std::int32_t> remaining;
    std::vector<std::int64_t> caught;     // per level
    std::vector<double> level_cost;       // N_1..N_j
    std::set<int> used_cols;
  };

  void build_pool(const DecisionList& pi_tilde) {
    // K <= 2L distinct atoms, deduplicated by (covariate, threshold).
    std::vector<PoolAtom> atoms;
    auto add_atom = [&](int col, double tau) {
      for (const PoolAtom& a : atoms) {
        if (a.col == col && a.tau == tau) return;
      }
      atoms.push_back({col, tau});
    };
    for (const Clause& cl : pi_tilde.clauses) {
      add_atom(cl.condition.col1, cl.condition.tau1);
      if (!cl.condition.is_single()) add_atom(cl.condition.col2, cl.condition.tau2);
    }

    RenderNames names = default_names(static_cast<int>(X_.cols()), arms_);
    auto add_condition = [&](const Condition& c) {
      PoolCondition pc;
      pc.condition = c;
      pc.text = render_condition(c, names);
      pc.truth.resize(n_);
      for (Eigen::Index i = 0; i < n_; ++i) pc.truth[i] = c.contains(X_.row(i)) ? 1 : 0;
      pool_.push_back(std::move(pc));
    };

    for (const PoolAtom& a : atoms) {
      add_condition(make_single(a.col, a.tau, Sense::Le));
      add_condition(make_single(a.col, a.tau, Sense::Gt));
    }
    for (std::size_t k1 = 0; k1 < atoms.size(); ++k1) {
      for (std::size_t k2 = k1 + 1; k2 < atoms.size(); ++k2) {
        if (atoms[k1].col == atoms[k2].col) continue;  // pair forms need j1 < j2
        for (int s1 = 0; s1 < 2; ++s1) {
          for (int s2 = 0; s2 < 2; ++s2) {
            for (int conj = 0; conj < 2; ++conj) {
              const Atom a1{atoms[k1].col, atoms[k1].tau, s1 ? Sense::Gt : Sense::Le};
              const Atom a2{atoms[k2].col, atoms[k2].tau, s2 ? Sense::Gt : Sense::Le};
              add_condition(make_pair(a1, a2, conj == 1));
            }
          }
        }
      }
    }
    std::sort(pool_.begin(), pool_.end(),
              [](const PoolCondition& a, const PoolCondition& b) { return a.text < b.text; });
    // Drop conditions that are sample-indistinguishable from an earlier one
    // and use the same covariates: they catch the same subjects at the same
    // cost, so only the lexicographically first can matter.
    std::vector<PoolCondition> unique;
    for (PoolCondition& pc : pool_) {
      bool dup = false;
      for (const PoolCondition& kept : unique) {
        if (kept.truth == pc.truth && kept.condition.col1 == pc.condition.col1 &&
            (kept.condition.is_single()
                 ? pc.condition.is_single()
                 : (!pc.condition.is_single() && kept.condition.col2 == pc.condition.col2))) {
          dup = true;
          break;
        }
      }
      if (!dup) unique.push_back(std::move(pc));
    }
    pool_ = std::move(unique);
  }

  double completed_cost(const Frame& f) const {
    // sum_l N_l P(R_l) + N_j P(remaining), the cost of stopping here.
    double c = 0.0;
    for (std::size_t l = 0; l < f.caught.size(); ++l) {
      c += f.level_cost[l] * static_cast<double>(f.caught[l]);
    }
    const double nj = f.level_cost.empty() ? 0.0 : f.level_cost.back();
    c += nj * static_cast<double>(f.remaining.size());
    return c / static_cast<double>(n_);
  }

  void recurse(const Frame& f) {
    ++nodes_;
    // The paper's lower bound equals the cost of completing the list here;
    // deeper lists can only charge the remaining subjects more.
    const double bound = completed_cost(f);
    if (!opt_.disable_bound && bound >= result_.cost) return;

    // Completion test: all remaining subjects share one recommendation.
    int pure_arm = f.remaining.empty() ? fallback_default_ : target_[f.remaining.front()];
    bool pure = true;
    for (std::int32_t i : f.remaining) {
      if (target_[i] != pure_arm) {
        pure = false;
        break;
      }
    }
    if (pure) {
      const double cost = bound;  // identical expression once complete
      if (cost < result_.cost) {
        result_.cost = cost;
        result_.list.clauses = f.clauses;
        result_.list.default_action = pure_arm;
        result_.incumbent_costs.push_back(cost);
      }
      return;
    }
    if (static_cast<int>(f.clauses.size()) >= opt_.l_max) return;
    if (nodes_ >= opt_.node_budget) {
      result_.truncated = true;
      return;
    }

    // Admissible next clauses: catch a non-empty, recommendation-pure subset
    // of the remaining subjects. Duplicates (same caught subjects, same new
    // covariates) are dropped; candidates are explored largest-catch first so
    // cheap completions are found early and the bound prunes aggressively.
    struct Step {
      const PoolCondition* pc;
      int arm;
      std::int64_t caught;
      std::size_t hash;
      int order;
    };
    std::vector<Step> steps;
    for (std::size_t ci = 0; ci < pool_.size(); ++ci) {
      const PoolCondition& pc = pool_[ci];
      int arm = 0;
      bool ok = true;
      std::int64_t caught = 0;
      std::size_t hash = 1469598103934665603ULL;
      for (std::int32_t i : f.remaining) {
        if (!pc.truth[i]) continue;
        ++caught;
        hash = (hash ^ static_cast<std::size_t>(i)) * 1099511628211ULL;
        if (arm == 0) {
          arm = target_[i];
        } else if (arm != target_[i]) {
          ok = false;
          break;
        }
      }
      if (!ok || caught == 0) continue;
      bool dup = false;
      for (const Step& st : steps) {
        if (st.hash == hash && st.caught == caught &&
            st.pc->condition.col1 == pc.condition.col1 &&
            st.pc->condition.is_single() == pc.condition.is_single() &&
            (pc.condition.is_single() || st.pc->condition.col2 == pc.condition.col2)) {
          dup = true;
          break;
        }
      }
      if (dup) continue;
      steps.push_back({&pc, arm, caught, hash, static_cast<int>(ci)});
    }
    std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) {
      if (a.caught != b.caught) return a.caught > b.caught;
      return a.order < b.order;
    });

    for (const Step& st : steps) {
      const PoolCondition& pc = *st.pc;
      const int arm = st.arm;
      const std::int64_t caught = st.caught;
      Frame child;
      child.clauses = f.clauses;
      child.clauses.push_back(Clause{pc.condition, arm});
      child.caught = f.caught;
      child.caught.push_back(caught);
      child.used_cols = f.used_cols;
      double level = f.level_cost.empty() ? 0.0 : f.level_cost.back();
      if (child.used_cols.insert(pc.condition.col1).second) {
        level += costs_.cost_of(pc.condition.col1);
      }
      if (!pc.condition.is_single() && child.used_cols.insert(pc.condition.col2).second) {
        level += costs_.cost_of(pc.condition.col2);
      }
      child.level_cost = f.level_cost;
      child.level_cost.push_back(level);
      child.remaining.reserve(f.remaining.size() - static_cast<std::size_t>(caught));
      for (std::int32_t i : f.remaining) {
        if (!pc.truth[i]) child.remaining.push_back(i);
      }
      recurse(child);
    }
  }

  const Eigen::MatrixXd& X_;
  const CostModel& costs_;
  MinCostOptions opt_;
  Eigen::Index n_;
  std::vector<int> target_;
  int arms_ = 2;
  int fallback_default_ = 1;
  std::vector<PoolCondition> pool_;
  MinCostResult result_;
  std::int64_t nodes_ = 0;
};

}  // namespace

MinCostResult min_cost_equivalent(const DecisionList& pi_tilde, const Eigen::MatrixXd& covariates,
                                  const CostModel& costs, const MinCostOptions& options) {
  if (covariates.rows() < 1) throw_validation("min-cost search needs at least one subject");
  MinCostOptions opt = options;
  opt.l_max = std::max(opt.l_max, pi_tilde.length());
  MinCostSearch search(pi_tilde, covariates, costs, opt);
  MinCostResult res = search.run(pi_tilde);
  res.list.estimated_value = pi_tilde.estimated_value;
  return res;
}

bool sample_equivalence_check(const DecisionList& pi_a, const DecisionList& pi_b,
                              const Eigen::MatrixXd& covariates) {
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    if (pi_a.evaluate(covariates.row(i)) != pi_b.evaluate(covariates.row(i))) return false;
  }
  return true;
}

}  // namespace declist
