#include "declist/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "declist/error.hpp"
#include "declist/rng.hpp"

namespace declist {

namespace {

inline bool better(double obj, const std::array<int, 7>& key, const BestClause& cur) {
  if (obj != cur.objective) return obj > cur.objective;
  return key < cur.key;
}

void consider(const CutoffGrid& grid, int form, int j1, int j2, int t1, int t2,
              const double* in_sums, std::int64_t n_in, const double* tot, std::int64_t n_tot,
              int m, int min_region, std::optional<BestClause>& best, double* scratch) {
  const std::int64_t n_out = n_tot - n_in;
  if (n_in < std::max<std::int64_t>(1, min_region) || n_out < min_region) return;
  double best_in = in_sums[0];
  int a_in = 1;
  for (int a = 1; a < m; ++a) {
    if (in_sums[a] > best_in) {
      best_in = in_sums[a];
      a_in = a + 1;
    }
  }
  for (int a = 0; a < m; ++a) scratch[a] = tot[a] - in_sums[a];
  double best_out = scratch[0];
  int a_out = 1;
  for (int a = 1; a < m; ++a) {
    if (scratch[a] > best_out) {
      best_out = scratch[a];
      a_out = a + 1;
    }
  }
  const double obj = best_in + best_out;
  const std::array<int, 7> key = {form, j1 + 1, j2 + 1, t1, t2, a_in, a_out};
  if (best && !better(obj, key, *best)) return;
  BestClause cand;
  if (form == 1 || form == 10) {
    cand.condition = make_single(j1, grid.cutoffs[j1][t1 - 1],
                                 form == 1 ? Sense::Le : Sense::Gt);
  } else {
    Condition c;
    c.form = form;
    c.col1 = j1;
    c.tau1 = grid.cutoffs[j1][t1 - 1];
    c.col2 = j2;
    c.tau2 = grid.cutoffs[j2][t2 - 1];
    cand.condition = c;
  }
  cand.in_action = a_in;
  cand.out_action = a_out;
  cand.objective = obj;
  cand.in_count = n_in;
  cand.out_count = n_out;
  cand.key = key;
  best = cand;
}

// Single-covariate sweep: forms [1] and [10] for every cutoff of covariate j.
void sweep_single(int j, const std::vector<std::int32_t>& active,
                  const Eigen::MatrixXd& wxi, const BinIndex& bins, const CutoffGrid& grid,
                  int min_region, std::optional<BestClause>& best) {
  const int m = static_cast<int>(wxi.cols());
  const int s = grid.size(j);
  std::vector<double> acc(static_cast<std::size_t>(m) * (s + 1), 0.0);
  std::vector<std::int64_t> cnt(s + 1, 0);
  for (std::int32_t i : active) {
    const int u = bins.codes(i, j);
    ++cnt[u];
    for (int a = 0; a < m; ++a) acc[static_cast<std::size_t>(a) * (s + 1) + u] += wxi(i, a);
  }
  std::vector<double> tot(m, 0.0);
  for (int a = 0; a < m; ++a) {
    for (int u = 0; u <= s; ++u) tot[a] += acc[static_cast<std::size_t>(a) * (s + 1) + u];
  }
  std::int64_t n_tot = 0;
  for (int u = 0; u <= s; ++u) n_tot += cnt[u];

  std::vector<double> prefix(m, 0.0), in_sums(m), scratch(m);
  std::int64_t cprefix = 0;
  for (int t = 1; t <= s; ++t) {
    for (int a = 0; a < m; ++a) prefix[a] += acc[static_cast<std::size_t>(a) * (s + 1) + (t - 1)];
    cprefix += cnt[t - 1];
    // Form [1]: x_j <= tau_t  <=>  bin < t.
    consider(grid, 1, j, 0, t, 0, prefix.data(), cprefix, tot.data(), n_tot, m, min_region,
             best, scratch.data());
    // Form [10]: complement.
    for (int a = 0; a < m; ++a) in_sums[a] = tot[a] - prefix[a];
    consider(grid, 10, j, 0, t, 0, in_sums.data(), n_tot - cprefix, tot.data(), n_tot, m,
             min_region, best, scratch.data());
  }
}

// Covariate-pair sweep: builds D_{auv} over active subjects, then evaluates
// the eight two-atom forms at every cutoff pair via 2-D prefix sums.
void sweep_pair(int k, int l, const std::vector<std::int32_t>& active,
                const Eigen::MatrixXd& wxi, const BinIndex& bins, const CutoffGrid& grid,
                int min_region, std::optional<BestClause>& best) {
  const int m = static_cast<int>(wxi.cols());
  const int sk = grid.size(k);
  const int sl = grid.size(l);
  const int uk = sk + 1, ul = sl + 1;
  std::vector<double> D(static_cast<std::size_t>(m) * uk * ul, 0.0);
  std::vector<std::int64_t> C(static_cast<std::size_t>(uk) * ul, 0);
  for (std::int32_t i : active) {
    const int u = bins.codes(i, k);
    const int v = bins.codes(i, l);
    ++C[static_cast<std::size_t>(u) * ul + v];
    for (int a = 0; a < m; ++a) {
      D[(static_cast<std::size_t>(a) * uk + u) * ul + v] += wxi(i, a);
    }
  }
  // In-place 2-D prefix sums (rows then columns).
  for (int a = 0; a < m; ++a) {
    double* da = D.data() + static_cast<std::size_t>(a) * uk * ul;
    for (int u = 1; u < uk; ++u) {
      for (int v = 0; v < ul; ++v) da[u * ul + v] += da[(u - 1) * ul + v];
    }
    for (int u = 0; u < uk; ++u) {
      for (int v = 1; v < ul; ++v) da[u * ul + v] += da[u * ul + v - 1];
    }
  }
  for (int u = 1; u < uk; ++u) {
    for (int v = 0; v < ul; ++v) C[static_cast<std::size_t>(u) * ul + v] += C[(u - 1) * ul + v];
  }
  for (int u = 0; u < uk; ++u) {
    for (int v = 1; v < ul; ++v) C[static_cast<std::size_t>(u) * ul + v] += C[u * ul + v - 1];
  }

  std::vector<double> tot(m), quad(m), row(m), col(m), in_sums(m), scratch(m);
  for (int a = 0; a < m; ++a) {
    tot[a] = D[(static_cast<std::size_t>(a) * uk + (uk - 1)) * ul + (ul - 1)];
  }
  const std::int64_t n_tot = C[static_cast<std::size_t>(uk - 1) * ul + (ul - 1)];

  for (int t1 = 1; t1 <= sk; ++t1) {
    for (int t2 = 1; t2 <= sl; ++t2) {
      for (int a = 0; a < m; ++a) {
        const double* da = D.data() + static_cast<std::size_t>(a) * uk * ul;
        quad[a] = da[(t1 - 1) * ul + (t2 - 1)];
        row[a] = da[(t1 - 1) * ul + (ul - 1)];
        col[a] = da[(uk - 1) * ul + (t2 - 1)];
      }
      const std::int64_t cquad = C[static_cast<std::size_t>(t1 - 1) * ul + (t2 - 1)];
      const std::int64_t crow = C[static_cast<std::size_t>(t1 - 1) * ul + (ul - 1)];
      const std::int64_t ccol = C[static_cast<std::size_t>(uk - 1) * ul + (t2 - 1)];
      const std::int64_t cnts[8] = {cquad,
                                    crow - cquad,
                                    ccol - cquad,
                                    n_tot - crow - ccol + cquad,
                                    n_tot - (n_tot - crow - ccol + cquad),
                                    n_tot - (ccol - cquad),
                                    n_tot - (crow - cquad),
                                    n_tot - cquad};
      for (int f = 0; f < 8; ++f) {
        const int form = f + 2;
        for (int a = 0; a < m; ++a) {
          double v;
          switch (form) {
            case 2: v = quad[a]; break;
            case 3: v = row[a] - quad[a]; break;
            case 4: v = col[a] - quad[a]; break;
            case 5: v = tot[a] - row[a] - col[a] + quad[a]; break;
            case 6: v = row[a] + col[a] - quad[a]; break;
            case 7: v = tot[a] - col[a] + quad[a]; break;
            case 8: v = tot[a] - row[a] + quad[a]; break;
            default: v = tot[a] - quad[a]; break;  // form 9
          }
          in_sums[a] = v;
        }
        consider(grid, form, k, l, t1, t2, in_sums.data(), cnts[f], tot.data(), n_tot, m,
                 min_region, best, scratch.data());
      }
    }
  }
}

std::optional<BestClause> merge_slots(std::vector<std::optional<BestClause>>& slots) {
  std::optional<BestClause> best;
  for (auto& s : slots) {
    if (!s) continue;
    if (!best || better(s->objective, s->key, *best)) best = *s;
  }
  return best;
}

}  // namespace

std::optional<BestClause> best_clause(const std::vector<std::int32_t>& active,
                                      const Eigen::MatrixXd& weighted_xi, const BinIndex& bins,
                                      const CutoffGrid& grid, const SearchConfig& cfg) {
  if (active.empty()) return std::nullopt;
  if (cfg.use_reference_kernel) {
    return best_clause_reference(active, weighted_xi, bins, grid, cfg);
  }
  const int p = static_cast<int>(grid.p());
  const int n_pairs = p * (p - 1) / 2;
  std::vector<std::optional<BestClause>> slots(p + n_pairs);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(n_pairs);
  for (int k = 0; k < p; ++k) {
    for (int l = k + 1; l < p; ++l) pairs.emplace_back(k, l);
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (int w = 0; w < p + n_pairs; ++w) {
    if (w < p) {
      sweep_single(w, active, weighted_xi, bins, grid, cfg.min_region_size, slots[w]);
    } else {
      const auto [k, l] = pairs[w - p];
      sweep_pair(k, l, active, weighted_xi, bins, grid, cfg.min_region_size, slots[w]);
    }
  }
  return merge_slots(slots);
}

namespace {

struct NodeState {
  std::vector<Clause> prefix;
  int default_arm = 1;
  std::vector<std::int32_t> active;
  std::vector<std::int32_t> rec_prefix;  // caught arm per subject, 0 = still active
  double caught_sum = 0.0;               // weighted xi already decided by the prefix
};

class FindListDriver {
public:
  FindListDriver(const InfluenceContext& ctx, const BinIndex& bins, const CutoffGrid& grid,
                 const SearchConfig& cfg)
      : ctx_(ctx), bins_(bins), grid_(grid), cfg_(cfg),
        z_gate_(normal_quantile(1.0 - cfg.alpha)) {
    wxi_ = ctx.xi().xi;
    for (Eigen::Index i = 0; i < wxi_.rows(); ++i) wxi_.row(i) *= ctx.weights()[i];
    nn_ = static_cast<double>(wxi_.rows());
  }

  SearchResult run() {
    int a0 = 1;
    double best_sum = wxi_.col(0).sum();
    for (int a = 2; a <= ctx_.arms(); ++a) {
      const double s = wxi_.col(a - 1).sum();
      if (s > best_sum) {
        best_sum = s;
        a0 = a;
      }
    }
    trace_.best_constant_action = a0;
    trace_.constant_value = best_sum / nn_;

    NodeState root;
    root.default_arm = a0;
    root.active.resize(static_cast<std::size_t>(nn_));
    for (std::size_t i = 0; i < root.active.size(); ++i) {
      root.active[i] = static_cast<std::int32_t>(i);
    }
    root.rec_prefix.assign(root.active.size(), 0);

    const int leaf = cfg_.l_max == 0 ? finalize_leaf(0, root, "l-max") : expand(1, root);
    trace_.chosen_final = leaf;

    SearchResult res;
    res.list = trace_.finals[leaf].first;
    res.value = trace_.finals[leaf].second;
    res.trace = std::move(trace_);
    return res;
  }

private:
  double list_value(const NodeState& node) const {
    double s = node.caught_sum;
    for (std::int32_t i : node.active) s += wxi_(i, node.default_arm - 1);
    return s / nn_;
  }

  // Records {node.prefix, node.default_arm} as a finalized list.
  int finalize_leaf(int depth, const NodeState& node, const std::string& reason) {
    const int node_id = new_node(depth);
    trace_.nodes[node_id].stop = reason;
    return push_final(node_id, node);
  }

  int push_final(int node_id, const NodeState& node) {
    DecisionList pi;
    pi.clauses = node.prefix;
    pi.default_action = node.default_arm;
    const double v = list_value(node);
    pi.estimated_value = v;
    trace_.finals.emplace_back(std::move(pi), v);
    trace_.nodes[node_id].finalized_index = static_cast<int>(trace_.finals.size()) - 1;
    return static_cast<int>(trace_.finals.size()) - 1;
  }

  int new_node(int depth) {
    TraceNode t;
    t.id = static_cast<int>(trace_.nodes.size());
    t.depth = depth;
    trace_.nodes.push_back(std::move(t));
    return trace_.nodes.back().id;
  }

  // Membership of active subject i in the candidate condition, via bin codes
  // (the cutoff indices come from the candidate's tie-break key).
  bool membership(const BestClause& cand, std::int32_t i) const {
    const Condition& c = cand.condition;
    const int t1 = cand.key[3];
    const bool le1 = c.form == 1 || c.form == 2 || c.form == 3 || c.form == 6 || c.form == 7;
    const bool a1 = le1 ? bins_.codes(i, c.col1) < t1 : bins_.codes(i, c.col1) >= t1;
    if (c.is_single()) return a1;
    const int t2 = cand.key[4];
    const bool le2 = c.form == 2 || c.form == 4 || c.form == 6 || c.form == 8;
    const bool a2 = le2 ? bins_.codes(i, c.col2) < t2 : bins_.codes(i, c.col2) >= t2;
    return c.is_conjunction() ? (a1 && a2) : (a1 || a2);
  }

  NodeState make_child(const NodeState& node, const BestClause& cand,
                       const std::vector<char>& in_flag, bool negated) const {
    NodeState child;
    child.prefix = node.prefix;
    child.rec_prefix = node.rec_prefix;
    child.caught_sum = node.caught_sum;
    const Condition cond = negated ? negate(cand.condition) : cand.condition;
    const int caught_arm = negated ? cand.out_action : cand.in_action;
    child.prefix.push_back(Clause{cond, caught_arm});
    child.default_arm = negated ? cand.in_action : cand.out_action;
    for (std::int32_t i : node.active) {
      const bool caught = negated != static_cast<bool>(in_flag[i]);
      if (caught) {
        child.rec_prefix[i] = caught_arm;
        child.caught_sum += wxi_(i, caught_arm - 1);
      } else {
        child.active.push_back(i);
      }
    }
    return child;
  }

  // One FindList invocation choosing clause j; returns the index of the best
  // finalized list in its subtree.
  int expand(int depth, const NodeState& node) {
    const int node_id = new_node(depth);
    if (node.active.empty()) {
      trace_.nodes[node_id].stop = "empty-active";
      return push_final(node_id, node);
    }
    const std::optional<BestClause> cand = best_clause(node.active, wxi_, bins_, grid_, cfg_);
    if (!cand) {
      trace_.nodes[node_id].stop = "no-admissible-clause";
      return push_final(node_id, node);
    }
    {
      TraceNode& tn = trace_.nodes[node_id];
      tn.has_candidate = true;
      tn.condition = cand->condition;
      tn.in_action = cand->in_action;
      tn.out_action = cand->out_action;
    }

    std::vector<char> in_flag(static_cast<std::size_t>(nn_), 0);
    for (std::int32_t i : node.active) in_flag[i] = membership(*cand, i) ? 1 : 0;
    // The increment is re-accumulated directly (not from the kernel's prefix
    // sums) so that a candidate leaving every recommendation unchanged yields
    // exactly zero.
    double delta = 0.0;
    for (std::int32_t i : node.active) {
      const int child_arm = in_flag[i] ? cand->in_action : cand->out_action;
      delta += wxi_(i, child_arm - 1) - wxi_(i, node.default_arm - 1);
    }
    delta /= nn_;
    std::vector<int> rec_child(static_cast<std::size_t>(nn_)), rec_parent(rec_child.size());
    for (std::size_t i = 0; i < rec_child.size(); ++i) {
      if (node.rec_prefix[i] > 0) {
        rec_child[i] = rec_parent[i] = node.rec_prefix[i];
      } else {
        rec_parent[i] = node.default_arm;
        rec_child[i] = in_flag[i] ? cand->in_action : cand->out_action;
      }
    }
    const double var = ctx_.variance_of_difference(rec_child, rec_parent);
    const double gate = z_gate_ * std::sqrt(std::max(var, 0.0));
    {
      TraceNode& tn = trace_.nodes[node_id];
      tn.delta = delta;
      tn.variance = var;
      tn.gate = gate;
    }

    if (delta < gate || (delta == 0.0 && gate == 0.0)) {
      trace_.nodes[node_id].stop = "variance-gate";
      return push_final(node_id, node);
    }
    const NodeState keep = make_child(node, *cand, in_flag, /*negated=*/false);
    if (depth == cfg_.l_max) {
      trace_.nodes[node_id].stop = "l-max";
      return push_final(node_id, keep);
    }
    const NodeState negated = make_child(node, *cand, in_flag, /*negated=*/true);
    const int keep_node = static_cast<int>(trace_.nodes.size());
    const int leaf1 = expand(depth + 1, keep);
    const int neg_node = static_cast<int>(trace_.nodes.size());
    const int leaf2 = expand(depth + 1, negated);
    trace_.nodes[node_id].child_keep = keep_node;
    trace_.nodes[node_id].child_negated = neg_node;
    // Ties go to the first (non-negated) branch.
    return trace_.finals[leaf2].second > trace_.finals[leaf1].second ? leaf2 : leaf1;
  }

  const InfluenceContext& ctx_;
  const BinIndex& bins_;
  const CutoffGrid& grid_;
  SearchConfig cfg_;
  double z_gate_;
  Eigen::MatrixXd wxi_;
  double nn_ = 0.0;
  SearchTrace trace_;
};

}  // namespace

SearchResult find_list(const InfluenceContext& ctx, const BinIndex& bins, const CutoffGrid& grid,
                       const SearchConfig& cfg) {
  if (cfg.l_max < 0) throw_validation("l_max must be >= 0");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw_validation("alpha must be in (0,1)");
  FindListDriver driver(ctx, bins, grid, cfg);
  return driver.run();
}

SearchResult find_list(const Dataset& data, const FittedPropensity& propensity,
                       const FittedOutcome& outcome, const CutoffGrid& grid,
                       const SearchConfig& cfg) {
  InfluenceContext ctx(data, propensity, outcome);
  const BinIndex bins = bin(data, grid);
  return find_list(ctx, bins, grid, cfg);
}

std::string SearchTrace::to_json(const RenderNames& names, int indent) const {
  nlohmann::json doc;
  doc["best_constant_action"] = names.treatments[best_constant_action - 1];
  doc["constant_value"] = constant_value;
  doc["nodes"] = nlohmann::json::array();
  for (const TraceNode& t : nodes) {
    nlohmann::json jn{{"id", t.id},
                      {"depth", t.depth},
                      {"stop", t.stop},
                      {"finalized", t.finalized_index}};
    if (t.has_candidate) {
      jn["condition"] = render_condition(t.condition, names);
      jn["in_action"] = names.treatments[t.in_action - 1];
      jn["out_action"] = names.treatments[t.out_action - 1];
      jn["delta"] = t.delta;
      jn["variance"] = t.variance;
      jn["gate"] = t.gate;
      jn["child_keep"] = t.child_keep;
      jn["child_negated"] = t.child_negated;
    }
    doc["nodes"].push_back(std::move(jn));
  }
  doc["finals"] = nlohmann::json::array();
  for (const auto& [pi, v] : finals) {
    doc["finals"].push_back({{"value", v}, {"list", render(pi, names)}});
  }
  doc["chosen_final"] = chosen_final;
  return doc.dump(indent);
}

ComplexityReport complexity_probe(int base_n, int base_p, int m, int s, int l_max,
                                  std::uint64_t seed) {
  // Timed single-threaded so the regression sees the kernel's own scaling,
  // not the scheduler's.
  const int saved_threads = omp_get_max_threads();
  omp_set_num_threads(1);
  auto time_kernel = [&](int n, int p) {
    Rng rng = Rng::keyed(seed, (static_cast<std::uint64_t>(n) << 20) + static_cast<unsigned>(p));
    Eigen::MatrixXd xi(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int a = 0; a < m; ++a) xi(i, a) = rng.normal();
    }
    BinIndex bins;
    bins.codes.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) bins.codes(i, j) = rng.uniform_int(0, s);
    }
    CutoffGrid grid;
    grid.cutoffs.assign(p, {});
    for (int j = 0; j < p; ++j) {
      for (int t = 1; t <= s; ++t) grid.cutoffs[j].push_back(static_cast<double>(t));
    }
    std::vector<std::int32_t> active(n);
    for (int i = 0; i < n; ++i) active[i] = i;
    SearchConfig cfg;
    cfg.l_max = l_max;
    double best = 1e100;
    volatile double sink = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      auto r = best_clause(active, xi, bins, grid, cfg);
      const auto t1 = std::chrono::steady_clock::now();
      if (r) sink = r->objective;
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    (void)sink;
    return best;
  };

  auto slope = [](const std::vector<ComplexityReport::Point>& pts, bool on_p) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double k = static_cast<double>(pts.size());
    for (const auto& pt : pts) {
      const double x = std::log(static_cast<double>(on_p ? pt.p : pt.n));
      const double y = std::log(std::max(pt.seconds, 1e-12));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
  };

  ComplexityReport report;
  for (int f = 1; f <= 8; f *= 2) {
    report.p_sweep.push_back({base_n, base_p * f, time_kernel(base_n, base_p * f)});
  }
  for (int f = 1; f <= 8; f *= 2) {
    report.n_sweep.push_back({base_n * f, base_p, time_kernel(base_n * f, base_p)});
  }
  report.p_exponent = slope(report.p_sweep, true);
  report.n_exponent = slope(report.n_sweep, false);
  omp_set_num_threads(saved_threads);
  return report;
}

std::string ComplexityReport::to_json(int indent) const {
  nlohmann::json doc;
  auto dump = [](const std::vector<Point>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& pt : pts) arr.push_back({{"n", pt.n}, {"p", pt.p}, {"seconds", pt.seconds}});
    return arr;
  };
  doc["p_sweep"] = dump(p_sweep);
  doc["n_sweep"] = dump(n_sweep);
  doc["p_exponent"] = p_exponent;
  doc["n_exponent"] = n_exponent;
  return doc.dump(indent);
}

}  // namespace declist
