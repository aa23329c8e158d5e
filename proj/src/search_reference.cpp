#include <cstdint>

#include "declist/search.hpp"

namespace declist {

// Serial reference clause search: evaluates every (form, covariates, cutoffs)
// candidate by a direct pass over the active subjects. O(n m p^2 s^2); kept
// deliberately independent of the prefix-sum kernel.

namespace {

struct RefBest {
  bool has = false;
  BestClause clause;
};

inline bool key_less(const std::array<int, 7>& a, const std::array<int, 7>& b) { return a < b; }

void offer(RefBest& best, const CutoffGrid& grid, int form, int j1, int j2, int t1, int t2,
           const std::vector<double>& in_sums, const std::vector<double>& out_sums,
           std::int64_t n_in, std::int64_t n_out, int min_region) {
  if (n_in < std::max<std::int64_t>(1, min_region) || n_out < min_region) return;
  const int m = static_cast<int>(in_sums.size());
  int a_in = 1, a_out = 1;
  for (int a = 1; a < m; ++a) {
    if (in_sums[a] > in_sums[a_in - 1]) a_in = a + 1;
    if (out_sums[a] > out_sums[a_out - 1]) a_out = a + 1;
  }
  const double obj = in_sums[a_in - 1] + out_sums[a_out - 1];
  const std::array<int, 7> key = {form, j1 + 1, j2 + 1, t1, t2, a_in, a_out};
  if (best.has) {
    if (obj < best.clause.objective) return;
    if (obj == best.clause.objective && !key_less(key, best.clause.key)) return;
  }
  BestClause c;
  if (form == 1 || form == 10) {
    c.condition = make_single(j1, grid.cutoffs[j1][t1 - 1], form == 1 ? Sense::Le : Sense::Gt);
  } else {
    c.condition.form = form;
    c.condition.col1 = j1;
    c.condition.tau1 = grid.cutoffs[j1][t1 - 1];
    c.condition.col2 = j2;
    c.condition.tau2 = grid.cutoffs[j2][t2 - 1];
  }
  c.in_action = a_in;
  c.out_action = a_out;
  c.objective = obj;
  c.in_count = n_in;
  c.out_count = n_out;
  c.key = key;
  best.has = true;
  best.clause = c;
}

}  // namespace

std::optional<BestClause> best_clause_reference(const std::vector<std::int32_t>& active,
                                                const Eigen::MatrixXd& wxi, const BinIndex& bins,
                                                const CutoffGrid& grid, const SearchConfig& cfg) {
  if (active.empty()) return std::nullopt;
  const int p = static_cast<int>(grid.p());
  const int m = static_cast<int>(wxi.cols());
  RefBest best;
  std::vector<double> in_sums(m), out_sums(m), tot(m, 0.0);
  for (std::int32_t i : active) {
    for (int a = 0; a < m; ++a) tot[a] += wxi(i, a);
  }

  auto score_membership = [&](auto&& member, int form, int j1, int j2, int t1, int t2) {
    std::fill(in_sums.begin(), in_sums.end(), 0.0);
    std::int64_t n_in = 0;
    for (std::int32_t i : active) {
      if (member(i)) {
        ++n_in;
        for (int a = 0; a < m; ++a) in_sums[a] += wxi(i, a);
      }
    }
    for (int a = 0; a < m; ++a) out_sums[a] = tot[a] - in_sums[a];
    offer(best, grid, form, j1, j2, t1, t2, in_sums, out_sums, n_in,
          static_cast<std::int64_t>(active.size()) - n_in, cfg.min_region_size);
  };

  // Single-atom forms [1] and [10], enumerated separately from the pairs.
  for (int j = 0; j < p; ++j) {
    for (int t = 1; t <= grid.size(j); ++t) {
      score_membership([&](std::int32_t i) { return bins.codes(i, j) < t; }, 1, j, 0, t, 0);
      score_membership([&](std::int32_t i) { return bins.codes(i, j) >= t; }, 10, j, 0, t, 0);
    }
  }
  // Two-atom forms [2]..[9] over ordered covariate pairs j1 < j2.
  for (int j1 = 0; j1 < p; ++j1) {
    for (int j2 = j1 + 1; j2 < p; ++j2) {
      for (int t1 = 1; t1 <= grid.size(j1); ++t1) {
        for (int t2 = 1; t2 <= grid.size(j2); ++t2) {
          for (int form = 2; form <= 9; ++form) {
            const bool le1 = form == 2 || form == 3 || form == 6 || form == 7;
            const bool le2 = form == 2 || form == 4 || form == 6 || form == 8;
            const bool conj = form <= 5;
            score_membership(
                [&](std::int32_t i) {
                  const bool a1 = le1 ? bins.codes(i, j1) < t1 : bins.codes(i, j1) >= t1;
                  const bool a2 = le2 ? bins.codes(i, j2) < t2 : bins.codes(i, j2) >= t2;
                  return conj ? (a1 && a2) : (a1 || a2);
                },
                form, j1, j2, t1, t2);
          }
        }
      }
    }
  }
  if (!best.has) return std::nullopt;
  return best.clause;
}

}  // namespace declist
