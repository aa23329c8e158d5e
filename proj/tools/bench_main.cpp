// Benchmark driver: compares the OpenMP prefix-sum clause kernel against the
// serial reference enumerator on synthetic workloads, and runs the
// complexity-scaling probe.

#include <chrono>
#include <iostream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "declist/rng.hpp"
#include "declist/search.hpp"

using namespace declist;

namespace {

struct Workload {
  Eigen::MatrixXd xi;
  BinIndex bins;
  CutoffGrid grid;
  std::vector<std::int32_t> active;
};

Workload make_workload(int n, int p, int m, int s, std::uint64_t seed) {
  Rng rng(seed);
  Workload w;
  w.xi.resize(n, m);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < m; ++a) w.xi(i, a) = rng.normal();
  }
  w.bins.codes.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) w.bins.codes(i, j) = rng.uniform_int(0, s);
  }
  w.grid.cutoffs.assign(p, {});
  for (int j = 0; j < p; ++j) {
    for (int t = 1; t <= s; ++t) w.grid.cutoffs[j].push_back(static_cast<double>(t));
  }
  w.active.resize(n);
  for (int i = 0; i < n; ++i) w.active[i] = i;
  return w;
}

double time_once(const Workload& w, bool reference) {
  SearchConfig cfg;
  cfg.use_reference_kernel = reference;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = best_clause(w.active, w.xi, w.bins, w.grid, cfg);
  const auto t1 = std::chrono::steady_clock::now();
  volatile double sink = r ? r->objective : 0.0;
  (void)sink;
  return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"declist kernel benchmarks"};
  int n = 20000, p = 16, m = 2, s = 9, reps = 3;
  std::uint64_t seed = 1;
  bool probe = false;
  std::string out_path;
  app.add_option("--n", n, "subjects");
  app.add_option("--p", p, "covariates");
  app.add_option("--m", m, "treatment arms");
  app.add_option("--s", s, "cutoffs per covariate");
  app.add_option("--reps", reps, "timing repetitions (min taken)");
  app.add_option("--seed", seed, "seed");
  app.add_flag("--probe", probe, "run the complexity-scaling probe instead");
  app.add_option("--out", out_path, "write the report JSON here");
  CLI11_PARSE(app, argc, argv);

  nlohmann::json doc;
  if (probe) {
    const ComplexityReport report = complexity_probe(n / 4, p / 2, m, 3, 1, seed);
    doc = nlohmann::json::parse(report.to_json());
    std::cerr << "p-exponent " << report.p_exponent << ", n-exponent " << report.n_exponent
              << "\n";
  } else {
    const Workload w = make_workload(n, p, m, s, seed);
    double fast = 1e100, ref = 1e100, serial = 1e100;
    for (int r = 0; r < reps; ++r) {
      fast = std::min(fast, time_once(w, false));
      ref = std::min(ref, time_once(w, true));
    }
    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    for (int r = 0; r < reps; ++r) serial = std::min(serial, time_once(w, false));
    omp_set_num_threads(max_threads);

    // The two kernels must agree on the winning objective.
    SearchConfig cfg;
    const auto a = best_clause(w.active, w.xi, w.bins, w.grid, cfg);
    cfg.use_reference_kernel = true;
    const auto b = best_clause(w.active, w.xi, w.bins, w.grid, cfg);
    const double gap = std::abs(a->objective - b->objective);

    doc["n"] = n;
    doc["p"] = p;
    doc["m"] = m;
    doc["s"] = s;
    doc["threads"] = max_threads;
    doc["parallel_seconds"] = fast;
    doc["serial_seconds"] = serial;
    doc["reference_seconds"] = ref;
    doc["speedup_vs_serial"] = serial / fast;
    doc["speedup_vs_reference"] = ref / fast;
    doc["objective_gap"] = gap;
    std::cerr << "parallel " << fast << "s, serial " << serial << "s, reference " << ref
              << "s (objective gap " << gap << ")\n";
  }
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    out << doc.dump(2) << "\n";
  }
  return 0;
}
