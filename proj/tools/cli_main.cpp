// declist command-line interface: fit, evaluate, mincost, simulate, score.
//
// Exit codes: 0 success, 2 validation/usage, 3 fit non-convergence, 4 I/O.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "declist/error.hpp"
#include "declist/inference.hpp"
#include "declist/pipeline.hpp"
#include "declist/simlab.hpp"

namespace {

using namespace declist;

#ifndef DECLIST_VERSION
#define DECLIST_VERSION "0.0.0"
#endif

struct CommonDataArgs {
  std::string data_path;
  std::string treatment_col;
  std::string outcome_col;
  std::string outcome_kind = "continuous";

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data_path, "input CSV (header row required)")->required();
    cmd->add_option("--treatment-col", treatment_col, "treatment column name")->required();
    cmd->add_option("--outcome-col", outcome_col, "outcome column name")->required();
    cmd->add_option("--outcome-kind", outcome_kind, "continuous|binary")
        ->check(CLI::IsMember({"continuous", "binary"}));
  }

  Dataset load() const {
    CsvSchema schema;
    schema.treatment_col = treatment_col;
    schema.outcome_col = outcome_col;
    schema.outcome_kind =
        outcome_kind == "binary" ? OutcomeKind::Binary : OutcomeKind::Continuous;
    return load_csv(data_path, schema);
  }
};

struct FitArgs {
  std::string cutoffs = "percentiles:9";
  std::string propensity = "proportion";
  std::string outcome_model = "lasso";
  int l_max = 10;
  double alpha = 0.05;
  int min_region = 0;
  std::uint64_t seed = 1;
  bool no_mincost = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--cutoffs", cutoffs, "percentiles:k | file:<path>");
    cmd->add_option("--propensity", propensity, "proportion|logistic")
        ->check(CLI::IsMember({"proportion", "logistic"}));
    cmd->add_option("--outcome-model", outcome_model, "lasso|glm")
        ->check(CLI::IsMember({"lasso", "glm"}));
    cmd->add_option("--l-max", l_max, "maximum list length");
    cmd->add_option("--alpha", alpha, "stopping-gate significance level");
    cmd->add_option("--min-region", min_region, "minimum subjects per induced region");
    cmd->add_option("--seed", seed, "run seed (CV folds, bootstrap)");
    cmd->add_flag("--no-mincost", no_mincost, "skip the minimal-cost reordering");
  }

  GridPolicy grid_policy(const Dataset& ds) const {
    GridPolicy gp;
    if (cutoffs.rfind("percentiles:", 0) == 0) {
      gp.kind = GridPolicy::Kind::EmpiricalPercentiles;
      gp.percentile_count = std::stoi(cutoffs.substr(12));
      return gp;
    }
    if (cutoffs.rfind("file:", 0) == 0) {
      gp.kind = GridPolicy::Kind::Explicit;
      std::ifstream in(cutoffs.substr(5));
      if (!in) throw_io("cannot open cutoff file '" + cutoffs.substr(5) + "'");
      std::string line;
      while (std::getline(in, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
          if (!cell.empty()) row.push_back(std::stod(cell));
        }
        gp.explicit_cutoffs.push_back(std::move(row));
      }
      if (static_cast<Eigen::Index>(gp.explicit_cutoffs.size()) != ds.p()) {
        throw_validation("cutoff file must have one line per covariate");
      }
      return gp;
    }
    throw_validation("--cutoffs must be percentiles:k or file:<path>");
  }

  FitSpec spec(const Dataset& ds) const {
    FitSpec s;
    s.propensity.kind = propensity == "logistic" ? PropensitySpec::Kind::MultinomialLogistic
                                                 : PropensitySpec::Kind::SampleProportion;
    s.outcome = OutcomeSpec::for_outcome(ds.outcome_kind, outcome_model == "lasso");
    s.outcome.cv_seed = seed;
    s.grid_policy = grid_policy(ds);
    s.search.l_max = l_max;
    s.search.alpha = alpha;
    s.search.min_region_size = min_region;
    s.run_mincost = !no_mincost;
    return s;
  }

  nlohmann::json config_json() const {
    return {{"cutoffs", cutoffs},   {"propensity", propensity},
            {"outcome_model", outcome_model}, {"l_max", l_max},
            {"alpha", alpha},       {"min_region", min_region},
            {"seed", seed},         {"mincost", !no_mincost}};
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw_io("cannot write '" + path + "'");
  out << content;
  if (!out) throw_io("short write to '" + path + "'");
}

nlohmann::json with_audit(nlohmann::json doc, const nlohmann::json& config) {
  doc["version"] = std::string("declist ") + DECLIST_VERSION;
  doc["config"] = config;
  return doc;
}

int cmd_fit(const CommonDataArgs& data_args, const FitArgs& fit_args, const std::string& out_path,
            const std::string& text_path, const std::string& trace_path) {
  const Dataset ds = data_args.load();
  const FitSpec spec = fit_args.spec(ds);
  const FitResult fit = fit_pipeline(ds, spec);
  for (const std::string& w : fit.grid.warnings) std::cerr << "warning: " << w << "\n";
  const RenderNames names = names_from(ds);

  nlohmann::json config = fit_args.config_json();
  config["data"] = data_args.data_path;
  config["treatment_col"] = data_args.treatment_col;
  config["outcome_col"] = data_args.outcome_col;
  config["outcome_kind"] = data_args.outcome_kind;

  nlohmann::json doc = nlohmann::json::parse(regime_to_json(fit.pi_hat, names));
  doc["estimated_value"] = fit.search.value;
  doc["empirical_cost"] = fit.cost_hat;
  doc["rendered"] = render(fit.pi_hat, names);
  doc["models"] = nlohmann::json::parse(models_to_json(fit.propensity, fit.outcome));
  doc = with_audit(std::move(doc), config);

  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_file(out_path, doc.dump(2) + "\n");
  }
  if (!text_path.empty()) write_file(text_path, render(fit.pi_hat, names) + "\n");
  if (!trace_path.empty()) {
    nlohmann::json tr = nlohmann::json::parse(fit.search.trace.to_json(names));
    write_file(trace_path, with_audit(std::move(tr), config).dump(2) + "\n");
  }
  std::cerr << "fit: value " << fit.search.value << ", cost " << fit.cost_hat << ", length "
            << fit.pi_hat.length() << "\n";
  return 0;
}

int cmd_evaluate(const CommonDataArgs& data_args, const FitArgs& fit_args, int bootstrap,
                 double level, const std::string& out_path) {
  const Dataset ds = data_args.load();
  BootstrapConfig bc;
  bc.replicates = bootstrap;
  bc.level = level;
  bc.seed = fit_args.seed;
  const ValueReport report = bootstrap_corrected_value(ds, bc, fit_args.spec(ds));
  const RenderNames names = names_from(ds);

  nlohmann::json config = fit_args.config_json();
  config["bootstrap"] = bootstrap;
  config["level"] = level;
  nlohmann::json doc = nlohmann::json::parse(report.to_json(names));
  doc = with_audit(std::move(doc), config);

  std::ostringstream block;
  block << "Estimated regime\n----------------\n"
        << render(report.regime, names) << "\n\n"
        << "Estimated value          " << report.value << "\n"
        << "Bootstrap bias           " << report.bias
        << (report.logit_scale ? "  (logit scale)" : "") << "\n"
        << "Bias-corrected value     " << report.corrected << "\n"
        << "Std. error               " << report.sigma << "\n"
        << static_cast<int>(level * 100) << "% prediction interval  [" << report.lower << ", "
        << report.upper << "]\n"
        << "Bootstrap replicates     " << report.replicates_used << " used, "
        << report.replicates_dropped << " dropped\n";
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
    std::cerr << block.str();
  } else {
    write_file(out_path, doc.dump(2) + "\n");
    std::cout << block.str();
  }
  return 0;
}

int cmd_mincost(const std::string& regime_path, const std::string& data_path,
                const std::string& costs_path, const std::string& out_path,
                const std::string& report_path) {
  std::ifstream in(regime_path);
  if (!in) throw_io("cannot open '" + regime_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RenderNames names;
  const DecisionList pi = regime_from_json(buf.str(), &names);

  const Eigen::MatrixXd X = load_columns_csv(data_path, names.covariates);

  CostModel costs;
  if (!costs_path.empty()) {
    costs.covariate_costs.assign(names.covariates.size(), 1.0);
    std::ifstream cin(costs_path);
    if (!cin) throw_io("cannot open '" + costs_path + "'");
    std::string line;
    while (std::getline(cin, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw_validation("cost file line needs 'name,cost'");
      const std::string name = line.substr(0, comma);
      const double c = std::stod(line.substr(comma + 1));
      const auto it = std::find(names.covariates.begin(), names.covariates.end(), name);
      if (it == names.covariates.end()) throw_validation("unknown covariate '" + name + "'");
      if (c < 0.0) throw_validation("costs must be nonnegative");
      costs.covariate_costs[static_cast<std::size_t>(it - names.covariates.begin())] = c;
    }
  }

  const MinCostResult res = min_cost_equivalent(pi, X, costs);
  nlohmann::json doc = nlohmann::json::parse(regime_to_json(res.list, names));
  doc["empirical_cost"] = res.cost;
  doc["input_cost"] = empirical_cost(pi, X, costs);
  doc["nodes_visited"] = res.nodes_visited;
  doc = with_audit(std::move(doc),
                   {{"regime", regime_path}, {"data", data_path}, {"costs", costs_path}});
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_file(out_path, doc.dump(2) + "\n");
  }
  if (!report_path.empty()) {
    nlohmann::json rep{{"input_cost", empirical_cost(pi, X, costs)},
                       {"output_cost", res.cost},
                       {"nodes_visited", res.nodes_visited},
                       {"incumbent_costs", res.incumbent_costs},
                       {"equivalent", sample_equivalence_check(pi, res.list, X)}};
    write_file(report_path, rep.dump(2) + "\n");
  }
  std::cerr << "mincost: " << empirical_cost(pi, X, costs) << " -> " << res.cost << "\n";
  return 0;
}

int cmd_score(const std::string& regime_path, const std::string& data_path,
              const std::string& out_path) {
  std::ifstream in(regime_path);
  if (!in) throw_io("cannot open '" + regime_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  RenderNames names;
  const DecisionList pi = regime_from_json(buf.str(), &names);

  const Eigen::MatrixXd X = load_columns_csv(data_path, names.covariates);

  std::ostringstream out;
  out << "recommendation,covariates_needed\n";
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::RowVectorXd x = X.row(i);
    // Short-circuit evaluation: only covariates of the clauses actually
    // checked are measured.
    std::vector<char> needed(names.covariates.size(), 0);
    int arm = pi.default_action;
    for (const Clause& cl : pi.clauses) {
      needed[cl.condition.col1] = 1;
      if (!cl.condition.is_single()) needed[cl.condition.col2] = 1;
      if (cl.condition.contains(x)) {
        arm = cl.action;
        break;
      }
    }
    out << names.treatments[arm - 1] << ",\"";
    bool first = true;
    for (std::size_t j = 0; j < needed.size(); ++j) {
      if (!needed[j]) continue;
      if (!first) out << ";";
      out << names.covariates[j];
      first = false;
    }
    out << "\"\n";
  }
  if (out_path.empty()) {
    std::cout << out.str();
  } else {
    write_file(out_path, out.str());
  }
  return 0;
}

int cmd_simulate(const std::string& setting, const std::string& outcome, int p, int reps,
                 std::uint64_t seed, Eigen::Index n, Eigen::Index test_n, int grid_k,
                 const std::string& mode, double alpha, int l_max, const std::string& out_path,
                 const std::string& csv_path) {
  const OutcomeKind kind = outcome == "bin" ? OutcomeKind::Binary : OutcomeKind::Continuous;
  const SimSetting sim = SimSetting::make(SimSetting::parse_id(setting), kind, p);
  SimConfig cfg;
  cfg.reps = reps;
  cfg.seed = seed;
  cfg.n = n;
  cfg.test_n = test_n;
  cfg.grid_k = grid_k;
  cfg.search.alpha = alpha;
  cfg.search.l_max = l_max;

  nlohmann::json doc;
  nlohmann::json config{{"setting", setting}, {"outcome", outcome}, {"p", p},
                        {"reps", reps},       {"seed", seed},       {"grid_k", grid_k},
                        {"alpha", alpha},     {"l_max", l_max},
                        {"test_n", static_cast<std::int64_t>(test_n)}};
  std::ostringstream csv;
  if (mode == "study") {
    const StudyResult res = run_study(sim, cfg, EstimatorKind::Both);
    doc = nlohmann::json::parse(res.to_json());
    csv << "setting,outcome,p,n,estimator,value,cost,tpr,fpr,pr_best,loss\n";
    csv << res.setting.roman() << "," << outcome << "," << p << "," << res.n << ",dl,"
        << res.dl.mean_value << "," << res.dl.mean_cost << "," << res.dl.tpr << ","
        << res.dl.fpr << "," << res.dl.pr_best << "," << res.dl.loss << "\n";
    if (res.qlinear) {
      csv << res.setting.roman() << "," << outcome << "," << p << "," << res.n << ",qlinear,"
          << res.qlinear->mean_value << "," << res.qlinear->mean_cost << ",,,"
          << res.qlinear->pr_best << "," << res.qlinear->loss << "\n";
    }
  } else if (mode == "consistency") {
    const Eigen::Index nn = n > 0 ? n : 10000;
    const ConsistencyRow row = consistency_probe(sim, nn, cfg);
    doc = {{"setting", sim.roman()},
           {"n", static_cast<std::int64_t>(row.n)},
           {"loss", row.loss},
           {"pr_best", row.pr_best},
           {"correct", row.correct},
           {"n_mse1", row.n_mse1},
           {"n_mse2", row.n_mse2},
           {"failures", row.failures}};
    csv << "setting,n,loss,pr_best,correct,n_mse1,n_mse2\n"
        << sim.roman() << "," << row.n << "," << row.loss << "," << row.pr_best << ","
        << row.correct << "," << row.n_mse1 << "," << row.n_mse2 << "\n";
  } else {  // alpha
    const auto rows = alpha_sensitivity(sim, cfg);
    doc["setting"] = sim.roman();
    doc["agreements"] = nlohmann::json::array();
    csv << "gate1,gate2,agreement\n";
    for (const auto& r : rows) {
      doc["agreements"].push_back(
          {{"gate1", r.gate1}, {"gate2", r.gate2}, {"agreement", r.agreement}});
      csv << r.gate1 << "," << r.gate2 << "," << r.agreement << "\n";
    }
  }
  doc = with_audit(std::move(doc), config);
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_file(out_path, doc.dump(2) + "\n");
  }
  if (!csv_path.empty()) write_file(csv_path, csv.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable treatment regimes as decision lists"};
  app.set_version_flag("--version", std::string("declist ") + DECLIST_VERSION);
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "cap worker threads (1 reproduces parallel runs)");

  // fit
  auto* fit = app.add_subcommand("fit", "estimate a decision-list regime from CSV data");
  CommonDataArgs fit_data;
  fit_data.attach(fit);
  FitArgs fit_args;
  fit_args.attach(fit);
  std::string fit_out, fit_text, fit_trace;
  fit->add_option("--out", fit_out, "regime JSON output path (default stdout)");
  fit->add_option("--text", fit_text, "rendered if-then text output path");
  fit->add_option("--trace", fit_trace, "search trace JSON output path");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "bias-corrected value and prediction interval");
  CommonDataArgs ev_data;
  ev_data.attach(ev);
  FitArgs ev_args;
  ev_args.attach(ev);
  int ev_boot = 200;
  double ev_level = 0.95;
  std::string ev_out;
  ev->add_option("--bootstrap", ev_boot, "number of weighted-bootstrap replicates");
  ev->add_option("--level", ev_level, "prediction-interval coverage level");
  ev->add_option("--out", ev_out, "report JSON output path (default stdout)");

  // mincost
  auto* mc = app.add_subcommand("mincost", "minimal-cost equivalent list");
  std::string mc_regime, mc_data, mc_costs, mc_out, mc_report;
  mc->add_option("--regime", mc_regime, "regime JSON")->required();
  mc->add_option("--data", mc_data, "dataset CSV")->required();
  mc->add_option("--costs", mc_costs, "per-covariate cost file (name,cost per line)");
  mc->add_option("--out", mc_out, "regime JSON output path (default stdout)");
  mc->add_option("--report", mc_report, "cost report JSON path");

  // score
  auto* sc = app.add_subcommand("score", "per-row recommendations for a fitted regime");
  std::string sc_regime, sc_data, sc_out;
  sc->add_option("--regime", sc_regime, "regime JSON")->required();
  sc->add_option("--data", sc_data, "covariate CSV")->required();
  sc->add_option("--out", sc_out, "recommendations CSV path (default stdout)");

  // simulate
  auto* si = app.add_subcommand("simulate", "Monte Carlo experiments");
  std::string si_setting = "I", si_outcome = "cont", si_mode = "study";
  int si_p = 10, si_reps = 100, si_grid_k = 0, si_lmax = 10;
  std::uint64_t si_seed = 1;
  long long si_n = 0, si_testn = 100000;
  double si_alpha = 0.05;
  std::string si_out, si_csv;
  si->add_option("--setting", si_setting, "I..VII")->required();
  si->add_option("--outcome", si_outcome, "cont|bin")->check(CLI::IsMember({"cont", "bin"}));
  si->add_option("--p", si_p, "covariate dimension (10 or 50 in the tables)");
  si->add_option("--reps", si_reps, "Monte Carlo replicates");
  si->add_option("--seed", si_seed, "seed");
  si->add_option("--n", si_n, "training sample size (0 = setting default)");
  si->add_option("--test-n", si_testn, "test draws for value/cost evaluation");
  si->add_option("--grid-k", si_grid_k, "cutoff percentile count (0 = default policy)");
  si->add_option("--alpha", si_alpha, "stopping-gate significance level");
  si->add_option("--l-max", si_lmax, "maximum list length");
  si->add_option("--mode", si_mode, "study|consistency|alpha")
      ->check(CLI::IsMember({"study", "consistency", "alpha"}));
  si->add_option("--out", si_out, "results JSON path (default stdout)");
  si->add_option("--csv", si_csv, "optional CSV emission for plotting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message and usage hint
    return 2;
  }
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*fit) return cmd_fit(fit_data, fit_args, fit_out, fit_text, fit_trace);
    if (*ev) return cmd_evaluate(ev_data, ev_args, ev_boot, ev_level, ev_out);
    if (*mc) return cmd_mincost(mc_regime, mc_data, mc_costs, mc_out, mc_report);
    if (*sc) return cmd_score(sc_regime, sc_data, sc_out);
    if (*si) {
      return cmd_simulate(si_setting, si_outcome, si_p, si_reps, si_seed, si_n, si_testn,
                          si_grid_k, si_mode, si_alpha, si_lmax, si_out, si_csv);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
