#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "declist/pipeline.hpp"
#include "declist/rng.hpp"

namespace declist {

// The seven generative models: covariates are mean-zero Gaussian with
// cov(X_k, X_l) = 4 (1/5)^|k-l|, treatments uniform on {1..m}, and the mean
// response is 2 + x1 + x3 + x5 + x7 + phi(x, a) (expit of that for binary).
struct SimSetting {
  int id = 1;  // 1..7 (I..VII)
  int m = 2;
  int p = 10;
  OutcomeKind outcome_kind = OutcomeKind::Continuous;

  static SimSetting make(int id, OutcomeKind kind, int p = 10);
  static int parse_id(const std::string& roman);  // "I".."VII"
  std::string roman() const;

  double phi(const Eigen::RowVectorXd& x, int a) const;
  double linear_predictor(const Eigen::RowVectorXd& x, int a) const;
  double conditional_mean(const Eigen::RowVectorXd& x, int a) const;
  int pi_opt(const Eigen::RowVectorXd& x) const;
  Eigen::Index default_n() const;
  std::vector<int> signal_covariates() const;  // 0-based
};

Eigen::MatrixXd generate_covariates(Eigen::Index n, int p, Rng& rng);
Dataset generate(const SimSetting& setting, Eigen::Index n, std::uint64_t seed);

// Monte Carlo mean of E{Y | X, A = pi(X)} over the given test draws.
double true_value(const DecisionList& pi, const SimSetting& setting,
                  const Eigen::MatrixXd& test_X);
double true_value_opt(const SimSetting& setting, const Eigen::MatrixXd& test_X);

struct SimConfig {
  int reps = 100;
  std::uint64_t seed = 1;
  Eigen::Index n = 0;        // 0 => setting default
  Eigen::Index test_n = 100000;
  int grid_k = 0;            // 0 => deciles; the consistency probe scales with n
  SearchConfig search;
  bool mincost = true;
  double max_failure_rate = 0.05;
};

struct EstimatorMetrics {
  double mean_value = 0.0;
  double mean_cost = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
  double loss = 0.0;     // R(pi_opt) - mean value
  double pr_best = 0.0;  // P{pi_hat(X) = pi_opt(X)}
  double mean_length = 0.0;
};

struct StudyResult {
  SimSetting setting;
  Eigen::Index n = 0;
  int reps = 0;
  int failures = 0;
  double opt_value = 0.0;
  EstimatorMetrics dl;
  std::optional<EstimatorMetrics> qlinear;
  std::string to_json(int indent = 2) const;
};

enum class EstimatorKind { DecisionListOnly, Both };

StudyResult run_study(const SimSetting& setting, const SimConfig& config,
                      EstimatorKind estimators = EstimatorKind::Both);

// Consistency metrics at one sample size (settings I and V only): proportion
// of replicates recovering the optimal regime's form/covariates, and n * MSE
// of the two cutoffs over those replicates.
struct ConsistencyRow {
  Eigen::Index n = 0;
  double loss = 0.0;
  double pr_best = 0.0;
  double correct = 0.0;
  double n_mse1 = 0.0;
  double n_mse2 = 0.0;
  int failures = 0;
};

ConsistencyRow consistency_probe(const SimSetting& setting, Eigen::Index n,
                                 const SimConfig& config);
std::vector<ConsistencyRow> consistency_probe(const SimSetting& setting,
                                              const std::vector<Eigen::Index>& n_grid,
                                              const SimConfig& config);
// Grid size used by the consistency probe when config.grid_k == 0.
int consistency_grid_k(Eigen::Index n);

// Pairwise recommendation agreement of regimes fitted at different gate
// levels (the stopping rule compares the increment against z_gate * sd).
struct AlphaAgreement {
  double gate1 = 0.0;
  double gate2 = 0.0;
  double agreement = 0.0;
};

std::vector<AlphaAgreement> alpha_sensitivity(const SimSetting& setting, const SimConfig& config,
                                              const std::vector<double>& gate_levels = {0.9, 0.95,
                                                                                        0.99});

}  // namespace declist
