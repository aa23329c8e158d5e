#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace declist {

enum class OutcomeKind { Continuous, Binary };

// Column roles for CSV ingestion. Every column that is not the treatment or
// the outcome is taken as a numeric covariate, in file order.
struct CsvSchema {
  std::string treatment_col;            // empty => no treatment column (scoring)
  std::string outcome_col;              // empty => no outcome column (scoring)
  OutcomeKind outcome_kind = OutcomeKind::Continuous;
  // When non-empty, treatment cells must belong to this label set
  // (scoring/validation mode); otherwise labels are collected from the data.
  std::vector<std::string> known_labels;
};

// Rectangular study data: covariates X (n x p), treatments A in {1..m},
// outcomes Y. Immutable after construction; shared freely across threads.
struct Dataset {
  Eigen::MatrixXd covariates;           // n x p
  std::vector<int> treatments;          // 1-based arm labels, length n
  Eigen::VectorXd outcomes;             // length n
  OutcomeKind outcome_kind = OutcomeKind::Continuous;

  std::vector<std::string> covariate_names;   // length p
  std::vector<std::string> treatment_labels;  // length m; index a-1 -> label

  Eigen::Index n() const { return covariates.rows(); }
  Eigen::Index p() const { return covariates.cols(); }
  int num_arms() const { return static_cast<int>(treatment_labels.size()); }

  std::vector<Eigen::Index> arm_counts() const;

  // Enforces the construction invariants (n,p >= 1, m >= 2, labels in range,
  // non-empty arms, binary outcomes in {0,1}, finite entries).
  void validate() const;
};

Dataset load_csv(const std::string& path, const CsvSchema& schema);

// Reads exactly the named columns (in the given order) from a CSV with a
// header row; used when scoring a fitted regime against new data.
Eigen::MatrixXd load_columns_csv(const std::string& path,
                                 const std::vector<std::string>& columns);

}  // namespace declist
