#include "declist/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "declist/error.hpp"

namespace declist {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  if (cell.empty()) {
    throw_validation("missing value at row " + std::to_string(row) + ", column '" + col + "'");
  }
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw_validation("non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                     ", column '" + col + "'");
  }
  return v;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawCsv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open '" + path + "'");
  RawCsv csv;
  std::string line;
  if (!std::getline(in, line)) throw_validation("empty file '" + path + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split_csv_line(line);
  for (std::size_t a = 0; a < csv.header.size(); ++a) {
    for (std::size_t b = a + 1; b < csv.header.size(); ++b) {
      if (csv.header[a] == csv.header[b]) {
        throw_validation("duplicate column name '" + csv.header[a] + "' in '" + path + "'");
      }
    }
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != csv.header.size()) {
      throw_validation("row " + std::to_string(csv.rows.size() + 2) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(csv.header.size()));
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

int find_col(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw_validation("missing column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

}  // namespace

std::vector<Eigen::Index> Dataset::arm_counts() const {
  std::vector<Eigen::Index> counts(num_arms(), 0);
  for (int a : treatments) ++counts[a - 1];
  return counts;
}

void Dataset::validate() const {
  const Eigen::Index nn = n(), pp = p();
  const int m = num_arms();
  if (nn < 1) throw_validation("dataset has no rows");
  if (pp < 1) throw_validation("dataset has no covariates");
  if (m < 2) throw_validation("need at least 2 treatment arms, found " + std::to_string(m));
  if (static_cast<Eigen::Index>(treatments.size()) != nn || outcomes.size() != nn) {
    throw_validation("treatments/outcomes length mismatch");
  }
  for (int a : treatments) {
    if (a < 1 || a > m) throw_validation("treatment label out of range");
  }
  for (Eigen::Index c : arm_counts()) {
    if (c == 0) throw_validation("some treatment arm has no subjects");
  }
  if (!covariates.allFinite() || !outcomes.allFinite()) {
    throw_validation("non-finite entries in dataset");
  }
  if (outcome_kind == OutcomeKind::Binary) {
    for (Eigen::Index i = 0; i < nn; ++i) {
      if (outcomes[i] != 0.0 && outcomes[i] != 1.0) {
        throw_validation("binary outcome not in {0,1} at row " + std::to_string(i + 1));
      }
    }
  }
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  if (schema.treatment_col.empty() || schema.outcome_col.empty()) {
    throw_validation("schema must name a treatment column and an outcome column");
  }
  RawCsv csv = read_csv(path);
  const int a_col = find_col(csv.header, schema.treatment_col);
  const int y_col = find_col(csv.header, schema.outcome_col);
  if (a_col == y_col) throw_validation("treatment and outcome column coincide");

  Dataset ds;
  ds.outcome_kind = schema.outcome_kind;
  std::vector<int> cov_cols;
  for (int c = 0; c < static_cast<int>(csv.header.size()); ++c) {
    if (c == a_col || c == y_col) continue;
    cov_cols.push_back(c);
    ds.covariate_names.push_back(csv.header[c]);
  }
  if (cov_cols.empty()) throw_validation("no covariate columns in '" + path + "'");

  const Eigen::Index n = static_cast<Eigen::Index>(csv.rows.size());
  const Eigen::Index p = static_cast<Eigen::Index>(cov_cols.size());
  ds.covariates.resize(n, p);
  ds.outcomes.resize(n);
  ds.treatments.resize(n);
  ds.treatment_labels = schema.known_labels;

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = csv.rows[i];
    const std::size_t file_row = static_cast<std::size_t>(i) + 2;  // 1-based + header
    for (Eigen::Index j = 0; j < p; ++j) {
      ds.covariates(i, j) = parse_cell(row[cov_cols[j]], file_row, ds.covariate_names[j]);
    }
    ds.outcomes[i] = parse_cell(row[y_col], file_row, schema.outcome_col);
    const std::string& label = row[a_col];
    if (label.empty()) {
      throw_validation("missing value at row " + std::to_string(file_row) + ", column '" +
                       schema.treatment_col + "'");
    }
    auto it = std::find(ds.treatment_labels.begin(), ds.treatment_labels.end(), label);
    if (it == ds.treatment_labels.end()) {
      if (!schema.known_labels.empty()) {
        throw_validation("unknown treatment level '" + label + "' at row " +
                         std::to_string(file_row));
      }
      // Re-encode labels to 1..m in order of first appearance.
      ds.treatment_labels.push_back(label);
      ds.treatments[i] = static_cast<int>(ds.treatment_labels.size());
    } else {
      ds.treatments[i] = static_cast<int>(it - ds.treatment_labels.begin()) + 1;
    }
  }
  ds.validate();
  return ds;
}

Eigen::MatrixXd load_columns_csv(const std::string& path,
                                 const std::vector<std::string>& columns) {
  RawCsv csv = read_csv(path);
  std::vector<int> cols;
  for (const std::string& name : columns) cols.push_back(find_col(csv.header, name));
  Eigen::MatrixXd values(static_cast<Eigen::Index>(csv.rows.size()),
                         static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      values(i, static_cast<Eigen::Index>(j)) =
          parse_cell(csv.rows[i][cols[j]], static_cast<std::size_t>(i) + 2, columns[j]);
    }
  }
  return values;
}

}  // namespace declist
