#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "declist/dataset.hpp"
#include "declist/error.hpp"
#include "declist/simlab.hpp"

using namespace declist;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = std::string("/tmp/declist_") + name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_csv re-encodes treatment labels by first appearance") {
  const std::string path = write_temp("basic.csv",
                                      "x1,x2,a,y\n"
                                      "0.1,1.0,T,2.5\n"
                                      "0.2,2.0,C,1.5\n"
                                      "0.3,3.0,T,3.5\n"
                                      "0.4,4.0,C,0.5\n");
  CsvSchema schema;
  schema.treatment_col = "a";
  schema.outcome_col = "y";
  const Dataset ds = load_csv(path, schema);
  CHECK(ds.n() == 4);
  CHECK(ds.p() == 2);
  CHECK(ds.num_arms() == 2);
  CHECK(ds.treatment_labels == std::vector<std::string>{"T", "C"});
  CHECK(ds.treatments == std::vector<int>{1, 2, 1, 2});
  CHECK(ds.covariate_names == std::vector<std::string>{"x1", "x2"});
  CHECK(ds.covariates(2, 1) == doctest::Approx(3.0));
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects missing and non-numeric cells") {
  const std::string missing = write_temp("missing.csv",
                                         "x1,a,y\n"
                                         "0.1,T,\n");
  CsvSchema schema;
  schema.treatment_col = "a";
  schema.outcome_col = "y";
  CHECK_THROWS_WITH_AS(load_csv(missing, schema),
                       doctest::Contains("missing value at row 2"), Error);
  std::remove(missing.c_str());

  const std::string bad = write_temp("bad.csv",
                                     "x1,a,y\n"
                                     "zzz,T,1.0\n");
  CHECK_THROWS_AS(load_csv(bad, schema), Error);
  std::remove(bad.c_str());

  const std::string nocol = write_temp("nocol.csv", "x1,a\n1.0,T\n");
  CHECK_THROWS_AS(load_csv(nocol, schema), Error);
  std::remove(nocol.c_str());
}

TEST_CASE("load_csv rejects unknown treatment level against a known label set") {
  const std::string path = write_temp("score.csv",
                                      "x1,a,y\n"
                                      "0.1,T,1.0\n"
                                      "0.2,X,1.0\n");
  CsvSchema schema;
  schema.treatment_col = "a";
  schema.outcome_col = "y";
  schema.known_labels = {"T", "C"};
  CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("unknown treatment level"),
                       Error);
  std::remove(path.c_str());
}

TEST_CASE("binary outcomes must be 0/1") {
  const std::string path = write_temp("bin.csv",
                                      "x1,a,y\n"
                                      "0.1,T,0\n"
                                      "0.2,C,0.5\n");
  CsvSchema schema;
  schema.treatment_col = "a";
  schema.outcome_col = "y";
  schema.outcome_kind = OutcomeKind::Binary;
  CHECK_THROWS_AS(load_csv(path, schema), Error);
  std::remove(path.c_str());
}

TEST_CASE("simulated setting-I dataset: arm counts sum to n") {
  const SimSetting setting = SimSetting::make(1, OutcomeKind::Continuous, 10);
  const Dataset ds = generate(setting, 500, 42);
  const auto counts = ds.arm_counts();
  CHECK(counts.size() == 2);
  CHECK(counts[0] + counts[1] == 500);
  // Uniform randomization: both arms near n/2.
  CHECK(counts[0] > 190);
  CHECK(counts[1] > 190);
}

TEST_CASE("duplicate header names are rejected") {
  const std::string path = write_temp("dup.csv", "x1,x1,a,y\n1,2,T,0.5\n2,3,C,0.2\n");
  CsvSchema schema;
  schema.treatment_col = "a";
  schema.outcome_col = "y";
  CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("duplicate column"), Error);
  std::remove(path.c_str());
}
