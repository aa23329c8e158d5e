#include <doctest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "declist/inference.hpp"
#include "declist/search.hpp"
#include "declist/simlab.hpp"

using namespace declist;
using nlohmann::json;

namespace {

// Minimal validator for the JSON-Schema subset used by the shipped schemas:
// type, required, properties, items, enum, bounds, minItems/maxItems.
bool validate(const json& schema, const json& doc, std::string* why) {
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && doc.is_object()) || (t == "array" && doc.is_array()) ||
                    (t == "string" && doc.is_string()) || (t == "number" && doc.is_number()) ||
                    (t == "integer" && doc.is_number_integer()) ||
                    (t == "boolean" && doc.is_boolean());
    if (!ok) {
      *why = "type mismatch: expected " + t + ", got " + std::string(doc.type_name());
      return false;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& v : schema["enum"]) found |= (v == doc);
    if (!found) {
      *why = "value " + doc.dump() + " not in enum";
      return false;
    }
  }
  if (doc.is_number()) {
    const double v = doc.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) {
      *why = "below minimum";
      return false;
    }
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) {
      *why = "above maximum";
      return false;
    }
    if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>()) {
      *why = "at or below exclusiveMinimum";
      return false;
    }
    if (schema.contains("exclusiveMaximum") && v >= schema["exclusiveMaximum"].get<double>()) {
      *why = "at or above exclusiveMaximum";
      return false;
    }
  }
  if (doc.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!doc.contains(key.get<std::string>())) {
          *why = "missing required key " + key.get<std::string>();
          return false;
        }
      }
    }
    if (schema.contains("properties")) {
      for (const auto& [key, sub] : schema["properties"].items()) {
        if (!doc.contains(key)) continue;
        if (!validate(sub, doc[key], why)) {
          *why = key + ": " + *why;
          return false;
        }
      }
    }
  }
  if (doc.is_array()) {
    if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) {
      *why = "too few items";
      return false;
    }
    if (schema.contains("maxItems") && doc.size() > schema["maxItems"].get<std::size_t>()) {
      *why = "too many items";
      return false;
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        if (!validate(schema["items"], doc[i], why)) {
          *why = "[" + std::to_string(i) + "]: " + *why;
          return false;
        }
      }
    }
  }
  return true;
}

json load_schema(const std::string& name) {
  std::ifstream in(std::string(DECLIST_SCHEMA_DIR) + "/" + name);
  REQUIRE(in.good());
  json schema;
  in >> schema;
  return schema;
}

void check_valid(const json& schema, const json& doc) {
  std::string why;
  const bool ok = validate(schema, doc, &why);
  if (!ok) FAIL_CHECK("schema violation: " << why);
}

}  // namespace

TEST_CASE("fitted artifacts validate against the shipped schemas") {
  const SimSetting setting = SimSetting::make(1, OutcomeKind::Continuous, 10);
  const Dataset ds = generate(setting, 300, 8);
  FitSpec spec;
  spec.outcome = OutcomeSpec::for_outcome(ds.outcome_kind, true);
  spec.search.min_region_size = 30;
  const FitResult fit = fit_pipeline(ds, spec);
  const RenderNames names = names_from(ds);

  SUBCASE("regime") {
    const json doc = json::parse(regime_to_json(fit.pi_hat, names));
    check_valid(load_schema("regime.schema.json"), doc);
  }
  SUBCASE("trace") {
    const json doc = json::parse(fit.search.trace.to_json(names));
    check_valid(load_schema("trace.schema.json"), doc);
  }
  SUBCASE("value report") {
    BootstrapConfig bc;
    bc.replicates = 5;
    const ValueReport report = bootstrap_corrected_value(ds, bc, spec);
    const json doc = json::parse(report.to_json(names));
    check_valid(load_schema("value_report.schema.json"), doc);
  }
  SUBCASE("study result") {
    SimConfig cfg;
    cfg.reps = 2;
    cfg.test_n = 5000;
    const StudyResult study = run_study(setting, cfg, EstimatorKind::Both);
    const json doc = json::parse(study.to_json());
    check_valid(load_schema("study_result.schema.json"), doc);
  }
  SUBCASE("schema rejects malformed documents") {
    json doc = json::parse(regime_to_json(fit.pi_hat, names));
    doc.erase("default");
    std::string why;
    CHECK_FALSE(validate(load_schema("regime.schema.json"), doc, &why));
  }
}
