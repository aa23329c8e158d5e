#include "declist/regime.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "declist/error.hpp"

namespace declist {

namespace {

// sense of atom1 / atom2 per form; forms 2..5 AND, 6..9 OR.
constexpr std::array<Sense, 11> kSense1 = {
    Sense::Le,  // unused slot 0
    Sense::Le, Sense::Le, Sense::Le, Sense::Gt, Sense::Gt,
    Sense::Le, Sense::Le, Sense::Gt, Sense::Gt, Sense::Gt};
constexpr std::array<Sense, 11> kSense2 = {
    Sense::Le,  // unused slot 0
    Sense::Le,  // unused (single)
    Sense::Le, Sense::Gt, Sense::Le, Sense::Gt,
    Sense::Le, Sense::Gt, Sense::Le, Sense::Gt,
    Sense::Le};  // unused (single)
constexpr std::array<int, 11> kNegatedForm = {0, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1};

int pair_form(Sense s1, Sense s2, bool conjunction) {
  if (conjunction) {
    if (s1 == Sense::Le) return s2 == Sense::Le ? 2 : 3;
    return s2 == Sense::Le ? 4 : 5;
  }
  if (s1 == Sense::Le) return s2 == Sense::Le ? 6 : 7;
  return s2 == Sense::Le ? 8 : 9;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw_validation("cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

Atom Condition::atom1() const { return {col1, tau1, kSense1[form]}; }
Atom Condition::atom2() const { return {col2, tau2, kSense2[form]}; }

bool Condition::contains(double x1, double x2) const {
  const bool t1 = kSense1[form] == Sense::Le ? x1 <= tau1 : x1 > tau1;
  if (is_single()) return t1;
  const bool t2 = kSense2[form] == Sense::Le ? x2 <= tau2 : x2 > tau2;
  return is_conjunction() ? (t1 && t2) : (t1 || t2);
}

bool Condition::contains(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return contains(x[col1], is_single() ? 0.0 : x[col2]);
}

Condition make_single(int col, double tau, Sense sense) {
  Condition c;
  c.form = sense == Sense::Le ? 1 : 10;
  c.col1 = col;
  c.tau1 = tau;
  return c;
}

Condition make_pair(Atom a, Atom b, bool conjunction) {
  if (a.col == b.col) throw_validation("pair condition needs two distinct covariates");
  if (a.col > b.col) std::swap(a, b);
  Condition c;
  c.form = pair_form(a.sense, b.sense, conjunction);
  c.col1 = a.col;
  c.tau1 = a.threshold;
  c.col2 = b.col;
  c.tau2 = b.threshold;
  return c;
}

Condition negate(const Condition& c) {
  Condition out = c;
  out.form = kNegatedForm[c.form];
  return out;
}

int DecisionList::evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  for (const Clause& cl : clauses) {
    if (cl.condition.contains(x)) return cl.action;
  }
  return default_action;
}

std::vector<int> DecisionList::evaluate_all(const Eigen::MatrixXd& covariates) const {
  std::vector<int> rec(covariates.rows());
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    rec[i] = evaluate(covariates.row(i));
  }
  return rec;
}

std::vector<int> DecisionList::used_covariates() const {
  std::set<int> cols;
  for (const Clause& cl : clauses) {
    cols.insert(cl.condition.col1);
    if (!cl.condition.is_single()) cols.insert(cl.condition.col2);
  }
  return {cols.begin(), cols.end()};
}

std::vector<double> prefix_costs(const DecisionList& pi, const CostModel& costs) {
  std::vector<double> out(pi.length() + 1, 0.0);
  std::set<int> seen;
  double acc = 0.0;
  for (int l = 0; l < pi.length(); ++l) {
    const Condition& c = pi.clauses[l].condition;
    if (seen.insert(c.col1).second) acc += costs.cost_of(c.col1);
    if (!c.is_single() && seen.insert(c.col2).second) acc += costs.cost_of(c.col2);
    out[l + 1] = acc;
  }
  return out;
}

double empirical_cost(const DecisionList& pi, const Eigen::MatrixXd& covariates,
                      const CostModel& costs) {
  if (pi.length() == 0) return 0.0;
  const std::vector<double> nl = prefix_costs(pi, costs);
  double total = 0.0;
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    int caught = pi.length();  // default region pays N_L
    for (int l = 0; l < pi.length(); ++l) {
      if (pi.clauses[l].condition.contains(covariates.row(i))) {
        caught = l + 1;
        break;
      }
    }
    total += nl[caught];
  }
  return total / static_cast<double>(covariates.rows());
}

RenderNames default_names(int p, int m) {
  RenderNames names;
  for (int j = 1; j <= p; ++j) names.covariates.push_back("x" + std::to_string(j));
  for (int a = 1; a <= m; ++a) names.treatments.push_back(std::to_string(a));
  return names;
}

namespace {

std::string render_atom(const Atom& a, const RenderNames& names) {
  return names.covariates[a.col] + (a.sense == Sense::Le ? " <= " : " > ") +
         format_double(a.threshold);
}

}  // namespace

std::string render_condition(const Condition& c, const RenderNames& names) {
  std::string s = render_atom(c.atom1(), names);
  if (!c.is_single()) {
    s += c.is_conjunction() ? " and " : " or ";
    s += render_atom(c.atom2(), names);
  }
  return s;
}

std::string render(const DecisionList& pi, const RenderNames& names) {
  std::ostringstream out;
  if (pi.length() == 0) {
    out << "Everyone " << names.treatments[pi.default_action - 1] << ".";
    return out.str();
  }
  for (int l = 0; l < pi.length(); ++l) {
    out << (l == 0 ? "If " : "else if ") << render_condition(pi.clauses[l].condition, names)
        << " then " << names.treatments[pi.clauses[l].action - 1] << ";\n";
  }
  out << "else " << names.treatments[pi.default_action - 1] << ".";
  return out.str();
}

namespace {

int lookup_name(const std::vector<std::string>& names, const std::string& token,
                const char* what) {
  auto it = std::find(names.begin(), names.end(), token);
  if (it == names.end()) throw_validation(std::string("unknown ") + what + " '" + token + "'");
  return static_cast<int>(it - names.begin());
}

// Parses "<name> <= <num>" or "<name> > <num>", matching <name> against the
// known covariate names (longest match wins, so names may contain spaces).
Atom parse_atom(const std::string& text, const RenderNames& names) {
  std::size_t best_len = 0;
  int best_col = -1;
  for (std::size_t j = 0; j < names.covariates.size(); ++j) {
    const std::string& nm = names.covariates[j];
    if (text.size() > nm.size() && text.compare(0, nm.size(), nm) == 0 &&
        text[nm.size()] == ' ' && nm.size() > best_len) {
      best_len = nm.size();
      best_col = static_cast<int>(j);
    }
  }
  if (best_col < 0) throw_validation("cannot parse atom '" + text + "'");
  std::string rest = text.substr(best_len + 1);
  Sense sense;
  if (rest.rfind("<= ", 0) == 0) {
    sense = Sense::Le;
    rest = rest.substr(3);
  } else if (rest.rfind("> ", 0) == 0) {
    sense = Sense::Gt;
    rest = rest.substr(2);
  } else {
    throw_validation("cannot parse comparison in '" + text + "'");
  }
  return {best_col, parse_double(rest), sense};
}

Condition parse_condition(const std::string& text, const RenderNames& names) {
  // A single split point is valid: thresholds are numbers, so " and " / " or "
  // can only appear between atoms (covariate names must not embed them).
  auto and_pos = text.find(" and ");
  auto or_pos = text.find(" or ");
  if (and_pos != std::string::npos) {
    return make_pair(parse_atom(text.substr(0, and_pos), names),
                     parse_atom(text.substr(and_pos + 5), names), true);
  }
  if (or_pos != std::string::npos) {
    return make_pair(parse_atom(text.substr(0, or_pos), names),
                     parse_atom(text.substr(or_pos + 4), names), false);
  }
  const Atom a = parse_atom(text, names);
  return make_single(a.col, a.threshold, a.sense);
}

}  // namespace

DecisionList parse_rendered(const std::string& text, const RenderNames& names) {
  DecisionList pi;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("Everyone ", 0) == 0) {
      std::string label = line.substr(9);
      if (!label.empty() && label.back() == '.') label.pop_back();
      pi.default_action = lookup_name(names.treatments, label, "treatment") + 1;
      return pi;
    }
    std::string body;
    if (line.rfind("If ", 0) == 0) {
      body = line.substr(3);
    } else if (line.rfind("else if ", 0) == 0) {
      body = line.substr(8);
    } else if (line.rfind("else ", 0) == 0) {
      std::string label = line.substr(5);
      if (!label.empty() && label.back() == '.') label.pop_back();
      pi.default_action = lookup_name(names.treatments, label, "treatment") + 1;
      return pi;
    } else {
      throw_validation("cannot parse line '" + line + "'");
    }
    if (!body.empty() && body.back() == ';') body.pop_back();
    const auto then_pos = body.rfind(" then ");
    if (then_pos == std::string::npos) throw_validation("missing 'then' in '" + line + "'");
    Clause cl;
    cl.condition = parse_condition(body.substr(0, then_pos), names);
    cl.action = lookup_name(names.treatments, body.substr(then_pos + 6), "treatment") + 1;
    pi.clauses.push_back(cl);
  }
  throw_validation("decision-list text has no default clause");
}

std::string regime_to_json(const DecisionList& pi, const RenderNames& names, int indent) {
  nlohmann::json doc;
  doc["clauses"] = nlohmann::json::array();
  for (const Clause& cl : pi.clauses) {
    nlohmann::json atoms = nlohmann::json::array();
    auto push_atom = [&](const Atom& a) {
      atoms.push_back({{"col", names.covariates[a.col]},
                       {"op", a.sense == Sense::Le ? "<=" : ">"},
                       {"threshold", a.threshold}});
    };
    push_atom(cl.condition.atom1());
    if (!cl.condition.is_single()) push_atom(cl.condition.atom2());
    doc["clauses"].push_back({{"form", cl.condition.form},
                              {"atoms", std::move(atoms)},
                              {"action", names.treatments[cl.action - 1]}});
  }
  doc["default"] = names.treatments[pi.default_action - 1];
  doc["covariates"] = names.covariates;
  doc["treatments"] = names.treatments;
  if (pi.estimated_value) doc["estimated_value"] = *pi.estimated_value;
  return doc.dump(indent);
}

DecisionList regime_from_json(const std::string& json_text, RenderNames* names_out) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw_io(std::string("invalid regime JSON: ") + e.what());
  }
  try {
    RenderNames names;
    names.covariates = doc.at("covariates").get<std::vector<std::string>>();
    names.treatments = doc.at("treatments").get<std::vector<std::string>>();
    DecisionList pi;
    pi.default_action = lookup_name(names.treatments, doc.at("default"), "treatment") + 1;
    for (const auto& jcl : doc.at("clauses")) {
      std::vector<Atom> atoms;
      for (const auto& ja : jcl.at("atoms")) {
        Atom a;
        a.col = lookup_name(names.covariates, ja.at("col"), "covariate");
        a.sense = ja.at("op") == "<=" ? Sense::Le : Sense::Gt;
        a.threshold = ja.at("threshold").get<double>();
        atoms.push_back(a);
      }
      Clause cl;
      cl.action = lookup_name(names.treatments, jcl.at("action"), "treatment") + 1;
      const int form = jcl.at("form").get<int>();
      if (atoms.size() == 1) {
        cl.condition = make_single(atoms[0].col, atoms[0].threshold, atoms[0].sense);
      } else if (atoms.size() == 2) {
        cl.condition = make_pair(atoms[0], atoms[1], form >= 2 && form <= 5);
      } else {
        throw_validation("clause must have 1 or 2 atoms");
      }
      if (cl.condition.form != form) {
        throw_validation("clause form tag " + std::to_string(form) +
                         " inconsistent with atoms (expected " +
                         std::to_string(cl.condition.form) + ")");
      }
      pi.clauses.push_back(cl);
    }
    if (doc.contains("estimated_value")) pi.estimated_value = doc["estimated_value"].get<double>();
    if (names_out) *names_out = std::move(names);
    return pi;
  } catch (const nlohmann::json::exception& e) {
    throw_validation(std::string("malformed regime JSON: ") + e.what());
  }
}

}  // namespace declist
