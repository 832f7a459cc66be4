#pragma once

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evmarket/choice.hpp"
#include "evmarket/errors.hpp"
#include "evmarket/investment.hpp"
#include "evmarket/pricing.hpp"
#include "evmarket/welfare.hpp"

namespace evmarket {

/// A fully validated problem instance as read from a scenario file. Scenario
/// files are JSON with // comments allowed; every key must be known and every
/// module-level invariant holds after load.
struct Scenario {
  ChoiceParams params;
  CandidateSet sites;
  CostModel cost;
  std::optional<SubsidySetting> subsidy;
  SolverSettings solver;

  void validate() const {
    params.validate();
    sites.validate();
    cost.validate();
    if (subsidy) subsidy->validate();
    solver.validate();
  }
};

namespace detail {

// 1-based line of the first occurrence of "key" (quoted) in the source text;
// 0 when not found.
inline std::size_t line_of_key(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  const auto pos = text.find(needle);
  if (pos == std::string::npos) return 0;
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n')) + 1;
}

inline void reject_unknown_keys(const nlohmann::json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed,
                                const std::string& text) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) { known = true; break; }
    if (!known) {
      std::ostringstream msg;
      msg << "unknown key \"" << (where.empty() ? key : where + "." + key) << "\"";
      if (const auto line = line_of_key(text, key)) msg << " (line " << line << ")";
      fail(errc::validation, msg.str());
    }
  }
}

inline double require_number(const nlohmann::json& obj, const std::string& where,
                             const char* key, const std::string& text) {
  if (!obj.contains(key)) {
    std::ostringstream msg;
    msg << "missing field \"" << where << "." << key << "\"";
    if (const auto line = line_of_key(text, where.substr(where.rfind('.') + 1)))
      msg << " (object at line " << line << ")";
    fail(errc::validation, msg.str());
  }
  if (!obj[key].is_number()) {
    std::ostringstream msg;
    msg << "field \"" << where << "." << key << "\" must be a number";
    if (const auto line = line_of_key(text, key)) msg << " (line " << line << ")";
    fail(errc::validation, msg.str());
  }
  return obj[key].get<double>();
}

}  // namespace detail

/// Parse and validate a scenario from JSON text. Unknown keys are rejected
/// with the offending key and line; invariant violations cite the rule.
inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(errc::validation, std::string("scenario parse error: ") + e.what());
  }
  if (!doc.is_object()) fail(errc::validation, "scenario root must be an object");
  detail::reject_unknown_keys(doc, "", {"params", "sites", "cost", "subsidy", "solver"}, text);

  Scenario sc;

  if (!doc.contains("params")) fail(errc::validation, "missing field \"params\"");
  if (!doc["params"].is_object()) fail(errc::validation, "field \"params\" must be an object");
  const auto& jp = doc["params"];
  detail::reject_unknown_keys(
      jp, "params",
      {"alpha1", "alpha2", "beta1", "beta2", "phi", "f0", "rho0", "eug", "pg", "pe"}, text);
  sc.params.alpha1 = detail::require_number(jp, "params", "alpha1", text);
  sc.params.alpha2 = detail::require_number(jp, "params", "alpha2", text);
  sc.params.beta1 = detail::require_number(jp, "params", "beta1", text);
  sc.params.beta2 = detail::require_number(jp, "params", "beta2", text);
  sc.params.phi = detail::require_number(jp, "params", "phi", text);
  sc.params.f0 = detail::require_number(jp, "params", "f0", text);
  sc.params.rho0 = detail::require_number(jp, "params", "rho0", text);
  sc.params.eug = detail::require_number(jp, "params", "eug", text);
  sc.params.pg = detail::require_number(jp, "params", "pg", text);
  sc.params.pe = detail::require_number(jp, "params", "pe", text);

  if (!doc.contains("sites")) fail(errc::validation, "missing field \"sites\"");
  if (!doc["sites"].is_array()) fail(errc::validation, "field \"sites\" must be an array");
  for (const auto& js : doc["sites"]) {
    if (!js.is_object()) fail(errc::validation, "every site must be an object");
    detail::reject_unknown_keys(js, "sites[]", {"id", "f", "c"}, text);
    Site site;
    if (!js.contains("id") || !js["id"].is_string())
      fail(errc::validation, "every site needs a string \"id\"");
    site.id = js["id"].get<std::string>();
    site.f = detail::require_number(js, "sites[" + site.id + "]", "f", text);
    site.c = detail::require_number(js, "sites[" + site.id + "]", "c", text);
    sc.sites.sites.push_back(std::move(site));
  }

  if (!doc.contains("cost")) fail(errc::validation, "missing field \"cost\"");
  if (!doc["cost"].is_object()) fail(errc::validation, "field \"cost\" must be an object");
  const auto& jc = doc["cost"];
  detail::reject_unknown_keys(jc, "cost", {"f0Capital", "gamma", "budget"}, text);
  sc.cost.f0_capital = detail::require_number(jc, "cost", "f0Capital", text);
  sc.cost.gamma = detail::require_number(jc, "cost", "gamma", text);
  if (jc.contains("budget")) {
    if (jc["budget"].is_string()) {
      const auto b = jc["budget"].get<std::string>();
      if (b != "inf") fail(errc::validation, "cost.budget must be a number or \"inf\"");
      sc.cost.budget = std::numeric_limits<double>::infinity();
    } else if (jc["budget"].is_number()) {
      sc.cost.budget = jc["budget"].get<double>();
    } else {
      fail(errc::validation, "cost.budget must be a number or \"inf\"");
    }
  }

  if (doc.contains("subsidy")) {
    if (!doc["subsidy"].is_object()) fail(errc::validation, "field \"subsidy\" must be an object");
    const auto& js = doc["subsidy"];
    detail::reject_unknown_keys(js, "subsidy", {"evSubsidy", "capitalSubsidy"}, text);
    SubsidySetting sub;
    sub.ev_subsidy = detail::require_number(js, "subsidy", "evSubsidy", text);
    sub.capital_subsidy = detail::require_number(js, "subsidy", "capitalSubsidy", text);
    sc.subsidy = sub;
  }

  if (doc.contains("solver")) {
    if (!doc["solver"].is_object()) fail(errc::validation, "field \"solver\" must be an object");
    const auto& js = doc["solver"];
    detail::reject_unknown_keys(js, "solver", {"gridBase", "maxBracketExp", "tolAbs", "fdRelStep"},
                                text);
    if (js.contains("gridBase")) sc.solver.grid_base = detail::require_number(js, "solver", "gridBase", text);
    if (js.contains("maxBracketExp")) {
      if (!js["maxBracketExp"].is_number_integer())
        fail(errc::validation, "field \"solver.maxBracketExp\" must be an integer");
      sc.solver.max_bracket_exp = js["maxBracketExp"].get<int>();
    }
    if (js.contains("tolAbs")) sc.solver.tol_abs = detail::require_number(js, "solver", "tolAbs", text);
    if (js.contains("fdRelStep")) sc.solver.fd_rel_step = detail::require_number(js, "solver", "fdRelStep", text);
  }

  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["params"] = {{"alpha1", sc.params.alpha1}, {"alpha2", sc.params.alpha2},
                 {"beta1", sc.params.beta1},   {"beta2", sc.params.beta2},
                 {"phi", sc.params.phi},       {"f0", sc.params.f0},
                 {"rho0", sc.params.rho0},     {"eug", sc.params.eug},
                 {"pg", sc.params.pg},         {"pe", sc.params.pe}};
  j["sites"] = nlohmann::json::array();
  for (const Site& s : sc.sites.sites)
    j["sites"].push_back({{"id", s.id}, {"f", s.f}, {"c", s.c}});
  j["cost"] = {{"f0Capital", sc.cost.f0_capital}, {"gamma", sc.cost.gamma}};
  if (std::isinf(sc.cost.budget))
    j["cost"]["budget"] = "inf";
  else
    j["cost"]["budget"] = sc.cost.budget;
  if (sc.subsidy)
    j["subsidy"] = {{"evSubsidy", sc.subsidy->ev_subsidy},
                    {"capitalSubsidy", sc.subsidy->capital_subsidy}};
  j["solver"] = {{"gridBase", sc.solver.grid_base},
                 {"maxBracketExp", sc.solver.max_bracket_exp},
                 {"tolAbs", sc.solver.tol_abs},
                 {"fdRelStep", sc.solver.fd_rel_step}};
  return j;
}

/// FNV-1a 64-bit content hash of the scenario bytes, as 16 hex digits.
inline std::string scenario_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace evmarket
