#pragma once

#include <cstdio>
#include <fstream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "evmarket/errors.hpp"
#include "evmarket/investment.hpp"
#include "evmarket/montecarlo.hpp"
#include "evmarket/pricing.hpp"
#include "evmarket/welfare.hpp"

namespace evmarket {

/// %.17g rendering used for all CSV numbers.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline nlohmann::json to_json(const PricingSolution& sol) {
  return {{"v", sol.v},
          {"r", sol.r},
          {"kappa", sol.kappa},
          {"eta", sol.eta},
          {"p0", sol.p0},
          {"stationShareSum", sol.station_share_sum},
          {"pi", sol.pi},
          {"h", sol.h},
          {"drdv", sol.drdv},
          {"focResidual", sol.foc_residual}};
}

inline nlohmann::json to_json(const InvestmentPlan& plan) {
  nlohmann::json j;
  j["selectedIds"] = plan.selected_ids();
  j["nStations"] = plan.n_stations();
  j["v"] = plan.v;
  j["prices"] = plan.prices;
  j["capitalCost"] = plan.capital_cost;
  j["netProfit"] = plan.net_profit;
  j["deferred"] = plan.deferred;
  if (plan.pricing) j["pricing"] = to_json(*plan.pricing);
  return j;
}

inline nlohmann::json to_json(const WelfareReport& rep) {
  return {{"vMarket", rep.v_market},
          {"vPlanner", rep.v_planner},
          {"nMarket", rep.n_market},
          {"nPlanner", rep.n_planner},
          {"consumerSurplusMarket", rep.consumer_surplus_market},
          {"consumerSurplusPlanner", rep.consumer_surplus_planner},
          {"socialWelfareMarket", rep.welfare_market},
          {"socialWelfarePlanner", rep.welfare_planner},
          {"gap", rep.gap},
          {"degenerateTies", rep.degenerate_ties},
          {"marketPlan", to_json(rep.market_plan)},
          {"plannerPlan", to_json(rep.planner_plan)}};
}

inline nlohmann::json to_json(const SimReport& rep) {
  return {{"n", rep.n},
          {"seed", rep.seed},
          {"nEv", rep.n_ev},
          {"etaHat", rep.eta_hat},
          {"stationSharesHat", rep.station_shares_hat},
          {"stdErrs", rep.std_errs}};
}

inline nlohmann::json to_json(const ValidationReport& rep) {
  nlohmann::json checks = nlohmann::json::array();
  for (const StatCheck& c : rep.checks)
    checks.push_back({{"name", c.name},
                      {"simulated", c.simulated},
                      {"analytic", c.analytic},
                      {"stdErr", c.std_err},
                      {"z", c.z},
                      {"pass", c.pass}});
  return {{"checks", checks}, {"allPass", rep.all_pass}};
}

inline nlohmann::json to_json(const DiagnosticsRow& row) {
  return {{"v", row.v},         {"r", row.r}, {"rOverLnV", row.r_over_lnv},
          {"a2VDrdv", row.a2_v_drdv}, {"h", row.h}, {"eta", row.eta},
          {"p0", row.p0}};
}

inline nlohmann::json to_json(const SweepRow& row) {
  return {{"evSubsidy", row.ev_subsidy},
          {"capitalSubsidy", row.capital_subsidy},
          {"eta", row.eta},
          {"nMarket", row.n_market},
          {"nPlanner", row.n_planner},
          {"pi", row.pi},
          {"socialWelfare", row.social_welfare}};
}

/// Fixed column order: v,r,r_over_lnv,a2_v_drdv,h,eta,p0
inline std::string diagnostics_csv(std::span<const DiagnosticsRow> rows) {
  std::string out = "v,r,r_over_lnv,a2_v_drdv,h,eta,p0\n";
  for (const auto& row : rows) {
    out += format_double(row.v) + ',' + format_double(row.r) + ',' +
           format_double(row.r_over_lnv) + ',' + format_double(row.a2_v_drdv) + ',' +
           format_double(row.h) + ',' + format_double(row.eta) + ',' + format_double(row.p0) +
           '\n';
  }
  return out;
}

/// Fixed column order: s_e,sigma,eta,n_market,n_planner,pi,s_w
inline std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "s_e,sigma,eta,n_market,n_planner,pi,s_w\n";
  for (const auto& row : rows) {
    out += format_double(row.ev_subsidy) + ',' + format_double(row.capital_subsidy) + ',' +
           format_double(row.eta) + ',' + std::to_string(row.n_market) + ',' +
           std::to_string(row.n_planner) + ',' + format_double(row.pi) + ',' +
           format_double(row.social_welfare) + '\n';
  }
  return out;
}

struct Report {
  std::string command;
  std::string scenario_digest;
  std::string tool_version;
  nlohmann::json result;
};

inline nlohmann::json to_json(const Report& rep) {
  return {{"command", rep.command},
          {"scenarioDigest", rep.scenario_digest},
          {"toolVersion", rep.tool_version},
          {"result", rep.result}};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io, "cannot open output path '" + path + "'");
  out << text;
  if (!out) fail(errc::io, "failed writing output path '" + path + "'");
}

}  // namespace evmarket
