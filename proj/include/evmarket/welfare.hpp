#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "evmarket/choice.hpp"
#include "evmarket/errors.hpp"
#include "evmarket/investment.hpp"
#include "evmarket/pricing.hpp"

namespace evmarket {

struct SubsidySetting {
  double ev_subsidy = 0.0;       // s_E, $ off the EV price
  double capital_subsidy = 0.0;  // sigma, fraction of per-station capital cost

  void validate() const {
    if (!(ev_subsidy >= 0.0) || !std::isfinite(ev_subsidy))
      fail(errc::validation, "subsidy.evSubsidy >= 0");
    if (!(capital_subsidy >= 0.0 && capital_subsidy < 1.0))
      fail(errc::validation, "subsidy.capitalSubsidy in [0, 1)");
  }
};

/// p_E <- p_E - s_E; the derived constants shift as C *= exp(-beta2*s_E),
/// C1 *= exp(beta2*s_E). Only the primitive is touched.
inline ChoiceParams apply_ev_subsidy(ChoiceParams p, double ev_subsidy) {
  p.pe -= ev_subsidy;
  return p;
}

/// Per-station capital cost <- (1-sigma)*(1+gamma)*F0.
inline CostModel apply_capital_subsidy(CostModel cm, double capital_subsidy) {
  cm.f0_capital *= (1.0 - capital_subsidy);
  return cm;
}

inline ChoiceParams apply_subsidy(ChoiceParams p, const SubsidySetting& sub) {
  return apply_ev_subsidy(p, sub.ev_subsidy);
}

inline CostModel apply_subsidy(CostModel cm, const SubsidySetting& sub) {
  return apply_capital_subsidy(cm, sub.capital_subsidy);
}

namespace detail {

// ln(x^b1 * C1 + C2) evaluated as lnC1 + logsumexp(b1*ln(x), lnC).
inline double log_surplus(double q0_plus_kappa, const ChoiceParams& p) {
  const double a = p.beta1 * std::log(q0_plus_kappa);
  const double b = p.ln_c();
  const double m = std::max(a, b);
  return p.ln_c1() + m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

/// Consumer surplus S_C = ln[(q0 + v*exp(-alpha2*r))^beta1 * C1 + C2],
/// the expected maximum of the two vehicle utilities.
inline double consumer_surplus(double v, const PricingSolution& sol, const ChoiceParams& p) {
  const double k = v == 0.0 ? 0.0 : sol.kappa;
  return detail::log_surplus(p.q0() + k, p);
}

/// S_C of the empty selection (kappa = 0).
inline double consumer_surplus_no_stations(const ChoiceParams& p) {
  return detail::log_surplus(p.q0(), p);
}

/// S_C(v) + Pi(v) - F(v) with the piecewise capital cost.
inline double social_welfare(double v, const PricingSolution& sol, const ChoiceParams& p,
                             const CostModel& cm, std::span<const double> sorted_vs) {
  return consumer_surplus(v, sol, p) + operational_profit(v, sol) - piecewise_cost(v, sorted_vs, cm);
}

/// Planner's site selection: same prefix scan as greedy_select but the
/// objective adds consumer surplus, S_C + Pi - k*(1+gamma)*F0. Pricing inside
/// each evaluation is still the investor's r*(v); the planner chooses
/// locations, not prices.
inline InvestmentPlan planner_select(const CandidateSet& sites, const ChoiceParams& p,
                                     const CostModel& cm, const SolverSettings& s = {}) {
  return detail::prefix_scan(
             sites, p, cm, s,
             [&p](const PricingSolution& sol) { return consumer_surplus(sol.v, sol, p); },
             consumer_surplus_no_stations(p), "planner_select")
      .plan;
}

struct WelfareReport {
  double v_market = 0.0;
  double v_planner = 0.0;
  std::size_t n_market = 0;
  std::size_t n_planner = 0;
  double consumer_surplus_market = 0.0;
  double consumer_surplus_planner = 0.0;
  double welfare_market = 0.0;   // S_C + Pi - capital at the market plan
  double welfare_planner = 0.0;  // same objective at the planner plan
  double gap = 0.0;              // planner - market welfare
  bool degenerate_ties = false;  // exact objective ties across k were observed
  InvestmentPlan market_plan;
  InvestmentPlan planner_plan;
};

inline WelfareReport compare_market_vs_planner(const CandidateSet& sites, const ChoiceParams& p,
                                               const CostModel& cm, const SolverSettings& s = {}) {
  auto market = detail::prefix_scan(
      sites, p, cm, s, [](const PricingSolution&) { return 0.0; }, 0.0, "greedy_select");
  auto planner = detail::prefix_scan(
      sites, p, cm, s,
      [&p](const PricingSolution& sol) { return consumer_surplus(sol.v, sol, p); },
      consumer_surplus_no_stations(p), "planner_select");

  auto surplus_of = [&](const InvestmentPlan& plan) {
    return plan.deferred ? consumer_surplus_no_stations(p)
                         : consumer_surplus(plan.v, *plan.pricing, p);
  };
  auto welfare_of = [&](const InvestmentPlan& plan) {
    const double pi = plan.deferred ? 0.0 : plan.pricing->pi;
    return surplus_of(plan) + pi - plan.capital_cost;
  };

  WelfareReport rep;
  rep.v_market = market.plan.v;
  rep.v_planner = planner.plan.v;
  rep.n_market = market.plan.n_stations();
  rep.n_planner = planner.plan.n_stations();
  rep.consumer_surplus_market = surplus_of(market.plan);
  rep.consumer_surplus_planner = surplus_of(planner.plan);
  rep.welfare_market = welfare_of(market.plan);
  rep.welfare_planner = welfare_of(planner.plan);
  rep.gap = rep.welfare_planner - rep.welfare_market;
  rep.degenerate_ties = market.exact_tie || planner.exact_tie;
  rep.market_plan = std::move(market.plan);
  rep.planner_plan = std::move(planner.plan);
  return rep;
}

struct SweepRow {
  double ev_subsidy = 0.0;
  double capital_subsidy = 0.0;
  double eta = 0.0;        // EV share at the market plan's equilibrium
  std::size_t n_market = 0;
  std::size_t n_planner = 0;
  double pi = 0.0;             // market operational profit
  double social_welfare = 0.0;  // welfare at the market plan
};

/// Re-solves market and planner under each subsidy setting. All derived
/// constants are recomputed from the shifted primitives; the (0, 0) row is
/// exactly the unsubsidized baseline.
inline std::vector<SweepRow> subsidy_sweep(const CandidateSet& sites, const ChoiceParams& p,
                                           const CostModel& cm,
                                           std::span<const SubsidySetting> grid,
                                           const SolverSettings& s = {}) {
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const SubsidySetting& sub : grid) {
    sub.validate();
    const ChoiceParams ps = apply_subsidy(p, sub);
    const CostModel cms = apply_subsidy(cm, sub);
    const WelfareReport rep = compare_market_vs_planner(sites, ps, cms, s);
    SweepRow row;
    row.ev_subsidy = sub.ev_subsidy;
    row.capital_subsidy = sub.capital_subsidy;
    row.eta = rep.market_plan.deferred ? PricingSolution::no_stations(ps).eta
                                       : rep.market_plan.pricing->eta;
    row.n_market = rep.n_market;
    row.n_planner = rep.n_planner;
    row.pi = rep.market_plan.deferred ? 0.0 : rep.market_plan.pricing->pi;
    row.social_welfare = rep.welfare_market;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace evmarket
