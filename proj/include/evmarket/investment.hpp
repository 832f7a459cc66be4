#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "evmarket/choice.hpp"
#include "evmarket/errors.hpp"
#include "evmarket/pricing.hpp"

namespace evmarket {

struct CostModel {
  double f0_capital = 1.0;  // base capital cost F0 per station
  double gamma = 0.0;       // markup / financing factor
  double budget = std::numeric_limits<double>::infinity();

  double per_station_cost() const { return (1.0 + gamma) * f0_capital; }

  void validate() const {
    if (!(f0_capital > 0.0) || !std::isfinite(f0_capital))
      fail(errc::validation, "cost.f0Capital > 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail(errc::validation, "cost.gamma >= 0");
    if (!(per_station_cost() > 0.0)) fail(errc::validation, "per-station cost (1+gamma)*F0 > 0");
    if (std::isnan(budget) || budget < 0.0) fail(errc::validation, "cost.budget >= 0");
  }

  std::size_t max_affordable(std::size_t n_sites) const {
    if (std::isinf(budget)) return n_sites;
    const double k = std::floor(budget / per_station_cost());
    if (k >= static_cast<double>(n_sites)) return n_sites;
    return k <= 0.0 ? 0 : static_cast<std::size_t>(k);
  }
};

/// Outcome of a site-selection pass. `selected` is in build order (v_i
/// descending for greedy/planner). A deferred plan has no stations and zero
/// net profit.
struct InvestmentPlan {
  std::vector<Site> selected;
  double v = 0.0;
  std::optional<PricingSolution> pricing;  // absent when deferred
  std::vector<double> prices;              // rho_i = c_i + r
  double capital_cost = 0.0;
  double net_profit = 0.0;
  bool deferred = true;

  std::size_t n_stations() const { return selected.size(); }

  std::vector<std::string> selected_ids() const {
    std::vector<std::string> ids;
    ids.reserve(selected.size());
    for (const Site& s : selected) ids.push_back(s.id);
    return ids;
  }
};

/// Piecewise-linear convex capital cost as a function of aggregate utility v,
/// interpolating between the prefix breakpoints of the v-descending order:
/// F(v) = (1+gamma)*F0*N + (v - sum_{i<=N} v_i)*(1+gamma)*F0/v_{N+1}.
inline double piecewise_cost(double v, std::span<const double> sorted_vs, const CostModel& cm) {
  if (!(v >= 0.0) || !std::isfinite(v)) fail(errc::domain, "piecewise_cost: v must be >= 0");
  for (std::size_t i = 1; i < sorted_vs.size(); ++i)
    if (sorted_vs[i] > sorted_vs[i - 1])
      fail(errc::domain, "piecewise_cost: site utilities must be sorted descending");
  double total = 0.0;
  for (double vi : sorted_vs) total += vi;
  if (v > total * (1.0 + 1e-15))
    fail(errc::domain, "piecewise_cost: v exceeds the sum of all site utilities");
  if (v == 0.0) return 0.0;
  const double unit = cm.per_station_cost();
  double prefix = 0.0;
  for (std::size_t n = 0; n < sorted_vs.size(); ++n) {
    const double next = prefix + sorted_vs[n];
    if (v <= next) return unit * static_cast<double>(n) + (v - prefix) * unit / sorted_vs[n];
    prefix = next;
  }
  return unit * static_cast<double>(sorted_vs.size());  // v == total up to rounding
}

inline double piecewise_cost(double v, const CandidateSet& sites, const ChoiceParams& p,
                             const CostModel& cm) {
  const auto sorted = sites.sorted_by_v(p);
  std::vector<double> vs;
  vs.reserve(sorted.size());
  for (const Site& s : sorted) vs.push_back(exp_systematic_utility(s, p));
  return piecewise_cost(v, vs, cm);
}

namespace detail {

inline InvestmentPlan assemble_plan(std::vector<Site> selected, double v,
                                    std::optional<PricingSolution> pricing, const CostModel& cm) {
  InvestmentPlan plan;
  plan.deferred = selected.empty();
  plan.v = plan.deferred ? 0.0 : v;
  plan.capital_cost = cm.per_station_cost() * static_cast<double>(selected.size());
  if (!plan.deferred) {
    plan.prices = price_vector(selected, pricing->r);
    plan.net_profit = pricing->pi - plan.capital_cost;
    plan.pricing = std::move(pricing);
  }
  plan.selected = std::move(selected);
  return plan;
}

struct PrefixScanResult {
  InvestmentPlan plan;
  bool exact_tie = false;  // some k != k* achieved exactly the best objective
};

// Shared prefix scan for greedy_select and planner_select. `extra` maps a
// solved prefix equilibrium to an additive objective term (zero for the
// investor, consumer surplus for the planner); `extra_at_zero` is its value
// for the empty selection.
template <typename ExtraFn>
PrefixScanResult prefix_scan(const CandidateSet& sites, const ChoiceParams& p, const CostModel& cm,
                             const SolverSettings& s, ExtraFn&& extra, double extra_at_zero,
                             const char* who) {
  p.validate();
  cm.validate();
  sites.validate();
  const auto sorted = sites.sorted_by_v(p);
  const std::size_t k_max = cm.max_affordable(sorted.size());
  const double unit = cm.per_station_cost();

  double best_obj = extra_at_zero;  // k = 0: Pi(0) = 0 with no capital cost
  std::size_t best_k = 0;
  std::optional<PricingSolution> best_sol;
  bool exact_tie = false;

  double prefix_v = 0.0;
  for (std::size_t k = 1; k <= k_max; ++k) {
    prefix_v += exp_systematic_utility(sorted[k - 1], p);
    PricingSolution sol;
    try {
      sol = solve_uniform_profit(prefix_v, p, s);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << who << ": pricing failed at k=" << k << " (v=" << prefix_v << "): " << e.what();
      fail(e.code(), msg.str());
    }
    const double obj = sol.pi + extra(sol) - static_cast<double>(k) * unit;
    if (obj == best_obj) exact_tie = true;
    if (obj > best_obj) {
      best_obj = obj;
      best_k = k;
      best_sol = sol;
    }
  }

  std::vector<Site> selected(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(best_k));
  const double v = best_sol ? best_sol->v : 0.0;
  return {assemble_plan(std::move(selected), v, std::move(best_sol), cm), exact_tie};
}

}  // namespace detail

/// Greedy selection: sort by v_i descending (ties by id) and evaluate every
/// affordable prefix k = 0..kmax, net_k = Pi(sum of first k v_i) - k*(1+gamma)*F0.
/// Returns the argmax, smallest k on exact ties; defers when the argmax is 0.
inline InvestmentPlan greedy_select(const CandidateSet& sites, const ChoiceParams& p,
                                    const CostModel& cm, const SolverSettings& s = {}) {
  return detail::prefix_scan(
             sites, p, cm, s, [](const PricingSolution&) { return 0.0; }, 0.0, "greedy_select")
      .plan;
}

/// Exhaustive subset oracle. Enumerates all within-budget subsets (N_L up to
/// `enumeration_guard`), evaluating Pi(sum v_i) - |S|*(1+gamma)*F0. Ties break
/// to fewer stations, then lexicographically smaller ordered id list.
inline InvestmentPlan brute_force_select(const CandidateSet& sites, const ChoiceParams& p,
                                         const CostModel& cm, const SolverSettings& s = {},
                                         std::size_t enumeration_guard = 20) {
  p.validate();
  cm.validate();
  sites.validate();
  const std::size_t n = sites.count();
  if (n > enumeration_guard) {
    std::ostringstream msg;
    msg << "brute_force_select: " << n << " candidate sites exceed the enumeration guard of "
        << enumeration_guard << " (2^" << n << " subsets); use greedy_select or raise the guard";
    fail(errc::argument, msg.str());
  }
  const auto sorted = sites.sorted_by_v(p);
  std::vector<double> vs;
  vs.reserve(n);
  for (const Site& site : sorted) vs.push_back(exp_systematic_utility(site, p));
  const double unit = cm.per_station_cost();
  const std::size_t affordable = cm.max_affordable(n);

  double best_net = 0.0;
  std::uint64_t best_mask = 0;
  std::size_t best_count = 0;
  std::optional<PricingSolution> best_sol;

  auto ids_of = [&](std::uint64_t mask) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) ids.push_back(sorted[i].id);
    return ids;
  };

  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    const auto count = static_cast<std::size_t>(std::popcount(mask));
    if (count > affordable) continue;
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) v += vs[i];
    const PricingSolution sol = solve_uniform_profit(v, p, s);
    const double net = sol.pi - static_cast<double>(count) * unit;
    bool better = net > best_net;
    if (net == best_net) {
      if (count < best_count) better = true;
      else if (count == best_count && count > 0 && ids_of(mask) < ids_of(best_mask)) better = true;
    }
    if (better) {
      best_net = net;
      best_mask = mask;
      best_count = count;
      best_sol = sol;
    }
  }

  std::vector<Site> selected;
  for (std::size_t i = 0; i < n; ++i)
    if (best_mask >> i & 1u) selected.push_back(sorted[i]);
  const double v = best_sol ? best_sol->v : 0.0;
  return detail::assemble_plan(std::move(selected), v, std::move(best_sol), cm);
}

/// Pi - capitalCost, recomputed from the plan's parts; 0 for deferred plans.
inline double net_profit(const InvestmentPlan& plan) {
  if (plan.deferred) return 0.0;
  if (!plan.pricing) fail(errc::argument, "net_profit: non-deferred plan without pricing");
  return plan.pricing->pi - plan.capital_cost;
}

}  // namespace evmarket
