#include "evmarket/montecarlo.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "evmarket/welfare.hpp"
#include "test_util.hpp"

using namespace evmarket;
using evmtest::unit_params;

namespace {

// one-station plan with uniform profit r over the given site
InvestmentPlan plan_with(const Site& site, double r, const ChoiceParams& p,
                         const CostModel& cm = CostModel{0.01, 0.0}) {
  InvestmentPlan plan;
  plan.deferred = false;
  plan.selected = {site};
  plan.v = exp_systematic_utility(site, p);
  plan.prices = {site.c + r};
  plan.capital_cost = cm.per_station_cost();
  return plan;
}

InvestmentPlan default_scenario_plan(const ChoiceParams& p) {
  return greedy_select(evmtest::sites_with_vs({8.0, 5.0, 2.0}), p, CostModel{0.05, 0.0});
}

}  // namespace

TEST(SimulateConsumers, ArgumentErrors) {
  const ChoiceParams p = unit_params();
  const InvestmentPlan deferred;
  EXPECT_THROW(simulate_consumers(deferred, p, 0, 1), Error);
  InvestmentPlan missing_prices;
  missing_prices.deferred = false;
  missing_prices.selected = {{"s1", 0.0, 0.0}};
  EXPECT_THROW(simulate_consumers(missing_prices, p, 100, 1), Error);
}

TEST(SimulateConsumers, DeterministicAcrossRunsAndThreadCounts) {
  const ChoiceParams p = unit_params();
  const auto plan = default_scenario_plan(p);
  const auto a = simulate_consumers(plan, p, 50000, 7, 1);
  const auto b = simulate_consumers(plan, p, 50000, 7, 1);
  const auto c = simulate_consumers(plan, p, 50000, 7, 4);
  const auto d = simulate_consumers(plan, p, 50000, 7, 3);
  EXPECT_EQ(a.n_ev, b.n_ev);
  EXPECT_EQ(a.eta_hat, b.eta_hat);
  EXPECT_EQ(a.station_shares_hat, b.station_shares_hat);
  EXPECT_EQ(a.n_ev, c.n_ev);
  EXPECT_EQ(a.station_shares_hat, c.station_shares_hat);
  EXPECT_EQ(a.n_ev, d.n_ev);
  EXPECT_EQ(a.station_shares_hat, d.station_shares_hat);

  const auto other = simulate_consumers(plan, p, 50000, 8, 1);
  EXPECT_NE(a.n_ev, other.n_ev);  // different seed, different draw
}

TEST(SimulateConsumers, DominatedAlternativeHasVanishingShare) {
  ChoiceParams p = unit_params();
  p.pe = 50.0;  // EV price so high that C is astronomical
  const auto plan = plan_with({"s1", 0.0, 0.0}, 0.0, p);
  const auto sim = simulate_consumers(plan, p, 200000, 3);
  const double eta = ev_market_share(plan.v, 0.0, p);
  const double se = std::sqrt(eta * (1.0 - eta) / static_cast<double>(sim.n));
  EXPECT_LE(std::abs(sim.eta_hat - eta), 4.0 * se + 1e-12);
  EXPECT_LT(sim.eta_hat, 1e-4);
}

TEST(SimulateConsumers, SymmetricStationSplitsEvenly) {
  const ChoiceParams p = unit_params();
  const auto plan = plan_with({"s1", 0.0, 0.0}, 0.0, p);  // v1 = 1, r = 0, q0 = 1
  const auto sim = simulate_consumers(plan, p, 1000000, 42);
  ASSERT_EQ(sim.station_shares_hat.size(), 2u);
  const double se = std::sqrt(0.25 / static_cast<double>(sim.n_ev));
  EXPECT_NEAR(sim.station_shares_hat[0], 0.5, 4.0 * se);
  EXPECT_NEAR(sim.station_shares_hat[1], 0.5, 4.0 * se);
  const double sum = sim.station_shares_hat[0] + sim.station_shares_hat[1];
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(SimulateConsumers, AgreesWithClosedFormsOnTheDefaultScenario) {
  const ChoiceParams p = unit_params();
  const auto plan = default_scenario_plan(p);
  ASSERT_FALSE(plan.deferred);
  const auto sim = simulate_consumers(plan, p, 1000000, 2025);
  std::vector<double> station_vs;
  for (const auto& site : plan.selected)
    station_vs.push_back(exp_systematic_utility(site, p));
  const auto validation = validate_closed_form(sim, *plan.pricing, station_vs, p);
  EXPECT_TRUE(validation.all_pass);
  ASSERT_EQ(validation.checks.size(), 5u);  // eta + P0..P3
  for (const auto& check : validation.checks) EXPECT_TRUE(check.pass) << check.name;
}

TEST(ValidateClosedForm, PerturbedShareFails) {
  const ChoiceParams p = unit_params();
  const auto plan = default_scenario_plan(p);
  const auto sim = simulate_consumers(plan, p, 1000000, 2025);
  std::vector<double> station_vs;
  for (const auto& site : plan.selected)
    station_vs.push_back(exp_systematic_utility(site, p));
  PricingSolution off = *plan.pricing;
  off.eta += 0.05;
  const auto validation = validate_closed_form(sim, off, station_vs, p);
  EXPECT_FALSE(validation.all_pass);
  EXPECT_FALSE(validation.checks[0].pass);  // eta check
}

TEST(ValidateClosedForm, InfiniteZAlwaysPasses) {
  const ChoiceParams p = unit_params();
  const auto plan = default_scenario_plan(p);
  const auto sim = simulate_consumers(plan, p, 10000, 5);
  std::vector<double> station_vs;
  for (const auto& site : plan.selected)
    station_vs.push_back(exp_systematic_utility(site, p));
  PricingSolution off = *plan.pricing;
  off.eta = std::min(0.99, off.eta + 0.3);
  const auto validation =
      validate_closed_form(sim, off, station_vs, p, std::numeric_limits<double>::infinity());
  EXPECT_TRUE(validation.all_pass);
}

TEST(ValidateClosedForm, DimensionMismatchIsAnArgumentError) {
  const ChoiceParams p = unit_params();
  const auto plan = default_scenario_plan(p);
  const auto sim = simulate_consumers(plan, p, 1000, 5);
  const std::vector<double> wrong{1.0};  // plan has three stations
  try {
    validate_closed_form(sim, *plan.pricing, wrong, p);
    FAIL() << "expected argument error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::argument);
  }
}

TEST(GumbelSampler, TwoOptionChoiceIsLogit) {
  // P(a + eps1 > b + eps2) = e^a/(e^a + e^b) for standard Gumbel shocks
  std::mt19937_64 eng(99);
  for (auto [a, b] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {1.0, 0.0}, {0.3, 1.7}}) {
    const int n = 200000;
    int wins = 0;
    for (int i = 0; i < n; ++i)
      if (a + detail::gumbel(eng) > b + detail::gumbel(eng)) ++wins;
    const double prob = std::exp(a) / (std::exp(a) + std::exp(b));
    const double se = std::sqrt(prob * (1.0 - prob) / n);
    EXPECT_NEAR(static_cast<double>(wins) / n, prob, 4.0 * se);
  }
}

TEST(SimulateConsumers, ErrorShrinksAtRootNRate) {
  const ChoiceParams p = unit_params();
  const auto plan = default_scenario_plan(p);
  const double eta = plan.pricing->eta;
  std::vector<double> medians;
  for (std::uint64_t n : {10000ull, 100000ull, 1000000ull}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      errs.push_back(std::abs(simulate_consumers(plan, p, n, seed).eta_hat - eta));
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    medians.push_back(errs[10]);
  }
  EXPECT_GT(medians[0], medians[1]);
  EXPECT_GT(medians[1], medians[2]);
}

TEST(SimulateConsumers, DeferredPlanStillSimulatesVehicleChoice) {
  const ChoiceParams p = unit_params();
  const InvestmentPlan deferred;  // no stations: kappa = 0, home charging only
  const auto sim = simulate_consumers(deferred, p, 100000, 11);
  const double eta = PricingSolution::no_stations(p).eta;  // = 1/2 for unit params
  const double se = std::sqrt(eta * (1.0 - eta) / static_cast<double>(sim.n));
  EXPECT_NEAR(sim.eta_hat, eta, 4.0 * se);
  ASSERT_EQ(sim.station_shares_hat.size(), 1u);
  EXPECT_DOUBLE_EQ(sim.station_shares_hat[0], 1.0);  // all EV buyers charge at home
}
