#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "evmarket/choice.hpp"
#include "evmarket/errors.hpp"
#include "evmarket/investment.hpp"
#include "evmarket/pricing.hpp"

namespace evmarket {

struct SimReport {
  std::uint64_t n = 0;
  std::uint64_t seed = 0;
  std::uint64_t n_ev = 0;
  double eta_hat = 0.0;
  std::vector<double> station_shares_hat;  // (P0, P1..PN) conditional on EV; NaN when n_ev = 0
  std::vector<double> std_errs;            // empirical binomial SEs: [eta_hat, P0..PN]
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Uniform on the open interval (0, 1): (k + 0.5) / 2^53. Raw engine output is
// mapped directly so results do not depend on the standard library's
// distribution implementation.
inline double open_unit(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53;
}

// Standard type I extreme value draw by inverse transform.
inline double gumbel(std::mt19937_64& eng) { return -std::log(-std::log(open_unit(eng))); }

constexpr std::uint64_t kSimBlock = 4096;  // consumers per RNG block

struct BlockTally {
  std::uint64_t ev = 0;
  std::vector<std::uint64_t> station;
};

}  // namespace detail

/// Simulate n consumers through the two-stage decision: vehicle choice by
/// max{V_E, V_G} with E(U_E) = ln(q0 + kappa), then (for EV buyers) the
/// charging-location choice over home + built stations.
///
/// Deterministic for a given (n, seed) regardless of `threads`: the sample
/// space is split into fixed 4096-consumer blocks, block b draws from
/// mt19937_64 seeded by splitmix64 over (seed, b), and tallies reduce in
/// block order.
inline SimReport simulate_consumers(const InvestmentPlan& plan, const ChoiceParams& p,
                                    std::uint64_t n, std::uint64_t seed, unsigned threads = 0) {
  if (n == 0) fail(errc::argument, "simulate_consumers: n must be >= 1");
  p.validate();
  if (!plan.deferred && plan.prices.size() != plan.selected.size())
    fail(errc::argument, "simulate_consumers: plan has no prices for its selected sites");

  // Systematic utilities of the charging nest: home (index 0) then stations.
  std::vector<double> charge_u;
  charge_u.reserve(plan.selected.size() + 1);
  charge_u.push_back(p.alpha1 * p.f0 - p.alpha2 * p.rho0);
  double kap = 0.0;
  for (std::size_t i = 0; i < plan.selected.size(); ++i) {
    const double u = p.alpha1 * plan.selected[i].f - p.alpha2 * plan.prices[i];
    charge_u.push_back(u);
    kap += std::exp(u);
  }
  const std::size_t n_options = charge_u.size();

  const double eue = expected_max_charging_utility(p.q0(), kap);
  const double v_e = p.beta1 * eue - p.beta2 * p.pe + p.phi;
  const double v_g = p.beta1 * p.eug - p.beta2 * p.pg + p.phi;

  const std::uint64_t n_blocks = (n + detail::kSimBlock - 1) / detail::kSimBlock;
  std::vector<detail::BlockTally> tallies(n_blocks);

  auto run_block = [&](std::uint64_t b) {
    detail::BlockTally tally;
    tally.station.assign(n_options, 0);
    std::mt19937_64 eng(detail::splitmix64(seed ^ detail::splitmix64(b + 1)));
    const std::uint64_t begin = b * detail::kSimBlock;
    const std::uint64_t end = std::min(n, begin + detail::kSimBlock);
    for (std::uint64_t i = begin; i < end; ++i) {
      const double eps_e = detail::gumbel(eng);
      const double eps_g = detail::gumbel(eng);
      if (v_e + eps_e > v_g + eps_g) {
        ++tally.ev;
        std::size_t best = 0;
        double best_u = charge_u[0] + detail::gumbel(eng);
        for (std::size_t k = 1; k < n_options; ++k) {
          const double u = charge_u[k] + detail::gumbel(eng);
          if (u > best_u) {
            best_u = u;
            best = k;
          }
        }
        ++tally.station[best];
      }
    }
    tallies[b] = std::move(tally);
  };

  unsigned hw = threads == 0 ? std::thread::hardware_concurrency() : threads;
  if (hw == 0) hw = 1;
  const unsigned n_threads = static_cast<unsigned>(
      std::min<std::uint64_t>(hw, n_blocks));
  if (n_threads <= 1) {
    for (std::uint64_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t)
      pool.emplace_back([&, t] {
        for (std::uint64_t b = t; b < n_blocks; b += n_threads) run_block(b);
      });
    for (auto& th : pool) th.join();
  }

  // Fixed-order reduction.
  std::uint64_t n_ev = 0;
  std::vector<std::uint64_t> station(n_options, 0);
  for (const auto& tally : tallies) {
    n_ev += tally.ev;
    for (std::size_t k = 0; k < n_options; ++k) station[k] += tally.station[k];
  }

  SimReport rep;
  rep.n = n;
  rep.seed = seed;
  rep.n_ev = n_ev;
  rep.eta_hat = static_cast<double>(n_ev) / static_cast<double>(n);
  rep.station_shares_hat.resize(n_options);
  rep.std_errs.resize(n_options + 1);
  rep.std_errs[0] = std::sqrt(rep.eta_hat * (1.0 - rep.eta_hat) / static_cast<double>(n));
  for (std::size_t k = 0; k < n_options; ++k) {
    if (n_ev > 0) {
      const double share = static_cast<double>(station[k]) / static_cast<double>(n_ev);
      rep.station_shares_hat[k] = share;
      rep.std_errs[k + 1] = std::sqrt(share * (1.0 - share) / static_cast<double>(n_ev));
    } else {
      rep.station_shares_hat[k] = std::numeric_limits<double>::quiet_NaN();
      rep.std_errs[k + 1] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rep;
}

struct StatCheck {
  std::string name;
  double simulated = 0.0;
  double analytic = 0.0;
  double std_err = 0.0;  // binomial SE at the analytic probability
  double z = 0.0;
  bool pass = true;
};

struct ValidationReport {
  std::vector<StatCheck> checks;
  bool all_pass = true;
};

/// Flag every simulated statistic deviating from its closed form by more than
/// z binomial standard errors (SE evaluated at the analytic probability, so a
/// zero empirical count cannot mask a real deviation). Station checks are
/// vacuous when the simulation produced no EV buyers.
inline ValidationReport validate_closed_form(const SimReport& sim, const PricingSolution& analytic,
                                             std::span<const double> station_vs,
                                             const ChoiceParams& p, double z = 4.0) {
  if (sim.station_shares_hat.size() != station_vs.size() + 1)
    fail(errc::argument, "validate_closed_form: simulated shares do not match the station count");
  if (!(z > 0.0)) fail(errc::argument, "validate_closed_form: z must be > 0");

  ValidationReport rep;
  auto check = [&](const std::string& name, double hat, double prob, std::uint64_t m) {
    StatCheck c;
    c.name = name;
    c.simulated = hat;
    c.analytic = prob;
    c.std_err = m > 0 ? std::sqrt(prob * (1.0 - prob) / static_cast<double>(m)) : 0.0;
    if (std::isnan(hat)) {
      c.z = std::numeric_limits<double>::quiet_NaN();  // vacuous: nothing estimated
      c.pass = true;
    } else {
      const double dev = std::abs(hat - prob);
      c.z = c.std_err > 0.0 ? dev / c.std_err : (dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      c.pass = !(c.z > z);
    }
    rep.all_pass = rep.all_pass && c.pass;
    rep.checks.push_back(std::move(c));
  };

  check("eta", sim.eta_hat, analytic.eta, sim.n);
  const auto probs = station_choice_probs(p.q0(), station_vs, analytic.r, p);
  check("p0", sim.station_shares_hat[0], probs[0], sim.n_ev);
  for (std::size_t k = 1; k < probs.size(); ++k)
    check("p" + std::to_string(k), sim.station_shares_hat[k], probs[k], sim.n_ev);
  return rep;
}

}  // namespace evmarket
