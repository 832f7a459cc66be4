#include "evmarket/pricing.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"

using namespace evmarket;
using evmtest::params_for;
using evmtest::unit_params;

namespace {

// central FD of r*(v) using the library solver
double fd_drdv(double v, const ChoiceParams& p, double rel = 1e-4) {
  const double d = v * rel;
  return (solve_uniform_profit(v + d, p).r - solve_uniform_profit(v - d, p).r) / (2.0 * d);
}

double fd_dpidv(double v, const ChoiceParams& p, double rel = 1e-4) {
  const double d = v * rel;
  return (solve_uniform_profit(v + d, p).pi - solve_uniform_profit(v - d, p).pi) / (2.0 * d);
}

double fd2_pi(double v, const ChoiceParams& p, double rel = 1e-4) {
  const double d = v * rel;
  return (solve_uniform_profit(v + d, p).pi - 2.0 * solve_uniform_profit(v, p).pi +
          solve_uniform_profit(v - d, p).pi) /
         (d * d);
}

}  // namespace

TEST(FocResidual, KnownValues) {
  const ChoiceParams p = unit_params();
  for (double v : {0.5, 10.0, 1e6}) EXPECT_DOUBLE_EQ(foc_residual(v, 0.0, p), -1.0);
  EXPECT_NEAR(foc_residual(10.0, 1.0, p), -0.647812571648249, 1e-12);
  EXPECT_NEAR(foc_residual(10.0, 20.0, p), 18.9999997938846, 1e-9);
}

TEST(FocResidual, AgreesWithTheOtherAlgebraicForm) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const ChoiceParams p =
        params_for(evmtest::uniform(rng, 0.2, 3.0), evmtest::uniform(rng, 0.2, 3.0),
                   evmtest::log_uniform(rng, 0.1, 10.0), evmtest::log_uniform(rng, 0.1, 10.0));
    const double v = evmtest::log_uniform(rng, 0.1, 1e8);
    const double r = evmtest::uniform(rng, 0.01, 30.0);
    const double a = foc_residual(v, r, p);
    const double b = evmtest::foc_oracle(v, r, p);
    EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, std::abs(b)));
  }
}

TEST(SolveUniformProfit, CanonicalInstance) {
  const ChoiceParams p = unit_params();
  const PricingSolution sol = solve_uniform_profit(10.0, p);
  EXPECT_NEAR(sol.r, 1.81455331193876, 1e-10);
  EXPECT_NEAR(sol.pi, 0.814553311938764, 1e-10);
  EXPECT_LE(std::abs(sol.foc_residual), 1e-10);
  EXPECT_NEAR(sol.kappa, 10.0 * std::exp(-sol.r), 1e-12 * sol.kappa);
  EXPECT_GT(sol.eta, 0.0);
  EXPECT_LT(sol.eta, 1.0);
  EXPECT_GT(sol.p0, 0.0);
  EXPECT_LT(sol.p0, 1.0);
  EXPECT_GE(sol.r, 0.0);
}

TEST(SolveUniformProfit, MatchesBisectionOracle) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const ChoiceParams p =
        params_for(evmtest::uniform(rng, 0.2, 3.0), evmtest::uniform(rng, 0.2, 3.0),
                   evmtest::log_uniform(rng, 0.1, 10.0), evmtest::log_uniform(rng, 0.1, 10.0));
    const double v = evmtest::log_uniform(rng, 1.0, 1e6);
    const double r_lib = solve_uniform_profit(v, p).r;
    const double r_oracle = evmtest::solve_r_oracle(v, p);
    EXPECT_NEAR(r_lib, r_oracle, 1e-10 * std::max(1.0, r_oracle));
  }
}

TEST(SolveUniformProfit, RootPropertyOnRandomDraws) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const ChoiceParams p =
        params_for(evmtest::uniform(rng, 0.2, 3.0), evmtest::uniform(rng, 0.2, 3.0),
                   evmtest::log_uniform(rng, 0.1, 10.0), evmtest::log_uniform(rng, 0.1, 10.0));
    const double v = evmtest::log_uniform(rng, 1.0, 1e6);
    const PricingSolution sol = solve_uniform_profit(v, p);
    EXPECT_LE(std::abs(sol.foc_residual), 1e-10);
    EXPECT_LE(std::abs(foc_residual(v, sol.r, p)), 1e-10);
  }
}

TEST(SolveUniformProfit, ScaleConsistencyViaResidual) {
  const ChoiceParams p = params_for(0.7, 1.3, 2.0, 0.5);
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const double v = evmtest::log_uniform(rng, 1.0, 1e4);
    const double s = evmtest::log_uniform(rng, 0.1, 100.0);
    const PricingSolution sol = solve_uniform_profit(s * v, p);
    EXPECT_LE(std::abs(foc_residual(s * v, sol.r, p)), 1e-10);
    EXPECT_NEAR(sol.kappa, s * v * std::exp(-p.alpha2 * sol.r), 1e-12 * sol.kappa);
  }
}

TEST(SolveUniformProfit, NoBracketWithinCapIsASolverError) {
  SolverSettings s;
  s.max_bracket_exp = 2;  // scan cannot reach the root of a large-v instance
  try {
    solve_uniform_profit(1e12, unit_params(), s);
    FAIL() << "expected solver error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::solver);
    EXPECT_NE(std::string(e.what()).find("no sign change"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("maxBracketExp"), std::string::npos);
  }
}

TEST(SolveUniformProfit, RejectsNonPositiveV) {
  EXPECT_THROW(solve_uniform_profit(0.0, unit_params()), Error);
  EXPECT_THROW(solve_uniform_profit(-1.0, unit_params()), Error);
}

TEST(SolverSettings, Validation) {
  SolverSettings s;
  EXPECT_NO_THROW(s.validate());
  s.grid_base = 1.0;
  EXPECT_THROW(s.validate(), Error);
  s = SolverSettings{};
  s.tol_abs = 0.0;
  EXPECT_THROW(s.validate(), Error);
  s = SolverSettings{};
  s.max_bracket_exp = 0;
  EXPECT_THROW(s.validate(), Error);
  s = SolverSettings{};
  s.fd_rel_step = -1e-4;
  EXPECT_THROW(s.validate(), Error);
}

TEST(PriceVector, ComponentwiseAdd) {
  std::vector<Site> sites = {{"a", 0, 1.0}, {"b", 0, 2.0}};
  EXPECT_EQ(price_vector(sites, 0.0), (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(price_vector(sites, 1.5), (std::vector<double>{2.5, 3.5}));
  std::vector<Site> three = {{"a", 0, 0.10}, {"b", 0, 0.12}, {"c", 0, 0.20}};
  const auto rho = price_vector(three, 1.8146);
  EXPECT_NEAR(rho[0], 1.9146, 1e-12);
  EXPECT_NEAR(rho[1], 1.9346, 1e-12);
  EXPECT_NEAR(rho[2], 2.0146, 1e-12);
}

TEST(ProfitDerivative, LargeVRegimeSigns) {
  const ChoiceParams p = unit_params();
  const PricingSolution sol = solve_uniform_profit(1e8, p);
  const auto d = profit_derivative(1e8, sol, p);
  EXPECT_GT(d.h, 0.0);
  EXPECT_LT(p.alpha2 * 1e8 * d.drdv, 1.0);
}

TEST(ProfitDerivative, MatchesFiniteDifference) {
  const ChoiceParams p = unit_params();
  const PricingSolution sol = solve_uniform_profit(10.0, p);
  const auto d = profit_derivative(10.0, sol, p);
  EXPECT_NEAR(d.h, 1.22766672892145, 1e-9);
  const double fd = fd_drdv(10.0, p);
  EXPECT_NEAR(d.drdv, fd, 1e-5 * std::abs(fd));
  EXPECT_NEAR(d.drdv, 0.0448900181978369, 1e-12);
}

TEST(ProfitDerivative, DegenerateSmallVThrows) {
  // beta1 = 3 with q0 = C = 1: at kappa -> 0 the H denominator turns negative.
  const ChoiceParams p = params_for(1.0, 3.0, 1.0, 1.0);
  const PricingSolution sol = solve_uniform_profit(1e-3, p);
  try {
    profit_derivative(1e-3, sol, p);
    FAIL() << "expected degeneracy error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), errc::degeneracy);
    EXPECT_NE(std::string(e.what()).find("H"), std::string::npos);
  }
}

TEST(OperationalProfit, Definitions) {
  const ChoiceParams p = unit_params();
  EXPECT_DOUBLE_EQ(operational_profit(0.0, PricingSolution::no_stations(p)), 0.0);
  PricingSolution zero_margin;
  zero_margin.v = 5.0;
  zero_margin.r = 0.0;
  zero_margin.eta = 0.7;
  zero_margin.station_share_sum = 0.8;
  EXPECT_DOUBLE_EQ(operational_profit(5.0, zero_margin), 0.0);
  const PricingSolution sol = solve_uniform_profit(10.0, p);
  EXPECT_NEAR(operational_profit(10.0, sol), 0.814553311938764, 1e-10);
}

TEST(ProfitGradient, MatchesFiniteDifferenceAndSigns) {
  const ChoiceParams p = unit_params();
  const double an = profit_gradient(10.0, p);
  const double fd = fd_dpidv(10.0, p);
  EXPECT_NEAR(an, fd, 1e-5 * std::abs(fd));
  EXPECT_GT(profit_gradient(1e8, p), 0.0);
  // marginal profit falls with scale in the concave region
  EXPECT_LT(profit_gradient(2e8, p), profit_gradient(1e8, p));
}

TEST(ProfitSecondDerivative, MatchesFiniteDifferenceAndIsNegativeAtScale) {
  const ChoiceParams p = unit_params();
  EXPECT_LT(profit_second_derivative(1e6, p), 0.0);
  const double an = profit_second_derivative(1e3, p);
  const double fd = fd2_pi(1e3, p);
  EXPECT_NEAR(an, fd, 1e-3 * std::abs(fd));
}

TEST(PriceCurvature, ApproachesMinusOneOverAlpha2TimesVSquared) {
  const ChoiceParams p = unit_params();
  double prev_gap = 1e300;
  for (double v : {1e6, 1e8, 1e10}) {
    const double scaled = v * v * price_curvature(v, p);
    const double gap = std::abs(scaled + 1.0 / p.alpha2);
    EXPECT_LT(gap, prev_gap);
    prev_gap = gap;
  }
}

TEST(DerivativeSuite, FiniteDifferenceAgreementOnLogGrid) {
  std::mt19937_64 rng(43);
  for (int set = 0; set < 4; ++set) {
    const ChoiceParams p =
        params_for(evmtest::uniform(rng, 0.2, 3.0), evmtest::uniform(rng, 0.2, 3.0),
                   evmtest::log_uniform(rng, 0.1, 10.0), evmtest::log_uniform(rng, 0.1, 10.0));
    for (int i = 0; i < 10; ++i) {
      const double v = std::pow(10.0, 1.0 + i);  // 10 .. 1e10
      const PricingSolution sol = solve_uniform_profit(v, p);
      const auto d = profit_derivative(v, sol, p);
      const double fd_r = fd_drdv(v, p);
      EXPECT_NEAR(d.drdv, fd_r, 1e-5 * std::abs(fd_r)) << "v=" << v;
      const double an_pi = profit_gradient(v, p);
      const double fd_pi = fd_dpidv(v, p);
      EXPECT_NEAR(an_pi, fd_pi, 1e-5 * std::abs(fd_pi)) << "v=" << v;
    }
  }
}

TEST(UniformProfit, LocalOptimalityUnderSinglePricePerturbation) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 25; ++trial) {
    const ChoiceParams p =
        params_for(evmtest::uniform(rng, 0.2, 3.0), evmtest::uniform(rng, 0.2, 3.0),
                   evmtest::log_uniform(rng, 0.1, 10.0), evmtest::log_uniform(rng, 0.1, 10.0));
    const int n = 2 + static_cast<int>(rng() % 4);
    std::vector<Site> sites;
    for (int i = 0; i < n; ++i)
      sites.push_back({"s" + std::to_string(i), evmtest::uniform(rng, 0.0, 2.5),
                       evmtest::uniform(rng, 0.0, 0.5)});
    const double v = aggregate_v(sites, p);
    const PricingSolution sol = solve_uniform_profit(v, p);
    const auto rho = price_vector(sites, sol.r);
    const double base = operational_profit_at_prices(sites, rho, p);
    EXPECT_NEAR(base, sol.pi, 1e-10 * std::max(1.0, sol.pi));
    const double delta = 1e-3 * (1.0 + sol.r);
    for (int i = 0; i < n; ++i) {
      for (double sign : {1.0, -1.0}) {
        auto bumped = rho;
        bumped[i] += sign * delta;
        EXPECT_LE(operational_profit_at_prices(sites, bumped, p), base + 1e-9);
      }
    }
  }
}

TEST(AsymptoticDiagnostics, DefaultParamsTrends) {
  const ChoiceParams p = unit_params();
  const std::vector<double> grid{1e2, 1e4, 1e6, 1e8, 1e10, 1e12};
  const auto rows = asymptotic_diagnostics(grid, p);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GT(rows[i].r, rows[i - 1].r);                      // r strictly increasing
    EXPECT_GT(rows[i].r_over_lnv, rows[i - 1].r_over_lnv);    // toward 1/alpha2 from below
    EXPECT_LT(rows[i].r_over_lnv, 1.0);
    EXPECT_GT(rows[i].eta, rows[i - 1].eta);
    EXPECT_LT(rows[i].p0, rows[i - 1].p0);
  }
  // h positive from its first positive grid point onward (beta1 = 1: everywhere)
  bool seen_positive = false;
  for (const auto& row : rows) {
    if (row.h > 0.0) seen_positive = true;
    if (seen_positive) {
      EXPECT_GT(row.h, 0.0);
    }
  }
  EXPECT_EQ(detect_vbar1(grid, p).value_or(-1.0), 1e2);
}

TEST(AsymptoticDiagnostics, GridValidation) {
  const ChoiceParams p = unit_params();
  EXPECT_THROW(asymptotic_diagnostics(std::vector<double>{0.5, 10.0}, p), Error);
  EXPECT_THROW(asymptotic_diagnostics(std::vector<double>{10.0, 10.0}, p), Error);
}
