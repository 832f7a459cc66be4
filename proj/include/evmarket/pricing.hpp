#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "evmarket/choice.hpp"
#include "evmarket/errors.hpp"

namespace evmarket {

struct SolverSettings {
  double grid_base = 2.0;     // geometric scan base for bracketing
  int max_bracket_exp = 128;  // max doublings of the scan
  double tol_abs = 1e-12;     // residual tolerance on g(v, r)
  double fd_rel_step = 1e-4;  // relative step for finite differences

  void validate() const {
    if (!(grid_base > 1.0) || !std::isfinite(grid_base))
      fail(errc::validation, "solver.gridBase > 1");
    if (max_bracket_exp <= 0) fail(errc::validation, "solver.maxBracketExp > 0");
    if (!(tol_abs > 0.0)) fail(errc::validation, "solver.tolAbs > 0");
    if (!(fd_rel_step > 0.0)) fail(errc::validation, "solver.fdRelStep > 0");
  }
};

/// Equilibrium bundle at total exponential systematic utility v. h and drdv
/// are raw IFT diagnostics: when the denominator H is <= 0 (small-v regime)
/// they are reported as computed, possibly negative; profit_derivative() is
/// the contract-checked accessor.
struct PricingSolution {
  double v = 0.0;
  double r = 0.0;                // uniform profit rho*_i - c_i
  double kappa = 0.0;            // v * exp(-alpha2*r)
  double eta = 0.0;              // EV market share
  double p0 = 1.0;               // home-charging share
  double station_share_sum = 0.0;  // kappa/(q0+kappa)
  double pi = 0.0;               // operational profit r*eta*kappa/(q0+kappa)
  double h = std::numeric_limits<double>::quiet_NaN();
  double drdv = std::numeric_limits<double>::quiet_NaN();
  double foc_residual = 0.0;

  /// Degenerate no-stations equilibrium: v = 0, kappa = 0, P0 = 1.
  static PricingSolution no_stations(const ChoiceParams& p) {
    PricingSolution sol;
    sol.eta = detail::logistic_of(-detail::eta_logit_arg(p.q0(), 0.0, p));
    sol.foc_residual = 0.0;
    return sol;
  }
};

/// First-order condition g(v, r) = alpha2*beta1*r*(1-eta)(1-P0) + alpha2*r*P0 - 1.
/// Its root in r defines the optimal uniform profit.
inline double foc_residual(double v, double r, const ChoiceParams& p) {
  if (!(v > 0.0)) fail(errc::domain, "foc_residual: v must be > 0");
  if (!(r >= 0.0) || !std::isfinite(r)) fail(errc::domain, "foc_residual: r must be finite and >= 0");
  const double q0 = p.q0();
  const double k = kappa(v, r, p);
  const double p0 = q0 / (q0 + k);
  const double one_minus_p0 = k / (q0 + k);
  const double one_minus_eta = detail::logistic_of(detail::eta_logit_arg(q0, k, p));
  const double g = p.alpha2 * p.beta1 * r * one_minus_eta * one_minus_p0 + p.alpha2 * r * p0 - 1.0;
  if (!std::isfinite(g)) fail(errc::numeric_range, "foc_residual: non-finite value");
  return g;
}

namespace detail {

struct EquilibriumParts {
  double q0, k, p0, q /*1-P0*/, eta, one_minus_eta;
};

inline EquilibriumParts equilibrium_parts(double v, double r, const ChoiceParams& p) {
  EquilibriumParts e{};
  e.q0 = p.q0();
  e.k = kappa(v, r, p);
  e.p0 = e.q0 / (e.q0 + e.k);
  e.q = e.k / (e.q0 + e.k);
  // both tails evaluated directly so neither loses precision to 1 - x
  const double t = eta_logit_arg(e.q0, e.k, p);
  e.one_minus_eta = logistic_of(t);
  e.eta = logistic_of(-t);
  return e;
}

// Numerator and denominator of the correction h in dr/dv = 1/(a2*v*(1+h)).
inline std::pair<double, double> ift_num_den(double r, const EquilibriumParts& e,
                                             const ChoiceParams& p) {
  const double num = p.beta1 * e.one_minus_eta * e.q + e.p0;
  const double den = p.alpha2 * p.beta1 * p.beta1 * r * e.eta * e.one_minus_eta * e.q * e.q
                     - p.alpha2 * p.beta1 * r * e.one_minus_eta * e.p0 * e.q
                     + p.alpha2 * r * e.p0 * e.q;
  return {num, den};
}

inline double profit_of(double r, const EquilibriumParts& e) { return r * e.eta * e.q; }

}  // namespace detail

/// Solve g(v, r) = 0 for the uniform profit. Geometric bracketing scan over
/// r in {grid_base^j}, bisection of every sign change, one-or-more Newton
/// polishes with an FD slope. When several roots exist each is polished and
/// the one maximizing Pi is returned (the FOC is necessary, not sufficient;
/// smallest r wins exact Pi ties).
///
/// The scan range is [1/(alpha2*(beta1+1)), (q0+v)/(alpha2*q0)]: below the
/// lower bound g < alpha2*(beta1+1)*r - 1 < 0, above the upper bound
/// g >= alpha2*r*q0/(q0+v) - 1 > 0, so every root lies inside.
inline PricingSolution solve_uniform_profit(double v, const ChoiceParams& p,
                                            const SolverSettings& s = {}) {
  p.validate();
  s.validate();
  if (!(v > 0.0) || !std::isfinite(v)) fail(errc::domain, "solve_uniform_profit: v must be > 0");

  const double q0 = p.q0();
  auto g = [&](double r) { return foc_residual(v, r, p); };

  const double r_lo_bound = 1.0 / (p.alpha2 * (p.beta1 + 1.0));
  const double r_hi_bound = (q0 + v) / (p.alpha2 * q0);
  const double log_base = std::log(s.grid_base);
  int j_min = static_cast<int>(std::floor(std::log(r_lo_bound) / log_base));
  int j_max = static_cast<int>(std::ceil(std::log(r_hi_bound) / log_base)) + 1;
  j_min = std::max(j_min, -1021);  // stay inside normalized doubles
  j_max = std::min(j_max, s.max_bracket_exp);

  struct Bracket {
    double lo, hi, g_lo, g_hi;
  };
  std::vector<Bracket> brackets;
  double r_prev = 0.0;
  double g_prev = -1.0;  // g(v, 0) = -1 identically
  int points = 0;
  for (int j = j_min; j <= j_max; ++j) {
    const double r_j = std::pow(s.grid_base, j);
    if (!std::isfinite(r_j)) break;
    if (r_j <= r_prev) continue;
    const double g_j = g(r_j);
    ++points;
    if ((g_prev < 0.0 && g_j >= 0.0) || (g_prev > 0.0 && g_j <= 0.0))
      brackets.push_back({r_prev, r_j, g_prev, g_j});
    r_prev = r_j;
    g_prev = g_j;
    if (r_j >= r_hi_bound) break;
  }

  if (brackets.empty()) {
    std::ostringstream trace;
    trace << "solve_uniform_profit: no sign change of g within the bracketing scan"
          << " (v=" << v << ", scanned r in [" << std::pow(s.grid_base, j_min) << ", " << r_prev
          << "] over " << points << " points, g at scan end=" << g_prev
          << ", maxBracketExp=" << s.max_bracket_exp << ")";
    fail(errc::solver, trace.str());
  }

  struct Root {
    double r, pi;
  };
  std::vector<Root> roots;
  for (const Bracket& br : brackets) {
    double lo = br.lo, hi = br.hi, g_lo = br.g_lo;
    // bisection down to an interval of width tol_width
    const double tol_width = 1e-12 * std::max(1.0, hi);
    while (hi - lo > tol_width) {
      const double mid = 0.5 * (lo + hi);
      const double g_mid = g(mid);
      if ((g_lo <= 0.0) == (g_mid <= 0.0)) {
        lo = mid;
        g_lo = g_mid;
      } else {
        hi = mid;
      }
    }
    double r = 0.5 * (lo + hi);
    // Newton polish with an FD slope; a couple of extra rounds if the first
    // one is not enough for |g| <= tol_abs.
    for (int it = 0; it < 8; ++it) {
      const double gr = g(r);
      if (std::abs(gr) <= s.tol_abs) break;
      const double dh = 1e-7 * std::max(1.0, r);
      const double hi_arg = r + dh;
      const double lo_arg = std::max(0.0, r - dh);
      const double slope = (g(hi_arg) - g(lo_arg)) / (hi_arg - lo_arg);
      if (!(slope != 0.0) || !std::isfinite(slope)) break;
      const double next = r - gr / slope;
      if (!(next >= 0.0) || !std::isfinite(next)) break;
      r = next;
    }
    if (std::abs(g(r)) > s.tol_abs) {
      std::ostringstream trace;
      trace << "solve_uniform_profit: polished root failed |g| <= tolAbs (v=" << v << ", r=" << r
            << ", g=" << g(r) << ", tolAbs=" << s.tol_abs << ")";
      fail(errc::solver, trace.str());
    }
    roots.push_back({r, detail::profit_of(r, detail::equilibrium_parts(v, r, p))});
  }

  const Root* best = &roots.front();
  for (const Root& cand : roots)
    if (cand.pi > best->pi || (cand.pi == best->pi && cand.r < best->r)) best = &cand;

  PricingSolution sol;
  sol.v = v;
  sol.r = best->r;
  const auto e = detail::equilibrium_parts(v, sol.r, p);
  sol.kappa = e.k;
  sol.eta = e.eta;
  sol.p0 = e.p0;
  sol.station_share_sum = e.q;
  sol.pi = detail::profit_of(sol.r, e);
  sol.foc_residual = g(sol.r);
  const auto [num, den] = detail::ift_num_den(sol.r, e, p);
  sol.h = num / den;
  sol.drdv = 1.0 / (p.alpha2 * v * (1.0 + sol.h));
  return sol;
}

/// rho_i = c_i + r, order-preserving.
inline std::vector<double> price_vector(std::span<const Site> selected, double r) {
  if (!(r >= 0.0)) fail(errc::domain, "price_vector: r must be >= 0");
  std::vector<double> out;
  out.reserve(selected.size());
  for (const Site& s : selected) out.push_back(s.c + r);
  return out;
}

struct PriceDerivative {
  double h;
  double drdv;
};

/// IFT derivative dr/dv = 1/(alpha2*v) * 1/(1+h). Throws degeneracy when the
/// denominator H of h is <= 0, which flags the small-v regime where the
/// large-v asymptotics do not apply.
inline PriceDerivative profit_derivative(double v, const PricingSolution& sol,
                                         const ChoiceParams& p) {
  if (!(v > 0.0)) fail(errc::domain, "profit_derivative: v must be > 0");
  const auto e = detail::equilibrium_parts(v, sol.r, p);
  const auto [num, den] = detail::ift_num_den(sol.r, e, p);
  if (!(den > 0.0)) {
    std::ostringstream msg;
    msg << "profit_derivative: IFT denominator H = " << den << " <= 0 at v = " << v
        << " (small-v regime outside the asymptotic range)";
    fail(errc::degeneracy, msg.str());
  }
  const double h = num / den;
  return {h, 1.0 / (p.alpha2 * v * (1.0 + h))};
}

/// Pi = r*eta*kappa/(q0+kappa); zero by definition at v = 0.
inline double operational_profit(double v, const PricingSolution& sol) {
  if (v == 0.0) return 0.0;
  return sol.r * sol.eta * sol.station_share_sum;
}

/// Operational profit for an arbitrary (not necessarily uniform) price
/// vector: eta * sum_i (rho_i - c_i) * w_i / (q0 + sum_j w_j) with
/// w_i = exp(alpha1*f_i - alpha2*rho_i). Used to verify that the uniform-
/// profit solution is a local optimum.
inline double operational_profit_at_prices(std::span<const Site> sites,
                                           std::span<const double> prices,
                                           const ChoiceParams& p) {
  if (sites.size() != prices.size())
    fail(errc::argument, "operational_profit_at_prices: sites/prices size mismatch");
  const double q0 = p.q0();
  double mass = q0;
  double margin_mass = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double w = std::exp(p.alpha1 * sites[i].f - p.alpha2 * prices[i]);
    mass += w;
    margin_mass += (prices[i] - sites[i].c) * w;
  }
  if (!std::isfinite(mass) || !std::isfinite(margin_mass))
    fail(errc::numeric_range, "operational_profit_at_prices: non-finite intermediate");
  const double k = mass - q0;
  const double eta = detail::logistic_of(-detail::eta_logit_arg(q0, k, p));
  return eta * margin_mass / mass;
}

/// dPi/dv by the chain rule through kappa(v) and r(v):
///   dkappa/dv = exp(-alpha2*r) * (1 - alpha2*v*dr/dv)
///   deta/dkappa = beta1*eta*(1-eta)/(q0+kappa)
///   d(1-P0)/dkappa = P0*(1-P0)/kappa
inline double profit_gradient(double v, const ChoiceParams& p, const SolverSettings& s = {}) {
  if (!(v > 0.0)) fail(errc::domain, "profit_gradient: v must be > 0");
  const PricingSolution sol = solve_uniform_profit(v, p, s);
  const auto d = profit_derivative(v, sol, p);
  const auto e = detail::equilibrium_parts(v, sol.r, p);
  const double kp = std::exp(-p.alpha2 * sol.r) * (1.0 - p.alpha2 * v * d.drdv);
  const double deta_dk = p.beta1 * e.eta * e.one_minus_eta / (e.q0 + e.k);
  const double dq_dk = e.p0 * e.q / e.k;
  return d.drdv * e.eta * e.q + sol.r * (deta_dk * e.q + e.eta * dq_dk) * kp;
}

/// d2r/dv2 by central finite difference of the analytic dr/dv at step
/// v*fd_rel_step.
inline double price_curvature(double v, const ChoiceParams& p, const SolverSettings& s = {}) {
  if (!(v > 0.0)) fail(errc::domain, "price_curvature: v must be > 0");
  const double step = v * s.fd_rel_step;
  const PricingSolution hi = solve_uniform_profit(v + step, p, s);
  const PricingSolution lo = solve_uniform_profit(v - step, p, s);
  const double d_hi = profit_derivative(v + step, hi, p).drdv;
  const double d_lo = profit_derivative(v - step, lo, p).drdv;
  return (d_hi - d_lo) / (2.0 * step);
}

/// Exact second derivative of Pi(v) = r(v)*A(kappa(v)), A = eta*(1-P0):
///   Pi'' = r''*A + 2*r'*A_k*k' + r*A_kk*k'^2 + r*A_k*k''
/// with r'' from price_curvature (central FD of the analytic dr/dv) and
///   k'  = e^{-a2 r} (1 - a2 v r')
///   k'' = e^{-a2 r} (a2^2 v r'^2 - 2 a2 r' - a2 v r'').
inline double profit_second_derivative(double v, const ChoiceParams& p,
                                       const SolverSettings& s = {}) {
  if (!(v > 0.0)) fail(errc::domain, "profit_second_derivative: v must be > 0");
  const PricingSolution sol = solve_uniform_profit(v, p, s);
  const auto d = profit_derivative(v, sol, p);
  const double rpp = price_curvature(v, p, s);
  const auto e = detail::equilibrium_parts(v, sol.r, p);
  const double a2 = p.alpha2, b1 = p.beta1;
  const double S = e.q0 + e.k;
  const double ekr = std::exp(-a2 * sol.r);
  const double rp = d.drdv;
  const double kp = ekr * (1.0 - a2 * v * rp);
  const double kpp = ekr * (a2 * a2 * v * rp * rp - 2.0 * a2 * rp - a2 * v * rpp);
  const double eta_k = b1 * e.eta * e.one_minus_eta / S;
  const double eta_kk = b1 * e.eta * e.one_minus_eta * (b1 * (1.0 - 2.0 * e.eta) - 1.0) / (S * S);
  const double q_k = e.q0 / (S * S);
  const double q_kk = -2.0 * e.q0 / (S * S * S);
  const double A_k = eta_k * e.q + e.eta * q_k;
  const double A_kk = eta_kk * e.q + 2.0 * eta_k * q_k + e.eta * q_kk;
  return rpp * e.eta * e.q + 2.0 * rp * A_k * kp + sol.r * A_kk * kp * kp + sol.r * A_k * kpp;
}

struct DiagnosticsRow {
  double v;
  double r;
  double r_over_lnv;
  double a2_v_drdv;
  double h;
  double eta;
  double p0;
};

/// One solved equilibrium per grid point with the convergence diagnostics of
/// the pricing asymptotics: r/ln v -> 1/alpha2, alpha2*v*dr/dv -> 1, eta -> 1,
/// P0 -> 0. h is reported raw (negative below the empirical v-bar-1).
inline std::vector<DiagnosticsRow> asymptotic_diagnostics(std::span<const double> v_grid,
                                                          const ChoiceParams& p,
                                                          const SolverSettings& s = {}) {
  for (std::size_t i = 0; i < v_grid.size(); ++i) {
    if (!(v_grid[i] > 1.0)) fail(errc::domain, "asymptotic_diagnostics: all grid points must be > 1");
    if (i > 0 && !(v_grid[i] > v_grid[i - 1]))
      fail(errc::domain, "asymptotic_diagnostics: grid must be strictly increasing");
  }
  std::vector<DiagnosticsRow> rows;
  rows.reserve(v_grid.size());
  for (double v : v_grid) {
    const PricingSolution sol = solve_uniform_profit(v, p, s);
    rows.push_back({v, sol.r, sol.r / std::log(v), p.alpha2 * v * sol.drdv, sol.h, sol.eta, sol.p0});
  }
  return rows;
}

/// Smallest grid point from which h stays positive through the end of the
/// grid (the empirical v-bar-1); nullopt if h never settles positive.
inline std::optional<double> detect_vbar1(std::span<const double> v_grid, const ChoiceParams& p,
                                          const SolverSettings& s = {}) {
  const auto rows = asymptotic_diagnostics(v_grid, p, s);
  std::optional<double> candidate;
  for (const auto& row : rows) {
    if (row.h > 0.0) {
      if (!candidate) candidate = row.v;
    } else {
      candidate.reset();
    }
  }
  return candidate;
}

}  // namespace evmarket
