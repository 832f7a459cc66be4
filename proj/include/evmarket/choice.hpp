#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "evmarket/errors.hpp"

namespace evmarket {

/// Consumer-side coefficients of the logit demand system plus the
/// outside-option attributes. Derived constants (q0, C, C1, C2) are always
/// recomputed from the primitives so subsidy scenarios can never observe a
/// stale cache.
///
/// q0 = exp(alpha1*f0 - alpha2*rho0)   home-charging utility mass
/// C  = exp(beta1*eug - beta2*pg + beta2*pe)
/// C1 = exp(phi - beta2*pe),  C2 = exp(phi + beta1*eug - beta2*pg)
/// so that C*C1 = C2 identically.
struct ChoiceParams {
  double alpha1 = 1.0;  // utility per favorability unit
  double alpha2 = 1.0;  // utility per $ of charging price
  double beta1 = 1.0;   // weight on expected charging utility
  double beta2 = 1.0;   // utility per $ of vehicle price
  double phi = 0.0;     // utility of owning a vehicle
  double f0 = 0.0;      // home-charging favorability
  double rho0 = 0.0;    // home-charging price
  double eug = 0.0;     // expected fueling utility E(U_G)
  double pg = 0.0;      // gasoline vehicle price
  double pe = 0.0;      // EV price

  double q0() const { return std::exp(alpha1 * f0 - alpha2 * rho0); }
  double ln_c() const { return beta1 * eug - beta2 * pg + beta2 * pe; }
  double c() const { return std::exp(ln_c()); }
  double ln_c1() const { return phi - beta2 * pe; }
  double ln_c2() const { return phi + beta1 * eug - beta2 * pg; }
  double c1() const { return std::exp(ln_c1()); }
  double c2() const { return std::exp(ln_c2()); }

  void validate() const {
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(alpha1)) fail(errc::validation, "alpha1 must be finite");
    if (!(alpha2 > 0.0) || !finite(alpha2)) fail(errc::validation, "alpha2 > 0");
    if (!(beta1 > 0.0) || !finite(beta1)) fail(errc::validation, "beta1 > 0");
    if (!finite(beta2)) fail(errc::validation, "beta2 must be finite");
    if (!finite(phi)) fail(errc::validation, "phi must be finite");
    if (!finite(f0)) fail(errc::validation, "f0 must be finite");
    if (!finite(rho0)) fail(errc::validation, "rho0 must be finite");
    if (!finite(eug)) fail(errc::validation, "eug must be finite");
    if (!finite(pg)) fail(errc::validation, "pg must be finite");
    if (!finite(pe)) fail(errc::validation, "pe must be finite");
    if (!(q0() > 0.0) || !finite(q0()))
      fail(errc::validation, "derived q0 = exp(alpha1*f0 - alpha2*rho0) must be finite and > 0");
    if (!(c() > 0.0) || !finite(c()))
      fail(errc::validation, "derived C = exp(beta1*eug - beta2*pg + beta2*pe) must be finite and > 0");
    if (!(c1() > 0.0) || !finite(c1())) fail(errc::validation, "derived C1 must be finite and > 0");
    if (!(c2() > 0.0) || !finite(c2())) fail(errc::validation, "derived C2 must be finite and > 0");
  }
};

/// A candidate charging-station site: favorability rating f and marginal
/// operating cost c ($/mile-equivalent).
struct Site {
  std::string id;
  double f = 0.0;
  double c = 0.0;
};

/// v_i = exp(alpha1*f_i - alpha2*c_i). Throws numeric_range (naming the site)
/// if the exponential leaves (0, inf).
inline double exp_systematic_utility(const Site& site, const ChoiceParams& p) {
  const double v = std::exp(p.alpha1 * site.f - p.alpha2 * site.c);
  if (!std::isfinite(v) || v <= 0.0)
    fail(errc::numeric_range,
         "site '" + site.id + "': exp(alpha1*f - alpha2*c) is outside (0, inf)");
  return v;
}

/// Sum of v_i over a site collection; 0 for an empty span.
inline double aggregate_v(std::span<const Site> sites, const ChoiceParams& p) {
  double sum = 0.0;
  for (const Site& s : sites) sum += exp_systematic_utility(s, p);
  if (!std::isfinite(sum))
    fail(errc::numeric_range, "aggregate v overflowed while summing site utilities");
  return sum;
}

struct CandidateSet {
  std::vector<Site> sites;

  std::size_t count() const { return sites.size(); }

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const Site& s : sites) {
      if (s.id.empty()) fail(errc::validation, "site ids must be non-empty");
      if (!std::isfinite(s.f) || !std::isfinite(s.c))
        fail(errc::validation, "site '" + s.id + "': f and c must be finite");
      if (!seen.insert(s.id).second)
        fail(errc::validation, "duplicate site id '" + s.id + "'");
    }
  }

  // Normalized view: v_i descending, ties broken by id.
  std::vector<Site> sorted_by_v(const ChoiceParams& p) const {
    std::vector<Site> out = sites;
    std::sort(out.begin(), out.end(), [&](const Site& a, const Site& b) {
      const double va = exp_systematic_utility(a, p);
      const double vb = exp_systematic_utility(b, p);
      if (va != vb) return va > vb;
      return a.id < b.id;
    });
    return out;
  }
};

/// kappa = v * exp(-alpha2 * r), the station nest's utility mass after pricing.
inline double kappa(double v, double r, const ChoiceParams& p) {
  if (v < 0.0 || !std::isfinite(v)) fail(errc::domain, "kappa: v must be finite and >= 0");
  if (!std::isfinite(r)) fail(errc::domain, "kappa: r must be finite");
  return v * std::exp(-p.alpha2 * r);
}

namespace detail {

// logistic(t) = 1/(1+e^t), evaluated without overflow for any t.
inline double logistic_of(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

// t such that 1-eta = logistic(-t), i.e. t = beta1*ln(q0+kappa) - lnC.
inline double eta_logit_arg(double q0, double kappa_value, const ChoiceParams& p) {
  return p.beta1 * std::log(q0 + kappa_value) - p.ln_c();
}

}  // namespace detail

/// EV market share eta = (q0+kappa)^beta1 / ((q0+kappa)^beta1 + C), evaluated
/// in log space so the power never overflows.
inline double ev_market_share(double v, double r, const ChoiceParams& p) {
  const double k = kappa(v, r, p);
  return detail::logistic_of(-detail::eta_logit_arg(p.q0(), k, p));
}

/// 1 - eta computed directly (accurate when eta is close to 1).
inline double gv_market_share(double v, double r, const ChoiceParams& p) {
  const double k = kappa(v, r, p);
  return detail::logistic_of(detail::eta_logit_arg(p.q0(), k, p));
}

/// Charging-location choice probabilities (P0, P1..PN) at uniform profit r.
/// P0 = q0/(q0+kappa), Pi = v_i*exp(-alpha2*r)/(q0+kappa).
inline std::vector<double> station_choice_probs(double q0, std::span<const double> station_vs,
                                                double r, const ChoiceParams& p) {
  if (!(q0 > 0.0) || !std::isfinite(q0)) fail(errc::domain, "station_choice_probs: q0 must be > 0");
  if (!std::isfinite(r)) fail(errc::domain, "station_choice_probs: r must be finite");
  // Work with log masses so huge v_i cannot overflow the normalization.
  std::vector<double> logm;
  logm.reserve(station_vs.size() + 1);
  logm.push_back(std::log(q0));
  for (double vi : station_vs) {
    if (!(vi > 0.0) || !std::isfinite(vi))
      fail(errc::domain, "station_choice_probs: every station v_i must be finite and > 0");
    logm.push_back(std::log(vi) - p.alpha2 * r);
  }
  const double m = *std::max_element(logm.begin(), logm.end());
  double denom = 0.0;
  for (double lm : logm) denom += std::exp(lm - m);
  std::vector<double> probs(logm.size());
  for (std::size_t i = 0; i < logm.size(); ++i) probs[i] = std::exp(logm[i] - m) / denom;
  for (double q : probs)
    if (!std::isfinite(q)) fail(errc::numeric_range, "station_choice_probs: non-finite probability");
  return probs;
}

/// Expected maximum charging utility E(U_E) = ln(q0 + kappa). The common
/// Euler-Mascheroni offset of the Gumbel expected maximum is dropped here and
/// must be dropped from E(U_G) symmetrically; it cancels inside C.
inline double expected_max_charging_utility(double q0, double kappa_value) {
  if (!(q0 > 0.0)) fail(errc::domain, "expected_max_charging_utility: q0 must be > 0");
  return std::log(q0 + kappa_value);
}

}  // namespace evmarket
