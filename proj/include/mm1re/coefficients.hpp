#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mm1re/analytic_mm1.hpp"
#include "mm1re/environment.hpp"
#include "mm1re/perturbation.hpp"
#include "mm1re/stats.hpp"

namespace mm1re {

// Everything the coefficient formulas need from (environment, p): the
// stationary moments and the cross-correlations r_fg(u) = E_nu[f(X(0)) g(X(u))]
// for f, g in {p+, p-}, plus r_p for p itself.
struct PerturbationCorrelations {
  using Correlation = std::function<double(double)>;

  Correlation r_pp;  // p+ then p+
  Correlation r_pm;  // p+ then p-
  Correlation r_mp;  // p- then p+
  Correlation r_mm;  // p- then p-
  Correlation r_p;   // p then p
  double mean_p = 0.0;
  double mean_p_plus = 0.0;
  double mean_p_minus = 0.0;
  double var_p = 0.0;
  SignPattern sign = SignPattern::zero;
  bool has_plus = false;
  bool has_minus = false;

  // C_p(u)
  double covariance(double u) const { return r_p(u) - mean_p * mean_p; }
};

template <EnvironmentModel Env>
PerturbationCorrelations correlations_for(const Env& env,
                                          const PerturbationSpec<Env>& spec) {
  PerturbationCorrelations c;
  c.r_pp = env.correlation(spec.p_plus, spec.p_plus);
  c.r_pm = env.correlation(spec.p_plus, spec.p_minus);
  c.r_mp = env.correlation(spec.p_minus, spec.p_plus);
  c.r_mm = env.correlation(spec.p_minus, spec.p_minus);
  c.r_p = env.correlation(spec.p, spec.p);
  c.mean_p = spec.mean_p;
  c.mean_p_plus = spec.mean_p_plus;
  c.mean_p_minus = spec.mean_p_minus;
  c.var_p = spec.var_p;
  c.sign = spec.sign;
  c.has_plus = spec.has_plus();
  c.has_minus = spec.has_minus();
  return c;
}

struct McOptions {
  std::uint64_t seed = 1;
  std::uint64_t n_replicas = 100'000;
  unsigned workers = 0;
  std::uint64_t max_events = kDefaultMaxEvents;
};

// All coefficients below are in the canonical series
//   E(B - perturbed B) = delta1 eps + delta2 eps^2 + o(eps^2).

// delta1 = E_nu[p] / (mu - lambda)^2, closed form.
CoefficientEstimate delta1(const QueueParams& params,
                           const PerturbationCorrelations& corr);

// The two event-class contributions to delta2 and their difference, estimated
// jointly from the same replicas so that the error of delta2 accounts for
// their correlation.
//
// a_plus  = -(1/mu) E int_0^B (B - v) r_pp(v) dv
//           - 1/(mu^2 (1-rho)) E sum_i sum_j int_0^{A_i} E[p+(X(u)) p-(X(D_j^i))] du
// a_minus = 1/(mu^2 (1-rho)) ( -E sum_i int_0^{B+T1} E[p-(X(D_i)) p+(X(s))] ds
//                              + (1/mu) E sum_i sum_k r_mm(B - D_i + D'_k) )
// with the sub-cycle departures D_j^i measured from the start of sub-busy
// period i, A_i the time from that start to B, and T1 an independent busy
// period with departures D'_k.
struct SecondOrderEstimate {
  CoefficientEstimate a_plus;
  CoefficientEstimate a_minus;
  CoefficientEstimate delta2;  // a_plus - a_minus
  std::uint64_t aborted = 0;
};

SecondOrderEstimate second_order(const QueueParams& params,
                                 const PerturbationCorrelations& corr,
                                 const McOptions& options);

CoefficientEstimate a_plus(const QueueParams& params,
                           const PerturbationCorrelations& corr,
                           const McOptions& options);
CoefficientEstimate a_minus(const QueueParams& params,
                            const PerturbationCorrelations& corr,
                            const McOptions& options);
CoefficientEstimate delta2(const QueueParams& params,
                           const PerturbationCorrelations& corr,
                           const McOptions& options);

// delta2 for p >= 0 through the autocovariance:
//   -(1/mu) E int_0^B (B - v) C_p(v) dv - E_nu[p]^2 / (mu - lambda)^3.
// Throws ValidationError when p takes negative values.
CoefficientEstimate delta2_covariance(const QueueParams& params,
                                      const PerturbationCorrelations& corr,
                                      const McOptions& options);

// E(exp(-alpha Z)) for the variable Z with density
// f_Z(x) = (2 / E(B^2)) int_x^inf P(B >= u) du.
double z_laplace(double alpha, const QueueParams& params);

// Second-order gap to the reduced-service-rate queue when
// C_p(u) = var e^{-alpha u}:
//   -(var/mu) E(B/alpha - 1/alpha^2 + e^{-alpha B}/alpha^2),
// evaluated with E(e^{-alpha B}) = phi(1, alpha). alpha = 0 returns the
// limit -var/(mu - lambda)^3.
CoefficientEstimate delta2_exponential(double alpha, double var_p,
                                       const QueueParams& params);

enum class RsrSide { nonneg, nonpos };

// lim eps^-2 E(B_rsr - perturbed B), B_rsr being the busy period of the
// M/M/1 queue with rate mu + eps E_nu[p]:
//   nonneg: -(1/mu) E int_0^B (B - v) C_p(v) dv
//   nonpos: -1/(mu^3 (1-rho)) E sum_i sum_k C_p(B - D_i + D'_k)
// Throws ValidationError for mixed-sign p or a side that does not match p.
CoefficientEstimate rsr_gap(const QueueParams& params,
                            const PerturbationCorrelations& corr, RsrSide side,
                            const McOptions& options);

// Limit of delta2 as the environment is sped up: -E_nu[p]^2/(mu-lambda)^3.
CoefficientEstimate fast_env_limit(const QueueParams& params, double mean_p);

// delta2 on the time-scaled environment for each alpha. The same seed is used
// at every alpha, so successive values share their busy-period samples.
template <EnvironmentModel Env>
std::vector<CoefficientEstimate> fast_env_sweep(
    const QueueParams& params, const Env& env, const PerturbationSpec<Env>& spec,
    const std::vector<double>& alphas, const McOptions& options) {
  std::vector<CoefficientEstimate> out;
  out.reserve(alphas.size());
  for (double alpha : alphas) {
    const Env scaled = env.time_scale(alpha);
    out.push_back(delta2(params, correlations_for(scaled, spec), options));
  }
  return out;
}

}  // namespace mm1re
