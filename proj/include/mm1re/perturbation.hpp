#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "mm1re/analytic_mm1.hpp"
#include "mm1re/environment.hpp"
#include "mm1re/errors.hpp"

namespace mm1re {

enum class SignPattern { zero, nonneg, nonpos, mixed };

constexpr std::string_view to_string(SignPattern s) noexcept {
  switch (s) {
    case SignPattern::zero: return "zero";
    case SignPattern::nonneg: return "nonneg";
    case SignPattern::nonpos: return "nonpos";
    case SignPattern::mixed: return "mixed";
  }
  return "unknown";
}

// How boundedness of p is established. `strict` needs sup |p| < infinity on
// the whole state space. `soft` accepts p bounded on the effective support
// (mean +- 8 sd for the OU model), with the bound M taken there; the
// simulation then caps acceptance probabilities at one.
enum class BoundMode { strict, soft };

template <EnvironmentModel Env>
struct PerturbationSpec {
  using function_type = typename Env::function_type;

  function_type p;
  function_type p_plus;
  function_type p_minus;
  double bound_M = 0.0;   // sup |p|
  double sup_plus = 0.0;  // sup p+
  double sup_minus = 0.0; // sup p-
  double mean_p = 0.0;
  double mean_p_plus = 0.0;
  double mean_p_minus = 0.0;
  double var_p = 0.0;
  SignPattern sign = SignPattern::zero;
  BoundMode mode = BoundMode::strict;

  bool has_plus() const noexcept { return sup_plus > 0.0; }
  bool has_minus() const noexcept { return sup_minus > 0.0; }

  // Throws UnboundedPerturbation when p is not bounded in the chosen mode.
  static PerturbationSpec make(const Env& env, function_type p,
                               BoundMode mode = BoundMode::strict) {
    PerturbationSpec s;
    s.mode = mode;
    const auto [lo, hi] = env.range(p, mode == BoundMode::soft);
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      throw UnboundedPerturbation(
          mode == BoundMode::soft
              ? "perturbation is unbounded on the effective support"
              : "perturbation is unbounded; clip it or use the soft bound mode");
    }
    s.p_plus = positive_part(p);
    s.p_minus = negative_part(p);
    s.sup_plus = std::max(hi, 0.0);
    s.sup_minus = std::max(-lo, 0.0);
    s.bound_M = std::max(s.sup_plus, s.sup_minus);
    s.mean_p = env.expectation(p);
    s.mean_p_plus = env.expectation(s.p_plus);
    s.mean_p_minus = env.expectation(s.p_minus);
    s.var_p = std::max(0.0, env.correlation(p, p)(0.0) - s.mean_p * s.mean_p);
    if (lo >= 0.0 && hi <= 0.0) {
      s.sign = SignPattern::zero;
    } else if (lo >= 0.0) {
      s.sign = SignPattern::nonneg;
    } else if (hi <= 0.0) {
      s.sign = SignPattern::nonpos;
    } else {
      s.sign = SignPattern::mixed;
    }
    s.p = std::move(p);
    return s;
  }
};

struct ValidatedBounds {
  double mu0;  // mu - epsilon sup p-, the worst service rate
  double K;    // 1 / (mu0 - lambda)
};

// Checks the rate bound epsilon M < mu and stability of the worst-case rate.
template <EnvironmentModel Env>
ValidatedBounds validate(const PerturbationSpec<Env>& spec,
                         const QueueParams& params) {
  params.validate();
  if (!(params.epsilon * spec.bound_M < params.mu)) {
    throw RateBoundViolation("epsilon * sup|p| = " +
                             std::to_string(params.epsilon * spec.bound_M) +
                             " must be below mu = " + std::to_string(params.mu));
  }
  const double mu0 = params.mu - params.epsilon * spec.sup_minus;
  if (!(mu0 > params.lambda)) {
    throw UnstableQueue("worst-case service rate mu0 = " + std::to_string(mu0) +
                        " does not exceed lambda = " +
                        std::to_string(params.lambda));
  }
  return {mu0, 1.0 / (mu0 - params.lambda)};
}

}  // namespace mm1re
