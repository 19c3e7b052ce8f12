#pragma once

#include <concepts>
#include <utility>

#include "mm1re/finite_ctmc.hpp"
#include "mm1re/ornstein_uhlenbeck.hpp"
#include "mm1re/rng.hpp"

namespace mm1re {

// A stationary Markov environment X(t): stationary sampling, forward path
// sessions queried at non-decreasing times, analytic correlations
// u -> E_nu[f(X(0)) g(X(u))], and time scaling t -> X(alpha t).
template <class E>
concept EnvironmentModel =
    std::copy_constructible<E> &&
    requires(const E& env, RandomStream& rng, typename E::state_type x,
             const typename E::function_type& f, typename E::session_type& s,
             const typename E::correlation_type& c, double t) {
      { env.sample_stationary(rng) } -> std::same_as<typename E::state_type>;
      { env.path_session(rng, x) } -> std::same_as<typename E::session_type>;
      { s.value_at(t) } -> std::same_as<typename E::state_type>;
      { env.expectation(f) } -> std::convertible_to<double>;
      { env.correlation(f, f) } -> std::same_as<typename E::correlation_type>;
      { c(t) } -> std::convertible_to<double>;
      { env.time_scale(t) } -> std::same_as<E>;
      { env.spectral_gap() } -> std::convertible_to<double>;
      { env.range(f, true) } -> std::same_as<std::pair<double, double>>;
      { evaluate(f, x) } -> std::convertible_to<double>;
      { positive_part(f) } -> std::same_as<typename E::function_type>;
      { negative_part(f) } -> std::same_as<typename E::function_type>;
    };

static_assert(EnvironmentModel<FiniteCtmc>);
static_assert(EnvironmentModel<OuEnvironment>);

}  // namespace mm1re
