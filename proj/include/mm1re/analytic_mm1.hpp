#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mm1re/rng.hpp"

namespace mm1re {

inline constexpr std::uint64_t kDefaultMaxEvents = 10'000'000;

struct QueueParams {
  double lambda = 1.0;   // arrival rate
  double mu = 2.0;       // base service rate
  double epsilon = 0.0;  // perturbation magnitude

  double rho() const noexcept { return lambda / mu; }

  // Throws InvalidModel for non-positive rates or negative epsilon and
  // UnstableQueue when lambda >= mu.
  void validate() const;

  QueueParams with_epsilon(double eps) const noexcept {
    QueueParams q = *this;
    q.epsilon = eps;
    return q;
  }
};

// Closed-form functionals of the standard M/M/1 busy period started by one
// customer.
struct BusyMoments {
  double mean_length;                 // E(B)
  double second_moment;               // E(B^2)
  double mean_services;               // E(N)
  double mean_services_times_length;  // E(NB)
  double factorial_moment_services;   // E(N(N-1))
  double mean_departure_sum;          // E(D), D = D_1 + ... + D_N
};

BusyMoments busy_moments(const QueueParams& params);

// Joint transform phi(z, xi) = E(z^N exp(-xi B)).
//
// Accepts z in [-1, 1] and any real xi above the abscissa of convergence
// -(sqrt(mu) - sqrt(lambda))^2, so that central differences at xi = 0 are
// well defined. Throws std::domain_error outside that region.
double busy_pgf_laplace(double z, double xi, const QueueParams& params);

// Probability that two independent ordered samples of n-1 uniforms interleave
// as A_{k+1} <= D_k for every k: Catalan(n-1) / C(2n-2, n-1) = 1/n.
double interleave_probability(unsigned n);

// b_n(t) = d P(B < t, N = n) / dt.
double busy_count_density(unsigned n, double t, const QueueParams& params);

struct BusyPeriodRealization {
  double length = 0.0;               // B
  std::vector<double> departures;    // D_1 < ... < D_N, D_N == length
  std::vector<double> arrivals;      // A_2 <= ... <= A_N

  std::size_t n_services() const noexcept { return departures.size(); }
  double departure_sum() const noexcept;
};

// Direct competing-clock simulation from one customer until empty. Returns
// nullopt when the event cap is hit; callers count such replicas.
std::optional<BusyPeriodRealization> sample_busy_period(
    RandomStream& rng, const QueueParams& params,
    std::uint64_t max_events = kDefaultMaxEvents);

// Regenerative split B = E_0 + sum_{i=1..H} (E_i + B_1^i).
struct BusyDecomposition {
  std::vector<double> gaps;  // gaps[0] = E_0 (final), gaps[i] = E_i
  std::vector<BusyPeriodRealization> sub_busy_periods;  // B_1^1 .. B_1^H
  std::vector<double> cycle_ends;                       // s_0 .. s_H

  std::size_t h() const noexcept { return sub_busy_periods.size(); }
  double length() const noexcept { return cycle_ends.back() + gaps[0]; }
  // Start time s_{i-1} + E_i of sub-busy period i (1-based).
  double sub_start(std::size_t i) const noexcept {
    return cycle_ends[i - 1] + gaps[i];
  }
  // A_i = B_1^i + E_0 + sum_{k>i} (E_k + B_1^k): time from the start of
  // sub-busy period i to the end of the whole busy period.
  double remaining_from(std::size_t i) const noexcept {
    return length() - sub_start(i);
  }
};

std::optional<BusyDecomposition> sample_busy_decomposition(
    RandomStream& rng, const QueueParams& params,
    std::uint64_t max_events = kDefaultMaxEvents);

}  // namespace mm1re
