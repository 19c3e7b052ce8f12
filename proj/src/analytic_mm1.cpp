#include "mm1re/analytic_mm1.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mm1re/errors.hpp"

namespace mm1re {

void QueueParams::validate() const {
  if (!(lambda > 0.0) || !(mu > 0.0) || !std::isfinite(lambda) ||
      !std::isfinite(mu)) {
    throw InvalidModel("queue rates must be positive and finite");
  }
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw InvalidModel("epsilon must be a finite non-negative number");
  }
  if (lambda >= mu) {
    throw UnstableQueue("unstable queue: lambda = " + std::to_string(lambda) +
                        " >= mu = " + std::to_string(mu));
  }
}

BusyMoments busy_moments(const QueueParams& params) {
  params.validate();
  const double l = params.lambda;
  const double m = params.mu;
  const double rho = params.rho();
  const double gap = m - l;
  const double c = (1.0 - rho) * (1.0 - rho) * (1.0 - rho);
  return BusyMoments{
      .mean_length = 1.0 / gap,
      .second_moment = 2.0 / (m * m * c),
      .mean_services = 1.0 / (1.0 - rho),
      .mean_services_times_length = (1.0 + rho) / (m * c),
      .factorial_moment_services = 2.0 * m * m * l / (gap * gap * gap),
      .mean_departure_sum = m * m / (gap * gap * gap),
  };
}

double busy_pgf_laplace(double z, double xi, const QueueParams& params) {
  params.validate();
  const double abscissa =
      -(std::sqrt(params.mu) - std::sqrt(params.lambda)) *
      (std::sqrt(params.mu) - std::sqrt(params.lambda));
  if (!(z >= -1.0 && z <= 1.0)) {
    throw std::domain_error("busy_pgf_laplace: |z| must be <= 1");
  }
  if (!(xi >= abscissa) || !std::isfinite(xi)) {
    throw std::domain_error(
        "busy_pgf_laplace: xi below the abscissa of convergence");
  }
  const double rho = params.rho();
  const double a = 1.0 + rho + xi / params.mu;
  const double disc = std::max(0.0, a * a - 4.0 * rho * z);
  // Rationalized form of (a - sqrt(disc)) / (2 rho); avoids cancellation as
  // xi grows.
  return 2.0 * z / (a + std::sqrt(disc));
}

double interleave_probability(unsigned n) {
  if (n == 0) throw std::invalid_argument("interleave_probability: n >= 1");
  // Catalan(m) = C(2m, m) / (m + 1) with m = n - 1, so the ratio is 1/n.
  return 1.0 / static_cast<double>(n);
}

double busy_count_density(unsigned n, double t, const QueueParams& params) {
  params.validate();
  if (n == 0) throw std::invalid_argument("busy_count_density: n >= 1");
  if (!(t > 0.0)) throw std::invalid_argument("busy_count_density: t > 0");
  const double k = static_cast<double>(n - 1);
  const double lt = params.lambda * t;
  const double mt = params.mu * t;
  const double log_arrivals = -lt + (k > 0 ? k * std::log(lt) : 0.0) -
                              std::lgamma(k + 1.0);
  const double log_services = std::log(params.mu) - mt +
                              (k > 0 ? k * std::log(mt) : 0.0) -
                              std::lgamma(k + 1.0);
  return std::exp(log_arrivals + log_services) * interleave_probability(n);
}

double BusyPeriodRealization::departure_sum() const noexcept {
  return std::accumulate(departures.begin(), departures.end(), 0.0);
}

std::optional<BusyPeriodRealization> sample_busy_period(
    RandomStream& rng, const QueueParams& params, std::uint64_t max_events) {
  const double total = params.lambda + params.mu;
  const double p_arrival = params.lambda / total;
  BusyPeriodRealization out;
  double t = 0.0;
  std::uint64_t level = 1;
  for (std::uint64_t events = 0; level > 0; ++events) {
    if (events >= max_events) return std::nullopt;
    t += exponential(rng, total);
    if (uniform01(rng) < p_arrival) {
      ++level;
      out.arrivals.push_back(t);
    } else {
      --level;
      out.departures.push_back(t);
    }
  }
  out.length = t;
  return out;
}

std::optional<BusyDecomposition> sample_busy_decomposition(
    RandomStream& rng, const QueueParams& params, std::uint64_t max_events) {
  const double total = params.lambda + params.mu;
  const double p_arrival = params.lambda / total;
  BusyDecomposition out;
  out.gaps.push_back(0.0);  // E_0, filled once the final service completes
  out.cycle_ends.push_back(0.0);
  std::uint64_t events = 0;
  for (;;) {
    if (++events > max_events) return std::nullopt;
    const double e = exponential(rng, total);
    if (uniform01(rng) >= p_arrival) {
      out.gaps[0] = e;
      break;
    }
    auto sub = sample_busy_period(rng, params, max_events - events);
    if (!sub) return std::nullopt;
    events += 2 * sub->n_services() - 1;
    out.gaps.push_back(e);
    out.cycle_ends.push_back(out.cycle_ends.back() + e + sub->length);
    out.sub_busy_periods.push_back(std::move(*sub));
  }
  return out;
}

}  // namespace mm1re
