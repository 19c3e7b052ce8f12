#include "mm1re/coefficients.hpp"

#include <cmath>
#include <stdexcept>

#include "mm1re/errors.hpp"
#include "mm1re/parallel.hpp"
#include "mm1re/quadrature.hpp"

namespace mm1re {
namespace {

using Correlation = PerturbationCorrelations::Correlation;

// int_0^T r(u) du
double integral(const Correlation& r, double t) {
  return integrate([&](double u) { return r(u); }, 0.0, t);
}

// int_0^T (T - v) r(v) dv
double weighted_integral(const Correlation& r, double t) {
  return integrate([&](double v) { return (t - v) * r(v); }, 0.0, t);
}

std::vector<double> all_departures(const BusyDecomposition& d) {
  std::vector<double> out;
  for (std::size_t i = 1; i <= d.h(); ++i) {
    const double start = d.sub_start(i);
    for (double dep : d.sub_busy_periods[i - 1].departures) {
      out.push_back(start + dep);
    }
  }
  out.push_back(d.length());
  return out;
}

// sum_i sum_k r(B - D_i + D'_k)
double departure_pair_sum(const Correlation& r, const std::vector<double>& deps,
                          double b, const std::vector<double>& second) {
  double s = 0.0;
  for (double di : deps) {
    for (double dk : second) s += r(b - di + dk);
  }
  return s;
}

// Busy-period streams of one replica block.
struct BlockStreams {
  RandomStream decomposition;
  RandomStream second;
  RandomStream single;

  BlockStreams(std::uint64_t seed, std::uint64_t block)
      : decomposition(make_stream(seed, block, Substream::decomposition)),
        second(make_stream(seed, block, Substream::second_busy_period)),
        single(make_stream(seed, block, Substream::busy_period)) {}
};

struct Triple {
  RunningStats first;
  RunningStats second;
  RunningStats third;
  std::uint64_t aborted = 0;
};

template <class PerReplica>
Triple run_replicas(const McOptions& options, PerReplica&& per_replica) {
  if (options.n_replicas < 2) {
    throw std::invalid_argument("coefficient Monte Carlo needs at least 2 replicas");
  }
  auto reduce_block = [&](std::uint64_t begin, std::uint64_t end) {
    Triple part;
    BlockStreams streams(options.seed, begin / kReplicaBlock);
    for (std::uint64_t r = begin; r < end; ++r) {
      if (!per_replica(streams, part)) ++part.aborted;
    }
    return part;
  };
  auto merge = [](Triple& acc, const Triple& part) {
    acc.first.merge(part.first);
    acc.second.merge(part.second);
    acc.third.merge(part.third);
    acc.aborted += part.aborted;
  };
  return reduce_replicas<Triple>(options.n_replicas, options.workers,
                                 reduce_block, merge);
}

double cube(double x) { return x * x * x; }

}  // namespace

CoefficientEstimate delta1(const QueueParams& params,
                           const PerturbationCorrelations& corr) {
  params.validate();
  const double gap = params.mu - params.lambda;
  return CoefficientEstimate::closed(corr.mean_p / (gap * gap));
}

SecondOrderEstimate second_order(const QueueParams& params,
                                 const PerturbationCorrelations& corr,
                                 const McOptions& options) {
  params.validate();
  SecondOrderEstimate out;
  if (!corr.has_plus && !corr.has_minus) {
    out.a_plus = out.a_minus = out.delta2 = CoefficientEstimate::closed(0.0);
    return out;
  }
  const double mu = params.mu;
  const double c = 1.0 / (mu * mu * (1.0 - params.rho()));

  auto per_replica = [&](BlockStreams& streams, Triple& part) {
    const auto d =
        sample_busy_decomposition(streams.decomposition, params, options.max_events);
    if (!d) return false;
    const double b = d->length();

    double ap = 0.0;
    if (corr.has_plus) {
      ap -= weighted_integral(corr.r_pp, b) / mu;
      if (corr.has_minus) {
        double s = 0.0;
        for (std::size_t i = 1; i <= d->h(); ++i) {
          const double horizon = d->remaining_from(i);
          for (double dep : d->sub_busy_periods[i - 1].departures) {
            s += integral(corr.r_pm, dep) + integral(corr.r_mp, horizon - dep);
          }
        }
        ap -= c * s;
      }
    }

    double am = 0.0;
    if (corr.has_minus) {
      const auto t1 = sample_busy_period(streams.second, params, options.max_events);
      if (!t1) return false;
      const auto deps = all_departures(*d);
      double s = 0.0;
      if (corr.has_plus) {
        for (double di : deps) {
          s -= integral(corr.r_pm, di) + integral(corr.r_mp, b + t1->length - di);
        }
      }
      s += departure_pair_sum(corr.r_mm, deps, b, t1->departures) / mu;
      am = c * s;
    }

    part.first.add(ap);
    part.second.add(am);
    part.third.add(ap - am);
    return true;
  };

  const Triple t = run_replicas(options, per_replica);
  constexpr auto mc = EstimateMethod::semi_analytic_mc;
  out.a_plus = corr.has_plus ? CoefficientEstimate::from(t.first, mc)
                             : CoefficientEstimate::closed(0.0);
  out.a_minus = corr.has_minus ? CoefficientEstimate::from(t.second, mc)
                               : CoefficientEstimate::closed(0.0);
  out.delta2 = CoefficientEstimate::from(t.third, mc);
  out.aborted = t.aborted;
  return out;
}

CoefficientEstimate a_plus(const QueueParams& params,
                           const PerturbationCorrelations& corr,
                           const McOptions& options) {
  if (!corr.has_plus) return CoefficientEstimate::closed(0.0);
  return second_order(params, corr, options).a_plus;
}

CoefficientEstimate a_minus(const QueueParams& params,
                            const PerturbationCorrelations& corr,
                            const McOptions& options) {
  if (!corr.has_minus) return CoefficientEstimate::closed(0.0);
  return second_order(params, corr, options).a_minus;
}

CoefficientEstimate delta2(const QueueParams& params,
                           const PerturbationCorrelations& corr,
                           const McOptions& options) {
  return second_order(params, corr, options).delta2;
}

CoefficientEstimate delta2_covariance(const QueueParams& params,
                                      const PerturbationCorrelations& corr,
                                      const McOptions& options) {
  params.validate();
  if (corr.sign == SignPattern::nonpos || corr.sign == SignPattern::mixed) {
    throw ValidationError(
        "the covariance form of delta2 requires a non-negative perturbation");
  }
  const double offset = -corr.mean_p * corr.mean_p / cube(params.mu - params.lambda);
  if (corr.var_p == 0.0) return CoefficientEstimate::closed(offset);
  const auto t = run_replicas(options, [&](BlockStreams& streams, Triple& part) {
    const auto b = sample_busy_period(streams.single, params, options.max_events);
    if (!b) return false;
    const double w = integrate(
        [&](double v) { return (b->length - v) * corr.covariance(v); }, 0.0,
        b->length);
    part.first.add(offset - w / params.mu);
    return true;
  });
  return CoefficientEstimate::from(t.first, EstimateMethod::semi_analytic_mc);
}

double z_laplace(double alpha, const QueueParams& params) {
  const auto m = busy_moments(params);
  if (!(alpha >= 0.0)) throw std::domain_error("z_laplace: alpha must be >= 0");
  if (alpha == 0.0) return 1.0;
  // m / alpha - (1 - phi) / alpha^2 with both square-root differences
  // rationalized, so that nothing cancels as alpha -> 0.
  const double c = params.mu - params.lambda;
  const double s = std::sqrt((c + alpha) * (c + alpha) + 4.0 * params.lambda * alpha);
  const double inner =
      (1.0 + (2.0 * c + alpha + 4.0 * params.lambda) / (s + c)) / (c * (c + alpha + s));
  return 2.0 / m.second_moment * inner;
}

CoefficientEstimate delta2_exponential(double alpha, double var_p,
                                       const QueueParams& params) {
  params.validate();
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::domain_error("delta2_exponential: alpha must be >= 0");
  }
  if (!(var_p >= 0.0)) throw std::domain_error("delta2_exponential: var must be >= 0");
  const double limit = -var_p / cube(params.mu - params.lambda);
  return CoefficientEstimate::closed(limit * z_laplace(alpha, params));
}

CoefficientEstimate rsr_gap(const QueueParams& params,
                            const PerturbationCorrelations& corr, RsrSide side,
                            const McOptions& options) {
  params.validate();
  if (corr.sign == SignPattern::mixed) {
    throw ValidationError("rsr_gap is defined separately for non-negative and "
                          "non-positive perturbations; p changes sign");
  }
  if ((side == RsrSide::nonneg && corr.sign == SignPattern::nonpos) ||
      (side == RsrSide::nonpos && corr.sign == SignPattern::nonneg)) {
    throw ValidationError("rsr_gap side does not match the sign of p");
  }
  if (corr.var_p == 0.0) return CoefficientEstimate::closed(0.0);
  const double mu = params.mu;

  const auto t = run_replicas(options, [&](BlockStreams& streams, Triple& part) {
    const auto b = sample_busy_period(streams.single, params, options.max_events);
    if (!b) return false;
    if (side == RsrSide::nonneg) {
      const double w = integrate(
          [&](double v) { return (b->length - v) * corr.covariance(v); }, 0.0,
          b->length);
      part.first.add(-w / mu);
      return true;
    }
    const auto t1 = sample_busy_period(streams.second, params, options.max_events);
    if (!t1) return false;
    double s = 0.0;
    for (double di : b->departures) {
      for (double dk : t1->departures) s += corr.covariance(b->length - di + dk);
    }
    part.first.add(-s / (mu * mu * mu * (1.0 - params.rho())));
    return true;
  });
  return CoefficientEstimate::from(t.first, EstimateMethod::semi_analytic_mc);
}

CoefficientEstimate fast_env_limit(const QueueParams& params, double mean_p) {
  params.validate();
  return CoefficientEstimate::closed(-mean_p * mean_p /
                                     cube(params.mu - params.lambda));
}

}  // namespace mm1re
