#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "mm1re/analytic_mm1.hpp"
#include "mm1re/environment.hpp"
#include "mm1re/parallel.hpp"
#include "mm1re/perturbation.hpp"
#include "mm1re/rng.hpp"
#include "mm1re/stats.hpp"

namespace mm1re {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// Independent random streams, one per point process, shared by the replicas
// of one block in sequence. Within a replica the standard queue reads only
// `arrivals` and `services`, which is what couples it to the perturbed one.
struct ReplicaStreams {
  RandomStream arrivals;
  RandomStream services;  // service epochs and their cancellation marks
  RandomStream extra;     // dominating process for added departures
  RandomStream environment;
  RandomStream start_state;

  static ReplicaStreams make(std::uint64_t seed, std::uint64_t key) {
    return {make_stream(seed, key, Substream::arrivals),
            make_stream(seed, key, Substream::services),
            make_stream(seed, key, Substream::extra),
            make_stream(seed, key, Substream::environment),
            make_stream(seed, key, Substream::start_state)};
  }
};

enum class PointKind { arrival, service, canceled, added };

struct PointEvent {
  double time;
  PointKind kind;
};

// Merges the arrival process N_lambda, the service process N_mu (each point
// marked canceled with probability eps p-(X(s))/mu) and the added-departure
// process N+ obtained by thinning a homogeneous process of rate eps sup p+
// with acceptance p+(X(t))/sup p+. The environment is read only where a mark
// or an acceptance test actually needs it.
template <EnvironmentModel Env>
class PointSource {
 public:
  using state_type = typename Env::state_type;

  PointSource(const Env& env, const PerturbationSpec<Env>& spec,
              const QueueParams& params, ReplicaStreams& streams,
              state_type x0)
      : spec_(&spec), params_(params), streams_(&streams),
        session_(env.path_session(streams.environment, x0)),
        plus_rate_(params.epsilon * spec.sup_plus),
        cancel_cap_(params.epsilon * spec.sup_minus / params.mu) {
    next_arrival_ = exponential(streams_->arrivals, params_.lambda);
    next_service_ = exponential(streams_->services, params_.mu);
    next_candidate_ = draw_candidate(0.0);
  }

  // Next point of N_lambda, N_mu or N+ in time order. Returns nullopt when
  // two processes put points at the same instant.
  std::optional<PointEvent> next() {
    for (;;) {
      const double a = next_arrival_;
      const double s = next_service_;
      const double c = next_candidate_;
      if (a == s || (c == a && c != kNever) || (c == s && c != kNever)) {
        return std::nullopt;
      }
      if (a < s && a < c) {
        next_arrival_ = a + exponential(streams_->arrivals, params_.lambda);
        return PointEvent{a, PointKind::arrival};
      }
      if (s < c) {
        next_service_ = s + exponential(streams_->services, params_.mu);
        const double mark = uniform01(streams_->services);
        bool canceled = false;
        if (mark < cancel_cap_) {
          const double pm =
              std::min(evaluate(spec_->p_minus, session_.value_at(s)),
                       spec_->sup_minus);
          canceled = mark < params_.epsilon * pm / params_.mu;
        }
        return PointEvent{s, canceled ? PointKind::canceled : PointKind::service};
      }
      next_candidate_ = draw_candidate(c);
      const double u = uniform01(streams_->extra);
      const double pp = evaluate(spec_->p_plus, session_.value_at(c));
      if (u * spec_->sup_plus < pp) return PointEvent{c, PointKind::added};
    }
  }

 private:
  double draw_candidate(double from) {
    if (!(plus_rate_ > 0.0)) return kNever;
    return from + exponential(streams_->extra, 1.0) / plus_rate_;
  }

  const PerturbationSpec<Env>* spec_;
  QueueParams params_;
  ReplicaStreams* streams_;
  typename Env::session_type session_;
  double plus_rate_;
  double cancel_cap_;
  double next_arrival_;
  double next_service_;
  double next_candidate_;
};

template <EnvironmentModel Env>
typename Env::state_type start_state(const Env& env, ReplicaStreams& streams,
                                     const std::optional<typename Env::state_type>& x0) {
  return x0 ? *x0 : env.sample_stationary(streams.start_state);
}

// All points of the four processes on [0, horizon].
struct PointProcessLog {
  std::vector<double> arrivals;
  std::vector<double> services;  // includes the canceled ones
  std::vector<double> added;
  std::vector<double> canceled;

  double first_added() const noexcept { return added.empty() ? kNever : added.front(); }
  double first_canceled() const noexcept {
    return canceled.empty() ? kNever : canceled.front();
  }
};

template <EnvironmentModel Env>
std::optional<PointProcessLog> sample_point_process(
    ReplicaStreams& streams, const QueueParams& params, const Env& env,
    const PerturbationSpec<Env>& spec, double horizon,
    std::optional<typename Env::state_type> x0 = std::nullopt) {
  const auto x = start_state(env, streams, x0);
  PointSource<Env> source(env, spec, params, streams, x);
  PointProcessLog log;
  for (;;) {
    const auto ev = source.next();
    if (!ev) return std::nullopt;
    if (ev->time > horizon) return log;
    switch (ev->kind) {
      case PointKind::arrival: log.arrivals.push_back(ev->time); break;
      case PointKind::canceled:
        log.canceled.push_back(ev->time);
        [[fallthrough]];
      case PointKind::service: log.services.push_back(ev->time); break;
      case PointKind::added: log.added.push_back(ev->time); break;
    }
  }
}

// Length of the perturbed busy period started by n0 customers.
template <EnvironmentModel Env>
std::optional<double> simulate_pqueue_busy(
    ReplicaStreams& streams, const QueueParams& params, const Env& env,
    const PerturbationSpec<Env>& spec, unsigned n0 = 1,
    std::optional<typename Env::state_type> x0 = std::nullopt,
    std::uint64_t max_events = kDefaultMaxEvents) {
  const auto x = start_state(env, streams, x0);
  PointSource<Env> source(env, spec, params, streams, x);
  std::uint64_t level = n0;
  for (std::uint64_t events = 0; events < max_events; ++events) {
    const auto ev = source.next();
    if (!ev) return std::nullopt;
    switch (ev->kind) {
      case PointKind::arrival: ++level; break;
      case PointKind::canceled: break;
      case PointKind::service:
      case PointKind::added:
        if (--level == 0) return ev->time;
        break;
    }
  }
  return std::nullopt;
}

enum class EventClass : std::uint8_t { none, a_plus, a_pm, a_minus, other };
inline constexpr std::size_t kEventClassCount = 5;

constexpr std::string_view to_string(EventClass c) noexcept {
  switch (c) {
    case EventClass::none: return "NONE";
    case EventClass::a_plus: return "A_PLUS";
    case EventClass::a_pm: return "A_PM";
    case EventClass::a_minus: return "A_MINUS";
    case EventClass::other: return "OTHER";
  }
  return "UNKNOWN";
}

template <class State>
struct BusyPeriodSample {
  double b_standard = 0.0;   // B
  double b_perturbed = 0.0;  // perturbed busy period
  EventClass event_class = EventClass::none;
  std::uint32_t added_before_b = 0;
  std::uint32_t canceled_before_b = 0;
  std::uint32_t added_before_bp = 0;
  std::uint32_t canceled_before_bp = 0;
  double first_added = kNever;     // t1+
  double first_canceled = kNever;  // t1-
  // End of the standard busy period T1 started at B; set only when a
  // cancellation occurred in [0, B] and it was needed for classification.
  double shadow_end = kNever;
  State x0{};

  double gap() const noexcept { return b_standard - b_perturbed; }
};

// Runs the standard and perturbed queues, both started by one customer, on
// shared arrival and service processes until both are empty, and classifies
// the replica:
//   A_PLUS   t1+ <= B and no cancellation before the perturbed queue empties,
//            i.e. before tau+, the first time from t1+ on at which the
//            standard queue holds a single customer;
//   A_PM     t1- <= B and t1+ in [B, B + T1);
//   A_MINUS  t1- <= B and no added point before B + T1;
//   NONE     no added or canceled point in [0, B], so both periods coincide;
//   OTHER    everything else (t1- <= B together with t1+ < B).
// T1 is the standard busy period started at B by a fictitious customer, driven
// by the same arrival and service points.
template <EnvironmentModel Env>
std::optional<BusyPeriodSample<typename Env::state_type>> simulate_coupled_busy(
    ReplicaStreams& streams, const QueueParams& params, const Env& env,
    const PerturbationSpec<Env>& spec,
    std::optional<typename Env::state_type> x0 = std::nullopt,
    std::uint64_t max_events = kDefaultMaxEvents) {
  BusyPeriodSample<typename Env::state_type> out;
  out.x0 = start_state(env, streams, x0);
  PointSource<Env> source(env, spec, params, streams, out.x0);

  std::uint64_t s_level = 1;
  std::uint64_t p_level = 1;
  std::uint64_t shadow = 0;
  double b = kNever;
  double bp = kNever;
  double tau_plus = kNever;

  for (std::uint64_t events = 0;; ++events) {
    const bool waiting_for_shadow = out.first_canceled <= b &&
                                    out.first_added == kNever &&
                                    out.shadow_end == kNever;
    if (s_level == 0 && p_level == 0 && !waiting_for_shadow) break;
    if (events >= max_events) return std::nullopt;
    const auto ev = source.next();
    if (!ev) return std::nullopt;
    const double t = ev->time;

    switch (ev->kind) {
      case PointKind::arrival:
        if (s_level > 0) ++s_level;
        if (p_level > 0) ++p_level;
        if (shadow > 0) ++shadow;
        break;
      case PointKind::canceled:
      case PointKind::service: {
        const bool canceled = ev->kind == PointKind::canceled;
        if (canceled) {
          if (out.first_canceled == kNever) out.first_canceled = t;
          if (s_level > 0) ++out.canceled_before_b;
          if (p_level > 0) ++out.canceled_before_bp;
        }
        if (shadow > 0 && --shadow == 0) out.shadow_end = t;
        if (s_level > 0 && --s_level == 0) {
          b = t;
          if (out.first_canceled <= b) shadow = 1;
        }
        if (!canceled && p_level > 0 && --p_level == 0) bp = t;
        break;
      }
      case PointKind::added:
        if (out.first_added == kNever) out.first_added = t;
        if (s_level > 0) ++out.added_before_b;
        if (p_level > 0) {
          ++out.added_before_bp;
          if (--p_level == 0) bp = t;
        }
        break;
    }
    if (tau_plus == kNever && s_level == 1 && out.first_added <= t) {
      tau_plus = t;
    }
  }

  out.b_standard = b;
  out.b_perturbed = bp;
  const double t1p = out.first_added;
  const double t1m = out.first_canceled;
  if (t1p <= b && t1m > tau_plus) {
    out.event_class = EventClass::a_plus;
  } else if (t1m <= b) {
    if (t1p < b) {
      out.event_class = EventClass::other;
    } else if (t1p < out.shadow_end) {
      out.event_class = EventClass::a_pm;
    } else {
      out.event_class = EventClass::a_minus;
    }
  } else {
    out.event_class = EventClass::none;
  }
  return out;
}

// E(gap 1_class) accumulated as a sum and a sum of squares over all
// replicas, so that the estimate is an ordinary sample mean.
struct ClassTally {
  std::uint64_t count = 0;
  double gap_sum = 0.0;
  double gap_sq_sum = 0.0;
};

struct GapOptions {
  std::uint64_t seed = 1;
  std::uint64_t n_replicas = 1'000'000;
  unsigned workers = 0;
  std::uint64_t max_events = kDefaultMaxEvents;
  // Keep the non-zero per-replica differences (for resampling).
  bool keep_differences = false;
};

inline constexpr double kAbortedFractionLimit = 1e-6;

struct GapEstimate {
  CoefficientEstimate gap;  // E(B - perturbed B)
  std::array<ClassTally, kEventClassCount> classes{};
  std::uint64_t aborted = 0;
  std::vector<double> nonzero_differences;  // block order, when kept

  std::uint64_t completed() const noexcept { return gap.n_replicas; }
  bool abort_flagged() const noexcept {
    const auto total = gap.n_replicas + aborted;
    return total > 0 &&
           static_cast<double>(aborted) > kAbortedFractionLimit * static_cast<double>(total);
  }
  const ClassTally& tally(EventClass c) const noexcept {
    return classes[static_cast<std::size_t>(c)];
  }
  // E(gap 1_class) with its standard error.
  CoefficientEstimate class_contribution(EventClass c) const noexcept {
    const auto n = static_cast<double>(gap.n_replicas);
    const auto& t = tally(c);
    if (n < 2) return {};
    const double m = t.gap_sum / n;
    const double var = std::max(0.0, (t.gap_sq_sum / n - m * m) * n / (n - 1));
    return {m, std::sqrt(var / n), gap.n_replicas, EstimateMethod::simulation};
  }
  double class_probability(EventClass c) const noexcept {
    return gap.n_replicas ? static_cast<double>(tally(c).count) /
                                static_cast<double>(gap.n_replicas)
                          : 0.0;
  }
};

// Common-random-numbers estimate of E(B - perturbed B): both queues of one
// replica see the same arrival and service points. The replicas of block k
// read the streams derived from (seed, k), whatever the worker count.
template <EnvironmentModel Env>
GapEstimate estimate_mean_gap(
    const QueueParams& params, const Env& env, const PerturbationSpec<Env>& spec,
    const GapOptions& options,
    std::optional<typename Env::state_type> x0 = std::nullopt) {
  validate(spec, params);
  if (options.n_replicas < 1000) {
    throw std::invalid_argument("estimate_mean_gap needs at least 1000 replicas");
  }
  struct Partial {
    RunningStats gap;
    std::array<ClassTally, kEventClassCount> classes{};
    std::uint64_t aborted = 0;
    std::vector<double> nonzero;
  };
  auto reduce_block = [&](std::uint64_t begin, std::uint64_t end) {
    Partial part;
    auto streams = ReplicaStreams::make(options.seed, begin / kReplicaBlock);
    for (std::uint64_t r = begin; r < end; ++r) {
      const auto sample =
          simulate_coupled_busy(streams, params, env, spec, x0, options.max_events);
      if (!sample) {
        ++part.aborted;
        continue;
      }
      const double d = sample->gap();
      part.gap.add(d);
      auto& t = part.classes[static_cast<std::size_t>(sample->event_class)];
      ++t.count;
      t.gap_sum += d;
      t.gap_sq_sum += d * d;
      if (options.keep_differences && d != 0.0) part.nonzero.push_back(d);
    }
    return part;
  };
  auto merge = [](Partial& acc, Partial& part) {
    acc.gap.merge(part.gap);
    for (std::size_t k = 0; k < kEventClassCount; ++k) {
      acc.classes[k].count += part.classes[k].count;
      acc.classes[k].gap_sum += part.classes[k].gap_sum;
      acc.classes[k].gap_sq_sum += part.classes[k].gap_sq_sum;
    }
    acc.aborted += part.aborted;
    acc.nonzero.insert(acc.nonzero.end(), part.nonzero.begin(), part.nonzero.end());
    std::vector<double>().swap(part.nonzero);
  };
  Partial total = reduce_replicas<Partial>(options.n_replicas, options.workers,
                                           reduce_block, merge);
  GapEstimate out;
  out.gap = CoefficientEstimate::from(total.gap, EstimateMethod::simulation);
  out.classes = total.classes;
  out.aborted = total.aborted;
  out.nonzero_differences = std::move(total.nonzero);
  return out;
}

}  // namespace mm1re
