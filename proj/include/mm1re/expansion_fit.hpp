#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "mm1re/coupled_sim.hpp"
#include "mm1re/stats.hpp"

namespace mm1re {

// Weighted least squares for gap(eps) = d1 eps + d2 eps^2. There is no
// intercept because the coupling makes the gap exactly zero at eps = 0.
struct QuadraticFit {
  double d1 = 0.0;
  double d2 = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double chi2 = 0.0;

  double d1_se() const { return std::sqrt(covariance(0, 0)); }
  double d2_se() const { return std::sqrt(covariance(1, 1)); }
  double at(double eps) const noexcept { return d1 * eps + d2 * eps * eps; }
};

// Weights are 1/se^2. Zero errors are floored at the smallest positive one;
// when every error is zero the fit is unweighted and its covariance is zero.
QuadraticFit fit_quadratic(const std::vector<double>& eps,
                           const std::vector<double>& means,
                           const std::vector<double>& stderrs);

struct BootstrapSummary {
  std::size_t resamples = 0;
  double d1_se = 0.0;
  double d2_se = 0.0;
  double d1_d2_cov = 0.0;
};

inline std::vector<double> default_eps_grid() {
  return {0.01, 0.02, 0.04, 0.06, 0.08, 0.10};
}

struct SweepOptions {
  std::vector<double> eps_grid = default_eps_grid();
  std::uint64_t n_replicas = 1'000'000;  // per grid point
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::size_t bootstrap_resamples = 200;
  std::uint64_t max_events = kDefaultMaxEvents;
};

struct SweepResult {
  std::vector<double> eps_grid;
  std::vector<double> gap_means;
  std::vector<double> gap_stderrs;
  std::vector<GapEstimate> points;  // per-replica differences released
  QuadraticFit fit;
  BootstrapSummary bootstrap;
  std::vector<double> residuals;    // gap_mean - fitted
  double max_scaled_residual = 0.0; // max |residual| / eps^3
  std::uint64_t aborted = 0;

  CoefficientEstimate d1_hat() const;
  CoefficientEstimate d2_hat() const;
  std::uint64_t replicas() const;
};

// The seed of grid point i; points are independent of each other.
inline std::uint64_t sweep_point_seed(std::uint64_t seed, std::size_t i) {
  return derive_seed(seed, 0x5357454550ULL, i);
}

// Fits the per-point estimates and bootstraps the fit by resampling each
// point's replica-level differences. Consumes the stored differences.
SweepResult summarize_sweep(std::vector<double> eps_grid,
                            std::vector<GapEstimate> points,
                            std::size_t resamples, std::uint64_t seed);

void check_eps_grid(const std::vector<double>& eps_grid);

template <EnvironmentModel Env>
SweepResult run_sweep(const QueueParams& params, const Env& env,
                      const PerturbationSpec<Env>& spec,
                      const SweepOptions& options) {
  check_eps_grid(options.eps_grid);
  if (options.n_replicas < 10'000) {
    throw std::invalid_argument("run_sweep needs at least 10^4 replicas per point");
  }
  for (double eps : options.eps_grid) validate(spec, params.with_epsilon(eps));
  std::vector<GapEstimate> points;
  points.reserve(options.eps_grid.size());
  for (std::size_t i = 0; i < options.eps_grid.size(); ++i) {
    GapOptions g;
    g.seed = sweep_point_seed(options.seed, i);
    g.n_replicas = options.n_replicas;
    g.workers = options.workers;
    g.max_events = options.max_events;
    g.keep_differences = options.bootstrap_resamples > 0;
    points.push_back(estimate_mean_gap(params.with_epsilon(options.eps_grid[i]),
                                       env, spec, g));
  }
  return summarize_sweep(options.eps_grid, std::move(points),
                         options.bootstrap_resamples, options.seed);
}

// E(B_rsr) = 1 / (mu + eps E_nu[p] - lambda).
double rsr_reference(const QueueParams& params, double mean_p, double eps);

// eps, gap mean, its error, fitted value, residual, replicas, aborted.
void write_sweep_csv(std::ostream& os, const SweepResult& sweep);

}  // namespace mm1re
