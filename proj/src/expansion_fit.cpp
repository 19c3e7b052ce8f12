#include "mm1re/expansion_fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "mm1re/errors.hpp"

namespace mm1re {

void check_eps_grid(const std::vector<double>& eps_grid) {
  if (eps_grid.size() < 2) {
    throw std::invalid_argument("eps grid needs at least two distinct values");
  }
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0) || !std::isfinite(eps_grid[i])) {
      throw std::invalid_argument("eps grid values must be positive");
    }
    if (i > 0 && !(eps_grid[i] > eps_grid[i - 1])) {
      throw std::invalid_argument("eps grid must be strictly increasing");
    }
  }
}

QuadraticFit fit_quadratic(const std::vector<double>& eps,
                           const std::vector<double>& means,
                           const std::vector<double>& stderrs) {
  check_eps_grid(eps);
  if (means.size() != eps.size() || stderrs.size() != eps.size()) {
    throw std::invalid_argument("fit_quadratic: mismatched input sizes");
  }
  double floor = 0.0;
  for (double s : stderrs) {
    if (s > 0.0 && (floor == 0.0 || s < floor)) floor = s;
  }
  const bool weighted = floor > 0.0;

  Eigen::Matrix2d xtwx = Eigen::Matrix2d::Zero();
  Eigen::Vector2d xtwy = Eigen::Vector2d::Zero();
  std::vector<double> w(eps.size(), 1.0);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (weighted) {
      const double s = std::max(stderrs[i], floor);
      w[i] = 1.0 / (s * s);
    }
    const Eigen::Vector2d x(eps[i], eps[i] * eps[i]);
    xtwx += w[i] * x * x.transpose();
    xtwy += w[i] * means[i] * x;
  }
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(xtwx);
  if (!lu.isInvertible()) throw std::invalid_argument("fit_quadratic: singular design");
  const Eigen::Vector2d beta = lu.solve(xtwy);

  QuadraticFit fit;
  fit.d1 = beta(0);
  fit.d2 = beta(1);
  fit.covariance = weighted ? Eigen::Matrix2d(lu.inverse()) : Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double r = means[i] - fit.at(eps[i]);
    fit.chi2 += weighted ? w[i] * r * r : 0.0;
  }
  return fit;
}

CoefficientEstimate SweepResult::d1_hat() const {
  return {fit.d1, fit.d1_se(), replicas(), EstimateMethod::simulation};
}

CoefficientEstimate SweepResult::d2_hat() const {
  return {fit.d2, fit.d2_se(), replicas(), EstimateMethod::simulation};
}

std::uint64_t SweepResult::replicas() const {
  std::uint64_t n = 0;
  for (const auto& p : points) n += p.completed();
  return n;
}

SweepResult summarize_sweep(std::vector<double> eps_grid,
                            std::vector<GapEstimate> points,
                            std::size_t resamples, std::uint64_t seed) {
  SweepResult out;
  out.eps_grid = std::move(eps_grid);
  for (const auto& p : points) {
    out.gap_means.push_back(p.gap.value);
    out.gap_stderrs.push_back(p.gap.std_error);
    out.aborted += p.aborted;
  }
  out.fit = fit_quadratic(out.eps_grid, out.gap_means, out.gap_stderrs);
  for (std::size_t i = 0; i < out.eps_grid.size(); ++i) {
    const double e = out.eps_grid[i];
    out.residuals.push_back(out.gap_means[i] - out.fit.at(e));
    out.max_scaled_residual =
        std::max(out.max_scaled_residual, std::abs(out.residuals.back()) / (e * e * e));
  }

  // Resampling n replicas whose differences are zero except for k stored
  // values: the number of non-zero draws is Binomial(n, k/n), and given that
  // number the draws are uniform over the stored values.
  if (resamples > 0) {
    std::vector<RandomStream> rngs;
    for (std::size_t i = 0; i < points.size(); ++i) {
      rngs.push_back(make_stream(seed, i, Substream::bootstrap));
    }
    RunningStats s1;
    RunningStats s2;
    double cross = 0.0;
    std::vector<double> means(points.size());
    std::vector<std::pair<double, double>> draws;
    for (std::size_t b = 0; b < resamples; ++b) {
      for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& diffs = points[i].nonzero_differences;
        const auto n = points[i].completed();
        if (diffs.empty() || n == 0) {
          means[i] = 0.0;
          continue;
        }
        std::binomial_distribution<std::uint64_t> count(
            n, static_cast<double>(diffs.size()) / static_cast<double>(n));
        std::uniform_int_distribution<std::size_t> pick(0, diffs.size() - 1);
        const auto k = count(rngs[i]);
        double sum = 0.0;
        for (std::uint64_t j = 0; j < k; ++j) sum += diffs[pick(rngs[i])];
        means[i] = sum / static_cast<double>(n);
      }
      const auto f = fit_quadratic(out.eps_grid, means, out.gap_stderrs);
      s1.add(f.d1);
      s2.add(f.d2);
      draws.emplace_back(f.d1, f.d2);
    }
    for (const auto& [a, c] : draws) cross += (a - s1.mean()) * (c - s2.mean());
    out.bootstrap.resamples = resamples;
    out.bootstrap.d1_se = std::sqrt(s1.variance());
    out.bootstrap.d2_se = std::sqrt(s2.variance());
    out.bootstrap.d1_d2_cov =
        resamples > 1 ? cross / static_cast<double>(resamples - 1) : 0.0;
  }
  for (auto& p : points) std::vector<double>().swap(p.nonzero_differences);
  out.points = std::move(points);
  return out;
}

double rsr_reference(const QueueParams& params, double mean_p, double eps) {
  params.validate();
  const double rate = params.mu + eps * mean_p;
  if (!(rate > params.lambda)) {
    throw UnstableQueue("reduced service rate mu + eps E[p] does not exceed lambda");
  }
  return 1.0 / (rate - params.lambda);
}

void write_sweep_csv(std::ostream& os, const SweepResult& sweep) {
  os << "#schema=mm1re.sweep.v1\n";
  os << "eps,gap_mean,gap_stderr,fitted,residual,n_replicas,aborted\n";
  char buf[512];
  for (std::size_t i = 0; i < sweep.eps_grid.size(); ++i) {
    const double e = sweep.eps_grid[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%llu\n", e,
                  sweep.gap_means[i], sweep.gap_stderrs[i], sweep.fit.at(e),
                  sweep.residuals[i],
                  static_cast<unsigned long long>(sweep.points[i].completed()),
                  static_cast<unsigned long long>(sweep.points[i].aborted));
    os << buf;
  }
}

}  // namespace mm1re
