#include <sstream>

#include "doctest.h"
#include "mm1re/errors.hpp"
#include "mm1re/expansion_fit.hpp"

using namespace mm1re;
using doctest::Approx;

TEST_CASE("noise-free quadratics are recovered exactly") {
  const auto eps = default_eps_grid();
  std::vector<double> y, se;
  for (double e : eps) {
    y.push_back(0.5 * e - 0.3 * e * e);
    se.push_back(1e-3 * (1.0 + e));
  }
  const auto fit = fit_quadratic(eps, y, se);
  CHECK(fit.d1 == Approx(0.5).epsilon(1e-12));
  CHECK(fit.d2 == Approx(-0.3).epsilon(1e-10));
  CHECK(fit.chi2 < 1e-18);
  CHECK(fit.at(0.1) == Approx(0.05 - 0.003));
}

TEST_CASE("fit covariance is the inverse weighted normal matrix") {
  const std::vector<double> eps{0.05, 0.1};
  const std::vector<double> se{0.01, 0.02};
  const auto fit = fit_quadratic(eps, {0.0, 0.0}, se);
  // two points: the fit interpolates, so the covariance follows from the
  // inverse design
  Eigen::Matrix2d x;
  x << 0.05, 0.0025, 0.1, 0.01;
  const Eigen::Matrix2d xi = x.inverse();
  const Eigen::Matrix2d cov = xi * Eigen::Vector2d(1e-4, 4e-4).asDiagonal() * xi.transpose();
  CHECK(fit.covariance(0, 0) == Approx(cov(0, 0)).epsilon(1e-10));
  CHECK(fit.covariance(1, 1) == Approx(cov(1, 1)).epsilon(1e-10));
  CHECK(fit.covariance(0, 1) == Approx(cov(0, 1)).epsilon(1e-10));
}

TEST_CASE("zero standard errors") {
  const std::vector<double> eps{0.01, 0.02, 0.04};
  const std::vector<double> y{0.01, 0.02, 0.04};
  const auto all_zero = fit_quadratic(eps, y, {0.0, 0.0, 0.0});
  CHECK(all_zero.d1 == Approx(1.0));
  CHECK(all_zero.covariance.isZero());
  const auto some_zero = fit_quadratic(eps, y, {0.0, 1e-3, 2e-3});
  CHECK(some_zero.d1_se() > 0.0);
}

TEST_CASE("grid validation") {
  CHECK_THROWS(check_eps_grid({}));
  CHECK_THROWS(check_eps_grid({0.1}));
  CHECK_THROWS(check_eps_grid({0.1, 0.05}));
  CHECK_THROWS(check_eps_grid({0.0, 0.05}));
  CHECK_THROWS(check_eps_grid({0.01, 0.01}));
  CHECK_NOTHROW(check_eps_grid(default_eps_grid()));
  CHECK_THROWS(fit_quadratic({0.1, 0.2}, {1.0}, {1.0, 1.0}));
}

TEST_CASE("reduced-service-rate reference") {
  CHECK(rsr_reference(QueueParams{1, 2}, 0.5, 0.1) == Approx(1.0 / 1.05));
  CHECK_THROWS_AS(rsr_reference(QueueParams{1, 2}, -2.0, 0.5), UnstableQueue);
}

namespace {
FiniteCtmc two_state() {
  Eigen::MatrixXd q(2, 2);
  q << -1, 1, 1, -1;
  return FiniteCtmc(q);
}
}  // namespace

TEST_CASE("a small sweep: points, fit, bootstrap and CSV") {
  const auto env = two_state();
  const auto spec = PerturbationSpec<FiniteCtmc>::make(env, {0.0, 1.0});
  SweepOptions o;
  o.eps_grid = {0.05, 0.1, 0.2};
  o.n_replicas = 50'000;
  o.seed = 3;
  o.workers = 1;
  o.bootstrap_resamples = 100;
  const auto s = run_sweep(QueueParams{1, 2}, env, spec, o);
  REQUIRE(s.points.size() == 3);
  CHECK(s.replicas() == 150'000u);
  CHECK(s.aborted == 0u);
  for (const auto& p : s.points) CHECK(p.nonzero_differences.empty());
  CHECK(std::abs(s.d1_hat().value - 0.5) < 4 * s.d1_hat().std_error);
  // resampling reproduces the analytic errors to within resampling noise
  CHECK(s.bootstrap.d1_se == Approx(s.fit.d1_se()).epsilon(0.35));
  CHECK(s.bootstrap.d2_se == Approx(s.fit.d2_se()).epsilon(0.35));
  CHECK(s.residuals.size() == 3);

  const auto again = run_sweep(QueueParams{1, 2}, env, spec, o);
  CHECK(again.fit.d1 == s.fit.d1);
  CHECK(again.bootstrap.d2_se == s.bootstrap.d2_se);
  // grid points are independent of each other
  CHECK(sweep_point_seed(3, 0) != sweep_point_seed(3, 1));

  std::ostringstream a, b;
  write_sweep_csv(a, s);
  write_sweep_csv(b, again);
  CHECK(a.str() == b.str());
  std::istringstream lines(a.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "#schema=mm1re.sweep.v1");
  std::getline(lines, line);
  CHECK(line == "eps,gap_mean,gap_stderr,fitted,residual,n_replicas,aborted");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);

  o.n_replicas = 100;
  CHECK_THROWS(run_sweep(QueueParams{1, 2}, env, spec, o));
  o.n_replicas = 50'000;
  o.eps_grid = {0.5, 2.5};
  CHECK_THROWS_AS(run_sweep(QueueParams{1, 2}, env, spec, o), RateBoundViolation);
}
