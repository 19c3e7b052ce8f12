// Freezes the reference values the other suites lean on, so that a change in
// an oracle cannot silently move a target.

#include "doctest.h"
#include "oracles.hpp"

using doctest::Approx;

namespace {

struct Frozen {
  double p0, p1;
  double d1, d2;
};

// lambda = 1, mu = 2, symmetric two-state chain with beta = 1.
constexpr Frozen kFrozen[] = {
    {0.0, 1.0, 0.5, -0.2949516},
    {0.0, -1.0, -0.5, -0.2949516},
    {-1.0, 1.0, 0.0, -0.1798059},
    {1.0, 1.0, 1.0, -1.0},
};

}  // namespace

TEST_CASE("unperturbed passage times are those of the plain M/M/1 queue") {
  const auto env = oracle::two_state();
  const auto qbd = oracle::solve_qbd(env.q, Eigen::Vector2d(0.3, -0.7), 1.0, 2.0, 0.0);
  for (unsigned n = 1; n <= 5; ++n) CHECK(qbd.mean_busy(n) == Approx(n).epsilon(1e-12));
  CHECK(qbd.g.rowwise().sum().maxCoeff() == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant perturbation gives the shifted M/M/1 busy period") {
  const auto env = oracle::two_state();
  const Eigen::Vector2d p(1.0, 1.0);
  CHECK(oracle::exact_gap(env.q, p, 1.0, 2.0, 0.1) == Approx(1.0 - 1.0 / 1.1).epsilon(1e-12));
  const auto qbd = oracle::solve_qbd(env.q, p, 1.0, 2.0, 0.1);
  CHECK(qbd.mean_busy(3) == Approx(3.0 / 1.1).epsilon(1e-12));
}

TEST_CASE("frozen expansion coefficients of the two-state chain") {
  const auto env = oracle::two_state();
  for (const auto& f : kFrozen) {
    CAPTURE(f.p0);
    CAPTURE(f.p1);
    const auto e = oracle::exact_expansion(env.q, Eigen::Vector2d(f.p0, f.p1), 1.0, 2.0);
    CHECK(std::abs(e.d1 - f.d1) < 1e-5);
    CHECK(std::abs(e.d2 - f.d2) < 1e-5);
  }
}

TEST_CASE("frozen exact gaps at eps = 0.1") {
  const auto env = oracle::two_state();
  CHECK(std::abs(oracle::exact_gap(env.q, Eigen::Vector2d(0, 1), 1, 2, 0.1) - 0.04720738) < 1e-7);
  CHECK(std::abs(oracle::exact_gap(env.q, Eigen::Vector2d(-1, 1), 1, 2, 0.1) + 0.00179985) < 1e-7);
}

TEST_CASE("ballot enumeration gives 1/n") {
  for (unsigned n = 1; n <= 10; ++n) {
    CAPTURE(n);
    CHECK(oracle::interleave_fraction(n) == Approx(1.0 / n).epsilon(1e-14));
  }
}

TEST_CASE("Feynman-Kac survival: closed forms and path simulation") {
  const auto env = oracle::two_state();
  CHECK(oracle::cox_survival(env.q, env.nu, Eigen::Vector2d(0.3, 0.3), 2.0) ==
        Approx(std::exp(-0.6)).epsilon(1e-12));
  const Eigen::Vector2d rate(0.0, 0.1);
  for (double x : {0.5, 1.0, 2.0}) {
    CAPTURE(x);
    const double exact = oracle::cox_survival(env.q, env.nu, rate, x);
    const auto mc = oracle::cox_survival_mc(env.q, env.nu, rate, x, 100'000, 17);
    CHECK(std::abs(mc.mean - exact) < 4.0 * mc.se);
  }
}

TEST_CASE("frozen exponential-covariance gap at alpha = 2, variance 1/4") {
  CHECK(std::abs(oracle::delta2_exponential_by_density(2.0, 0.25) + 0.0449515) < 2e-6);
  CHECK(std::abs(oracle::delta2_exponential_by_density(0.0, 0.25) + 0.25) < 2e-6);
}
