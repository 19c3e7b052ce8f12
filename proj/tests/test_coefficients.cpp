#include <cmath>

#include "doctest.h"
#include "mm1re/coefficients.hpp"
#include "mm1re/errors.hpp"
#include "oracles.hpp"

using namespace mm1re;
using doctest::Approx;

namespace {

const QueueParams kQueue{1.0, 2.0};

FiniteCtmc two_state(double beta = 1.0) { return FiniteCtmc(oracle::two_state(beta).q); }

PerturbationCorrelations corr(const FiniteCtmc& env, double a, double b) {
  return correlations_for(env, PerturbationSpec<FiniteCtmc>::make(env, {a, b}));
}

McOptions mc(std::uint64_t seed, std::uint64_t n = 50'000) {
  McOptions o;
  o.seed = seed;
  o.n_replicas = n;
  o.workers = 1;
  return o;
}

}  // namespace

TEST_CASE("first-order coefficient") {
  const auto env = two_state();
  CHECK(delta1(kQueue, corr(env, 0, 1)).value == Approx(0.5));
  CHECK(delta1(kQueue, corr(env, 0, -1)).value == Approx(-0.5));
  CHECK(delta1(kQueue, corr(env, -1, 1)).value == 0.0);
  CHECK(delta1(kQueue, corr(env, 0, 1)).method == EstimateMethod::closed_form);
  CHECK(delta1(QueueParams{1.0, 3.0}, corr(env, 1, 1)).value == Approx(0.25));
}

TEST_CASE("second-order coefficient matches the exact modulated queue") {
  const auto env = two_state();
  const auto o = oracle::two_state();
  for (auto [a, b] : {std::pair{0.0, 1.0}, {0.0, -1.0}, {-1.0, 1.0}, {1.0, 1.0}, {-0.5, 2.0}}) {
    CAPTURE(a);
    CAPTURE(b);
    const auto est = second_order(kQueue, corr(env, a, b), mc(21));
    const auto exact = oracle::exact_expansion(o.q, Eigen::Vector2d(a, b), 1.0, 2.0);
    CHECK(est.delta2.method == EstimateMethod::semi_analytic_mc);
    CHECK(std::abs(est.delta2.value - exact.d2) < 4 * est.delta2.std_error + 1e-5);
    CHECK(est.delta2.value == Approx(est.a_plus.value - est.a_minus.value));
  }
}

TEST_CASE("one-sided perturbations: a single class contributes") {
  const auto env = two_state();
  const auto up = second_order(kQueue, corr(env, 1, 1), mc(22));
  CHECK(up.a_minus.value == 0.0);
  CHECK(up.a_minus.method == EstimateMethod::closed_form);
  // p = 1: a_plus = -E(B^2) / (2 mu) = -1
  CHECK(std::abs(up.a_plus.value + 1.0) < 4 * up.a_plus.std_error);

  const auto down = second_order(kQueue, corr(env, -1, -1), mc(23));
  CHECK(down.a_plus.value == 0.0);
  // p = -1: a_minus = E(sum_i sum_k 1) / (mu^3 (1 - rho)) = E(N)^2 / 4 = 1
  CHECK(std::abs(down.a_minus.value - 1.0) < 4 * down.a_minus.std_error);

  const auto zero = second_order(kQueue, corr(env, 0, 0), mc(24));
  CHECK(zero.delta2.value == 0.0);
  CHECK(zero.delta2.method == EstimateMethod::closed_form);
}

TEST_CASE("the wrappers reproduce the joint estimate") {
  const auto env = two_state();
  const auto c = corr(env, -1, 1);
  const auto joint = second_order(kQueue, c, mc(25, 5000));
  CHECK(a_plus(kQueue, c, mc(25, 5000)).value == joint.a_plus.value);
  CHECK(a_minus(kQueue, c, mc(25, 5000)).value == joint.a_minus.value);
  CHECK(delta2(kQueue, c, mc(25, 5000)).value == joint.delta2.value);
}

TEST_CASE("covariance form equals the event split for non-negative p") {
  const auto env = two_state();
  const auto c = corr(env, 0, 1);
  const auto cov = delta2_covariance(kQueue, c, mc(26));
  const auto split = second_order(kQueue, c, mc(27));
  CHECK(std::abs(cov.value - split.a_plus.value) <
        4 * std::hypot(cov.std_error, split.a_plus.std_error));
  CHECK(delta2_covariance(kQueue, corr(env, 1, 1), mc(1)).value == Approx(-1.0));
  CHECK(delta2_covariance(kQueue, corr(env, 1, 1), mc(1)).method == EstimateMethod::closed_form);
  CHECK_THROWS_AS(delta2_covariance(kQueue, corr(env, -1, 1), mc(1)), ValidationError);
  CHECK_THROWS_AS(delta2_covariance(kQueue, corr(env, 0, -1), mc(1)), ValidationError);
}

TEST_CASE("exponential covariance closed form") {
  CHECK(z_laplace(0.0, kQueue) == 1.0);
  CHECK(z_laplace(1e-10, kQueue) == Approx(1.0).epsilon(1e-9));
  double last = 1.0;
  for (double a : {0.1, 0.5, 1.0, 4.0, 32.0}) {
    const double z = z_laplace(a, kQueue);
    CHECK(z < last);
    CHECK(z > 0.0);
    last = z;
  }
  CHECK(delta2_exponential(2.0, 0.25, kQueue).value ==
        Approx(oracle::delta2_exponential_by_density(2.0, 0.25)).epsilon(1e-5));
  CHECK(delta2_exponential(0.0, 0.25, kQueue).value == Approx(-0.25));
  CHECK(delta2_exponential(0.7, 0.0, kQueue).value == 0.0);
  CHECK_THROWS(delta2_exponential(-1.0, 0.25, kQueue));
}

TEST_CASE("reduced-service-rate gap") {
  const auto env = two_state();
  // C_p(u) = exp(-2u) / 4 for p = (0, 1) and p = (0, -1)
  const double closed = delta2_exponential(2.0, 0.25, kQueue).value;
  const auto up = rsr_gap(kQueue, corr(env, 0, 1), RsrSide::nonneg, mc(28));
  CHECK(std::abs(up.value - closed) < 4 * up.std_error);
  CHECK(up.value < 0.0);
  const auto down = rsr_gap(kQueue, corr(env, 0, -1), RsrSide::nonpos, mc(29));
  CHECK(down.value < 0.0);
  CHECK_THROWS_AS(rsr_gap(kQueue, corr(env, -1, 1), RsrSide::nonneg, mc(1)), ValidationError);
  CHECK_THROWS_AS(rsr_gap(kQueue, corr(env, 0, 1), RsrSide::nonpos, mc(1)), ValidationError);
  CHECK(rsr_gap(kQueue, corr(env, 1, 1), RsrSide::nonneg, mc(1)).value == 0.0);

  // the non-positive side against the exact queue: the RSR expansion of
  // 1/(mu + eps m - lambda) has second coefficient -m^2/(mu-lambda)^3
  const auto o = oracle::two_state();
  const auto exact = oracle::exact_expansion(o.q, Eigen::Vector2d(0, -1), 1.0, 2.0);
  CHECK(std::abs(down.value - (exact.d2 + 0.25)) < 4 * down.std_error + 1e-5);
}

TEST_CASE("fast environment limit") {
  const auto env = two_state();
  CHECK(fast_env_limit(kQueue, 0.5).value == Approx(-0.25));
  const auto spec = PerturbationSpec<FiniteCtmc>::make(env, {0.0, 1.0});
  const auto values = fast_env_sweep(kQueue, env, spec, {1.0, 8.0, 64.0}, mc(30, 20'000));
  REQUIRE(values.size() == 3);
  CHECK(values[0].value < values[1].value);
  CHECK(values[1].value < values[2].value);
  CHECK(std::abs(values[2].value + 0.25) < 4 * values[2].std_error + 0.01);
}

TEST_CASE("OU perturbations: covariance form and event split agree") {
  const OuEnvironment env(1.0, 0.5, 0.25);
  const auto spec = PerturbationSpec<OuEnvironment>::make(env, ClampedAffine{1.0, 0.0, 0.0, 1.0});
  const auto c = correlations_for(env, spec);
  const auto cov = delta2_covariance(kQueue, c, mc(31, 20'000));
  const auto split = second_order(kQueue, c, mc(32, 20'000));
  CHECK(std::abs(cov.value - split.delta2.value) <
        4 * std::hypot(cov.std_error, split.delta2.std_error));
  CHECK(split.delta2.value < -0.25);
}
