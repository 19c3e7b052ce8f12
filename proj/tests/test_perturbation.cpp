#include "doctest.h"
#include "mm1re/errors.hpp"
#include "mm1re/perturbation.hpp"

using namespace mm1re;
using doctest::Approx;

namespace {
FiniteCtmc two_state() {
  Eigen::MatrixXd q(2, 2);
  q << -1.0, 1.0, 1.0, -1.0;
  return FiniteCtmc(q);
}
}  // namespace

TEST_CASE("moments and sign pattern of a CTMC perturbation") {
  const auto env = two_state();
  const auto s = PerturbationSpec<FiniteCtmc>::make(env, {0.0, 1.0});
  CHECK(s.sign == SignPattern::nonneg);
  CHECK(s.mean_p == Approx(0.5));
  CHECK(s.var_p == Approx(0.25));
  CHECK(s.sup_plus == 1.0);
  CHECK(s.sup_minus == 0.0);
  CHECK(s.bound_M == 1.0);
  CHECK(s.has_plus());
  CHECK_FALSE(s.has_minus());

  const auto m = PerturbationSpec<FiniteCtmc>::make(env, {-1.0, 2.0});
  CHECK(m.sign == SignPattern::mixed);
  CHECK(m.mean_p_plus == Approx(1.0));
  CHECK(m.mean_p_minus == Approx(0.5));
  CHECK(m.bound_M == 2.0);
  CHECK(PerturbationSpec<FiniteCtmc>::make(env, {0.0, -3.0}).sign == SignPattern::nonpos);
  CHECK(PerturbationSpec<FiniteCtmc>::make(env, {0.0, 0.0}).sign == SignPattern::zero);
  CHECK(to_string(SignPattern::mixed) == "mixed");
}

TEST_CASE("rate bound and stability") {
  const auto env = two_state();
  const auto s = PerturbationSpec<FiniteCtmc>::make(env, {-1.0, 1.0});
  const auto ok = validate(s, QueueParams{1.0, 2.0, 0.1});
  CHECK(ok.mu0 == Approx(1.9));
  CHECK(ok.K == Approx(1.0 / 0.9));
  CHECK_THROWS_AS(validate(s, QueueParams{1.0, 2.0, 2.0}), RateBoundViolation);
  CHECK_THROWS_AS(validate(s, QueueParams{1.0, 2.0, 1.0}), UnstableQueue);
  // a positive perturbation never threatens stability
  const auto up = PerturbationSpec<FiniteCtmc>::make(env, {0.0, 1.0});
  CHECK_NOTHROW(validate(up, QueueParams{1.0, 2.0, 1.5}));
  CHECK_THROWS_AS(validate(up, QueueParams{2.0, 2.0, 0.1}), UnstableQueue);
}

TEST_CASE("OU perturbations: strict and soft boundedness") {
  const OuEnvironment env(1.0, 0.0, 1.0);
  const ClampedAffine lin{0.5, 0.1};
  CHECK_THROWS_AS(PerturbationSpec<OuEnvironment>::make(env, lin), UnboundedPerturbation);
  const auto soft = PerturbationSpec<OuEnvironment>::make(env, lin, BoundMode::soft);
  CHECK(soft.sup_plus == Approx(0.5 * 8.0 + 0.1));
  CHECK(soft.sup_minus == Approx(0.5 * 8.0 - 0.1));
  CHECK(soft.mean_p == Approx(0.1));
  CHECK(soft.var_p == Approx(0.25).epsilon(1e-9));
  CHECK(soft.sign == SignPattern::mixed);

  const auto clipped =
      PerturbationSpec<OuEnvironment>::make(env, ClampedAffine{1.0, 0.0, 0.0, 2.0});
  CHECK(clipped.sign == SignPattern::nonneg);
  CHECK(clipped.bound_M == 2.0);
}
