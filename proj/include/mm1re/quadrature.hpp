#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mm1re {

inline constexpr double kQuadratureTolerance = 1e-10;

namespace detail {

struct Partial {
  double value;
  double error;
};

template <class F>
Partial integrate_adaptive(const F& f, double a, double b, double tol,
                           unsigned depth) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  double err = 0.0;
  double l1 = 0.0;
  const double whole = Rule::integrate(f, a, b, 0, 0.0, &err, &l1);
  // The Kronrod error estimate bottoms out at a few ulps of |f| however
  // short the interval is, so bisecting below that level never terminates.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * l1 / (b - a);
  if (err <= tol || err <= floor || depth == 0) return {whole, err};
  const double mid = 0.5 * (a + b);
  const auto left = integrate_adaptive(f, a, mid, 0.5 * tol, depth - 1);
  const auto right = integrate_adaptive(f, mid, b, 0.5 * tol, depth - 1);
  return {left.value + right.value, left.error + right.error};
}

}  // namespace detail

// Integral of f over [a, b] to an absolute error `tol`, by recursive
// bisection over a fixed 7/15-point Gauss-Kronrod pair. Boost's own adaptive
// driver stops on a relative criterion, which is not what an inner integral
// of a Monte Carlo summand needs.
template <class F>
double integrate(const F& f, double a, double b,
                 double tol = kQuadratureTolerance) {
  if (!(b >= a)) throw std::invalid_argument("integrate: need a <= b");
  if (b == a) return 0.0;
  const auto r = detail::integrate_adaptive(f, a, b, tol, 30);
  if (r.error > 1e3 * tol) {
    throw std::runtime_error("quadrature did not reach the absolute tolerance");
  }
  return r.value;
}

}  // namespace mm1re
