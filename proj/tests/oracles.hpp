#pragma once

// Reference computations that share no code with the library: exact
// quasi-birth-death passage times for the modulated queue, Feynman-Kac
// survival functions by matrix exponential, brute-force enumeration, and a
// hand-rolled environment path simulation.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

struct TwoState {
  Eigen::MatrixXd q;
  Eigen::VectorXd nu;
};

// Symmetric two-state chain with switching rate beta.
inline TwoState two_state(double beta = 1.0) {
  TwoState t;
  t.q.resize(2, 2);
  t.q << -beta, beta, beta, -beta;
  t.nu = Eigen::VectorXd::Constant(2, 0.5);
  return t;
}

inline Eigen::VectorXd stationary(const Eigen::MatrixXd& q) {
  const auto n = q.rows();
  Eigen::MatrixXd a = q.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  return a.colPivHouseholderQr().solve(b);
}

// Levels are queue lengths, phases environment states. G(i, j) is the
// probability that the first passage from level n to n-1 ends in phase j
// when it starts in phase i; m(i) is its mean duration.
struct Qbd {
  Eigen::MatrixXd g;
  Eigen::VectorXd m;
  Eigen::VectorXd nu;

  // E(T_n) with the environment stationary at the start.
  double mean_busy(unsigned n = 1) const {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.size());
    Eigen::VectorXd term = m;
    for (unsigned k = 0; k < n; ++k) {
      acc += term;
      term = g * term;
    }
    return nu.dot(acc);
  }
};

inline Qbd solve_qbd(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                     double lambda, double mu, double eps) {
  const auto n = q.rows();
  const Eigen::VectorXd rate = (mu + eps * p.array()).matrix();
  if (rate.minCoeff() <= 0.0) throw std::domain_error("non-positive service rate");
  const Eigen::MatrixXd down = rate.asDiagonal();
  Eigen::MatrixXd lam = -q;
  lam.diagonal().array() += lambda + rate.array();
  const auto lu = lam.partialPivLu();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (int it = 0; it < 1'000'000; ++it) {
    Eigen::MatrixXd next = lu.solve(down + lambda * g * g);
    const double diff = (next - g).cwiseAbs().maxCoeff();
    g = std::move(next);
    if (diff < 1e-16) break;
  }
  Qbd out;
  out.g = g;
  out.m = (down - q - lambda * g).partialPivLu().solve(Eigen::VectorXd::Ones(n));
  out.nu = stationary(q);
  return out;
}

// E(B - perturbed B) at eps.
inline double exact_gap(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                        double lambda, double mu, double eps) {
  return solve_qbd(q, p, lambda, mu, 0.0).mean_busy() -
         solve_qbd(q, p, lambda, mu, eps).mean_busy();
}

struct Expansion {
  double d1;
  double d2;
};

// First and second eps-derivatives of the exact gap, by central differences.
inline Expansion exact_expansion(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                                 double lambda, double mu, double h = 1e-3) {
  const double fp = exact_gap(q, p, lambda, mu, h);
  const double fm = exact_gap(q, p, lambda, mu, -h);
  return {(fp - fm) / (2.0 * h), (fp + fm) / (2.0 * h * h)};
}

// nu exp((Q - diag(rate)) x) 1: the probability that a Cox process with
// intensity rate(X(t)) has no point in [0, x].
inline double cox_survival(const Eigen::MatrixXd& q, const Eigen::VectorXd& nu,
                           const Eigen::VectorXd& rate, double x) {
  Eigen::MatrixXd a = q;
  a.diagonal() -= rate;
  const Eigen::MatrixXd e = (a * x).exp();
  return nu.dot(e * Eigen::VectorXd::Ones(q.rows()));
}

// Number of orders of n-1 arrivals and n-1 departures in which the k-th
// arrival precedes the k-th departure, over all orders.
inline double interleave_fraction(unsigned n) {
  if (n <= 1) return 1.0;
  const unsigned m = n - 1;
  std::uint64_t good = 0;
  std::uint64_t total = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << (2 * m)); ++mask) {
    if (static_cast<unsigned>(__builtin_popcountll(mask)) != m) continue;
    ++total;
    int balance = 0;  // arrivals minus departures so far
    bool ok = true;
    for (unsigned i = 0; i < 2 * m && ok; ++i) {
      balance += (mask >> i) & 1ULL ? 1 : -1;
      ok = balance >= 0;
    }
    good += ok;
  }
  return static_cast<double>(good) / static_cast<double>(total);
}

struct MeanSe {
  double mean;
  double se;
};

// E exp(-int_0^x rate(X(s)) ds) over stationary paths, simulated from the
// generator with a private engine.
inline MeanSe cox_survival_mc(const Eigen::MatrixXd& q, const Eigen::VectorXd& nu,
                              const Eigen::VectorXd& rate, double x,
                              std::uint64_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto states = q.rows();
  auto pick = [&](auto weight) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < states; ++j) total += weight(j);
    double u = u01(gen) * total;
    for (Eigen::Index j = 0; j < states; ++j) {
      u -= weight(j);
      if (u < 0.0) return j;
    }
    return states - 1;
  };
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::uint64_t r = 0; r < n; ++r) {
    Eigen::Index s = pick([&](Eigen::Index j) { return nu(j); });
    double t = 0.0;
    double integral = 0.0;
    while (t < x) {
      const double out = -q(s, s);
      const double hold = out > 0.0 ? -std::log1p(-u01(gen)) / out : x;
      const double dt = std::min(hold, x - t);
      integral += rate(s) * dt;
      t += dt;
      if (t < x) {
        const auto from = s;
        s = pick([&](Eigen::Index j) { return j == from ? 0.0 : q(from, j); });
      }
    }
    const double v = std::exp(-integral);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = (sum_sq / static_cast<double>(n) - mean * mean) *
                     static_cast<double>(n) / static_cast<double>(n - 1);
  return {mean, std::sqrt(std::max(var, 0.0) / static_cast<double>(n))};
}

// Delta_2(alpha) for C_p(u) = var exp(-alpha u), straight from its
// defining expectation -(1/mu) E int_0^B (B - v) C_p(v) dv, with the busy
// period density integrated numerically by the trapezoid rule on a fine
// grid. lambda = 1 and mu = 2 only.
inline double delta2_exponential_by_density(double alpha, double var) {
  const double lambda = 1.0;
  const double mu = 2.0;
  auto density = [&](double t) {
    // Busy-period density sqrt(mu/lambda) e^{-(l+m)t} I_1(2 sqrt(lm) t) / t.
    const double z = 2.0 * std::sqrt(lambda * mu) * t;
    return std::sqrt(mu / lambda) * std::exp(-(lambda + mu) * t) *
           std::cyl_bessel_i(1.0, z) / t;
  };
  auto inner = [&](double b) {
    // int_0^b (b - v) e^{-alpha v} dv
    if (alpha == 0.0) return 0.5 * b * b;
    return b / alpha - (1.0 - std::exp(-alpha * b)) / (alpha * alpha);
  };
  const double h = 1e-4;
  const double upper = 200.0;
  double s = 0.0;
  for (double t = h; t < upper; t += h) s += density(t) * inner(t);
  return -var / mu * s * h;
}

}  // namespace oracle
