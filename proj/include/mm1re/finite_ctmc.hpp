#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <utility>
#include <vector>

#include "mm1re/rng.hpp"

namespace mm1re {

// A function on a finite state space, one value per state.
using StateTable = std::vector<double>;

inline double evaluate(const StateTable& f, std::size_t x) { return f[x]; }
StateTable positive_part(const StateTable& f);
StateTable negative_part(const StateTable& f);

class FiniteCtmc;

// u -> E_nu[f(X(0)) g(X(u))] by uniformization.
//
// With P = I + Q/L the uniformized chain, E_nu[f(X(0)) g(X(u))] equals
// sum_k Pois(k; L a u) s_k where s_k = nu diag(f) P^k g. The sequence s_k is
// precomputed once; it is cut at the first K for which ||P^K g - (nu g) 1||
// is negligible, and every later term is replaced by its limit. The resulting
// truncation error is bounded by the Poisson tail times that residual.
class CtmcCorrelation {
 public:
  CtmcCorrelation(std::vector<double> terms, double limit, double residual,
                  double rate);

  double operator()(double u) const;

  std::size_t n_terms() const noexcept { return terms_.size(); }
  // Bound on |s_k - limit| for k >= n_terms().
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> terms_;
  double limit_;
  double residual_;
  double rate_;  // uniformization rate times time scale
};

// Exact forward sampling of one path, drawing from a stream owned by the
// caller. Queries must be made at non-decreasing times; the path between
// queries is generated by the jump chain.
class CtmcPathSession {
 public:
  CtmcPathSession(const FiniteCtmc& model, RandomStream& rng, std::size_t x0);

  std::size_t value_at(double t);
  double now() const noexcept { return now_; }

 private:
  void schedule_jump();

  const FiniteCtmc* model_;
  RandomStream* rng_;
  std::size_t state_;
  double now_ = 0.0;
  double next_jump_ = 0.0;
};

class FiniteCtmc {
 public:
  using state_type = std::size_t;
  using function_type = StateTable;
  using session_type = CtmcPathSession;
  using correlation_type = CtmcCorrelation;

  // Throws InvalidModel unless `generator` is a square irreducible rate
  // matrix: off-diagonal entries >= 0, rows summing to zero.
  explicit FiniteCtmc(Eigen::MatrixXd generator);

  std::size_t n_states() const noexcept {
    return static_cast<std::size_t>(generator_.rows());
  }
  const Eigen::MatrixXd& generator() const noexcept { return generator_; }
  const Eigen::VectorXd& stationary() const noexcept { return stationary_; }
  double alpha() const noexcept { return alpha_; }

  // The process t -> X(alpha t) of this model.
  FiniteCtmc time_scale(double alpha) const;

  std::size_t sample_stationary(RandomStream& rng) const;
  CtmcPathSession path_session(RandomStream& rng, std::size_t x0) const;

  double expectation(const StateTable& f) const;
  CtmcCorrelation correlation(const StateTable& f, const StateTable& g) const;
  double correlation_fg(const StateTable& f, const StateTable& g,
                        double u) const {
    return correlation(f, g)(u);
  }

  // Smallest |Re| of the non-zero eigenvalues of alpha Q.
  double spectral_gap() const;

  // Range of f on the (finite, all reachable) state space.
  double sup_abs(const StateTable& f) const;
  // [min f, max f]. The flag exists for interface parity with models whose
  // support is unbounded; it has no effect here.
  std::pair<double, double> range(const StateTable& f, bool soft = false) const;
  void check_function(const StateTable& f) const;

 private:
  friend class CtmcPathSession;

  Eigen::MatrixXd generator_;
  Eigen::VectorXd stationary_;
  double alpha_ = 1.0;
  double uniformization_rate_ = 0.0;  // 2 max_i |Q_ii|
  std::vector<double> exit_rates_;
  std::vector<std::vector<double>> jump_cdf_;  // per row, over all states
};

}  // namespace mm1re
