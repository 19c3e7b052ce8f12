#pragma once

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <memory>

#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include "mm1re/rng.hpp"

namespace mm1re {

// x -> clamp(slope x + intercept, lower, upper). Infinite bounds give a plain
// affine map. The family is closed under taking positive and negative parts,
// which is all the perturbation machinery needs.
struct ClampedAffine {
  double slope = 0.0;
  double intercept = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  double operator()(double x) const noexcept;
  bool is_affine() const noexcept;
  bool is_bounded() const noexcept;
  // Points where the clamp switches branch, in increasing order.
  std::vector<double> kinks() const;
};

inline double evaluate(const ClampedAffine& f, double x) { return f(x); }
ClampedAffine positive_part(const ClampedAffine& f);
ClampedAffine negative_part(const ClampedAffine& f);

// E[f(Y)] for Y ~ N(mean, sd^2); sd = 0 is allowed.
double gaussian_expectation(const ClampedAffine& f, double mean, double sd);

class OuEnvironment;

class OuPathSession {
 public:
  OuPathSession(const OuEnvironment& model, RandomStream& rng, double x0);

  double value_at(double t);
  double now() const noexcept { return now_; }

 private:
  const OuEnvironment* model_;
  RandomStream* rng_;
  double state_;
  double now_ = 0.0;
};

// u -> E_nu[f(X(0)) g(X(u))]. Exact when both maps are affine. Otherwise the
// outer expectation over X(0) is a quadrature (Gauss-Hermite when f is smooth,
// Gauss-Kronrod between the kinks of f when it is clamped) and the inner
// conditional expectation is in closed form.
class OuCorrelation {
 public:
  OuCorrelation(ClampedAffine f, ClampedAffine g, double rate, double mean,
                double sd);
  double operator()(double u) const;

  // Evaluation by direct quadrature, bypassing the interpolation table that
  // serves operator() whenever f or g is clamped.
  double direct(double u) const;

 private:
  double at_correlation(double rho) const;

  ClampedAffine f_;
  ClampedAffine g_;
  double rate_;  // reversion rate times time scale
  double mean_;
  double sd_;
  double mean_f_;
  double mean_g_;
  // Cubic spline in w = sqrt(1 - exp(-rate u)), in which the kink-induced
  // singularity at u = 0 is smooth.
  std::shared_ptr<const boost::math::interpolators::cardinal_cubic_b_spline<double>> table_;
};

class OuEnvironment {
 public:
  using state_type = double;
  using function_type = ClampedAffine;
  using session_type = OuPathSession;
  using correlation_type = OuCorrelation;

  // Half-width, in stationary standard deviations, of the effective support
  // used by the soft boundedness check.
  static constexpr double kSoftSupport = 8.0;

  // Throws InvalidModel for non-positive theta or variance.
  OuEnvironment(double theta, double mean, double variance);

  double theta() const noexcept { return theta_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return variance_; }
  double sd() const noexcept { return sd_; }
  double alpha() const noexcept { return alpha_; }

  OuEnvironment time_scale(double alpha) const;

  double sample_stationary(RandomStream& rng) const;
  OuPathSession path_session(RandomStream& rng, double x0) const;

  double expectation(const ClampedAffine& f) const;
  OuCorrelation correlation(const ClampedAffine& f,
                            const ClampedAffine& g) const;
  double correlation_fg(const ClampedAffine& f, const ClampedAffine& g,
                        double u) const {
    return correlation(f, g)(u);
  }
  double spectral_gap() const noexcept { return theta_ * alpha_; }

  // Range of f over the real line, or over mean +- kSoftSupport sd when
  // `soft` is set.
  std::pair<double, double> range(const ClampedAffine& f,
                                  bool soft = false) const;
  void check_function(const ClampedAffine& f) const;

 private:
  friend class OuPathSession;

  double theta_;
  double mean_;
  double variance_;
  double sd_;
  double alpha_ = 1.0;
};

// Probabilists' Gauss-Hermite rule normalized to the standard normal law:
// sum_i w_i h(x_i) ~ E[h(Z)], Z ~ N(0, 1).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermiteRule& gauss_hermite_rule();

}  // namespace mm1re
