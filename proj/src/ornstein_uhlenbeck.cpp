#include "mm1re/ornstein_uhlenbeck.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mm1re/errors.hpp"
#include "mm1re/quadrature.hpp"

namespace mm1re {
namespace {

constexpr int kHermiteNodes = 80;
constexpr double kOuterSupport = 12.0;  // outer quadrature range, in sd
constexpr int kTableNodes = 257;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// E[clamp(Y, lo, hi)] for Y ~ N(mu, s^2), s > 0.
double clamped_normal_mean(double mu, double s, double lo, double hi) {
  double out = 0.0;
  double p_lo = 0.0;
  double p_hi = 1.0;
  double d_lo = 0.0;
  double d_hi = 0.0;
  if (std::isfinite(lo)) {
    const double a = (lo - mu) / s;
    p_lo = normal_cdf(a);
    d_lo = normal_pdf(a);
    out += lo * p_lo;
  }
  if (std::isfinite(hi)) {
    const double b = (hi - mu) / s;
    p_hi = normal_cdf(b);
    d_hi = normal_pdf(b);
    out += hi * (1.0 - p_hi);
  }
  return out + mu * (p_hi - p_lo) + s * (d_lo - d_hi);
}

}  // namespace

double ClampedAffine::operator()(double x) const noexcept {
  return std::clamp(slope * x + intercept, lower, upper);
}

bool ClampedAffine::is_affine() const noexcept {
  return slope == 0.0 || (std::isinf(lower) && lower < 0.0 &&
                          std::isinf(upper) && upper > 0.0);
}

bool ClampedAffine::is_bounded() const noexcept {
  return slope == 0.0 || (std::isfinite(lower) && std::isfinite(upper));
}

std::vector<double> ClampedAffine::kinks() const {
  std::vector<double> out;
  if (slope == 0.0) return out;
  for (double level : {lower, upper}) {
    if (std::isfinite(level)) out.push_back((level - intercept) / slope);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClampedAffine positive_part(const ClampedAffine& f) {
  return {f.slope, f.intercept, std::max(f.lower, 0.0), std::max(f.upper, 0.0)};
}

ClampedAffine negative_part(const ClampedAffine& f) {
  return {-f.slope, -f.intercept, std::max(-f.upper, 0.0),
          std::max(-f.lower, 0.0)};
}

double gaussian_expectation(const ClampedAffine& f, double mean, double sd) {
  const double mu = f.slope * mean + f.intercept;
  const double s = std::abs(f.slope) * sd;
  if (s == 0.0) return std::clamp(mu, f.lower, f.upper);
  return clamped_normal_mean(mu, s, f.lower, f.upper);
}

const GaussHermiteRule& gauss_hermite_rule() {
  static const GaussHermiteRule rule = [] {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(kHermiteNodes, kHermiteNodes);
    for (int k = 1; k < kHermiteNodes; ++k) {
      jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermiteRule r;
    for (int i = 0; i < kHermiteNodes; ++i) {
      r.nodes.push_back(solver.eigenvalues()(i));
      const double v = solver.eigenvectors()(0, i);
      r.weights.push_back(v * v);
    }
    return r;
  }();
  return rule;
}

OuPathSession::OuPathSession(const OuEnvironment& model, RandomStream& rng,
                             double x0)
    : model_(&model), rng_(&rng), state_(x0) {
  if (!std::isfinite(x0)) throw std::invalid_argument("initial state must be finite");
}

double OuPathSession::value_at(double t) {
  if (t < now_) {
    throw std::invalid_argument("path session queried at a decreasing time");
  }
  const double dt = t - now_;
  if (dt > 0.0) {
    const double k = model_->theta_ * model_->alpha_ * dt;
    state_ = model_->mean_ + (state_ - model_->mean_) * std::exp(-k) +
             model_->sd_ * std::sqrt(-std::expm1(-2.0 * k)) *
                 standard_normal(*rng_);
    now_ = t;
  }
  return state_;
}

OuCorrelation::OuCorrelation(ClampedAffine f, ClampedAffine g, double rate,
                             double mean, double sd)
    : f_(f), g_(g), rate_(rate), mean_(mean), sd_(sd),
      mean_f_(gaussian_expectation(f, mean, sd)),
      mean_g_(gaussian_expectation(g, mean, sd)) {
  if (f_.is_affine() && g_.is_affine()) return;
  std::vector<double> values(kTableNodes);
  const double h = 1.0 / static_cast<double>(kTableNodes - 1);
  for (int i = 0; i < kTableNodes; ++i) {
    const double w = h * i;
    values[i] = at_correlation(1.0 - w * w);
  }
  // G(1 - w^2) is even in w; at w = 1 the slope is -2 G'(0), and G extends
  // smoothly to negative correlations.
  constexpr double d = 1e-4;
  const double right_slope = -(at_correlation(d) - at_correlation(-d)) / d;
  table_ = std::make_shared<
      boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      values.begin(), values.end(), 0.0, h, 0.0, right_slope);
}

double OuCorrelation::operator()(double u) const {
  if (!(u >= 0.0)) throw std::invalid_argument("correlation lag must be >= 0");
  if (!table_) return at_correlation(std::exp(-rate_ * u));
  return (*table_)(std::sqrt(-std::expm1(-rate_ * u)));
}

double OuCorrelation::direct(double u) const {
  if (!(u >= 0.0)) throw std::invalid_argument("correlation lag must be >= 0");
  return at_correlation(std::exp(-rate_ * u));
}

double OuCorrelation::at_correlation(double r) const {
  if (f_.is_affine() && g_.is_affine()) {
    return mean_f_ * mean_g_ + f_.slope * g_.slope * sd_ * sd_ * r;
  }
  const double cond_sd = sd_ * std::sqrt(std::max(0.0, 1.0 - r * r));
  auto inner = [&](double x) {
    return gaussian_expectation(g_, mean_ + (x - mean_) * r, cond_sd);
  };

  if (f_.is_affine() && cond_sd >= 0.25 * sd_) {
    const auto& rule = gauss_hermite_rule();
    double s = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double x = mean_ + sd_ * rule.nodes[i];
      s += rule.weights[i] * f_(x) * inner(x);
    }
    return s;
  }

  // Piecewise integration against the stationary density, split where f is
  // kinked and where the inner expectation nearly is.
  const double lo = mean_ - kOuterSupport * sd_;
  const double hi = mean_ + kOuterSupport * sd_;
  std::vector<double> cuts{lo, hi};
  for (double k : f_.kinks()) cuts.push_back(k);
  if (r > 0.0) {
    for (double k : g_.kinks()) cuts.push_back(mean_ + (k - mean_) / r);
  }
  std::sort(cuts.begin(), cuts.end());
  auto integrand = [&](double x) {
    const double z = (x - mean_) / sd_;
    return normal_pdf(z) / sd_ * f_(x) * inner(x);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = std::max(cuts[i], lo);
    const double b = std::min(cuts[i + 1], hi);
    if (b > a) total += integrate(integrand, a, b, 1e-12);
  }
  return total;
}

OuEnvironment::OuEnvironment(double theta, double mean, double variance)
    : theta_(theta), mean_(mean), variance_(variance),
      sd_(std::sqrt(variance)) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    throw InvalidModel("OU reversion rate theta must be positive");
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidModel("OU stationary variance must be positive");
  }
  if (!std::isfinite(mean)) throw InvalidModel("OU mean must be finite");
}

OuEnvironment OuEnvironment::time_scale(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("time scale alpha must be positive");
  }
  OuEnvironment scaled = *this;
  scaled.alpha_ = alpha_ * alpha;
  return scaled;
}

double OuEnvironment::sample_stationary(RandomStream& rng) const {
  return mean_ + sd_ * standard_normal(rng);
}

OuPathSession OuEnvironment::path_session(RandomStream& rng, double x0) const {
  return OuPathSession(*this, rng, x0);
}

void OuEnvironment::check_function(const ClampedAffine& f) const {
  if (!std::isfinite(f.slope) || !std::isfinite(f.intercept) ||
      std::isnan(f.lower) || std::isnan(f.upper) || !(f.lower <= f.upper)) {
    throw InvalidModel(
        "clamped affine map needs finite slope and intercept and lower <= upper");
  }
}

double OuEnvironment::expectation(const ClampedAffine& f) const {
  check_function(f);
  return gaussian_expectation(f, mean_, sd_);
}

OuCorrelation OuEnvironment::correlation(const ClampedAffine& f,
                                         const ClampedAffine& g) const {
  check_function(f);
  check_function(g);
  return OuCorrelation(f, g, theta_ * alpha_, mean_, sd_);
}

std::pair<double, double> OuEnvironment::range(const ClampedAffine& f,
                                               bool soft) const {
  check_function(f);
  if (f.slope == 0.0) {
    const double c = f(0.0);
    return {c, c};
  }
  if (!soft) return {f.lower, f.upper};
  const double a = f(mean_ - kSoftSupport * sd_);
  const double b = f(mean_ + kSoftSupport * sd_);
  return {std::min(a, b), std::max(a, b)};
}

}  // namespace mm1re
