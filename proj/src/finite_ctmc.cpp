#include "mm1re/finite_ctmc.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "mm1re/errors.hpp"

namespace mm1re {
namespace {

constexpr double kUniformizationTolerance = 1e-12;
constexpr std::size_t kMaxUniformizationTerms = 1'000'000;

bool strongly_connected(const Eigen::MatrixXd& q) {
  const auto n = q.rows();
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<Eigen::Index> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < n; ++j) {
        const double rate = transpose ? q(j, i) : q(i, j);
        if (j != i && rate > 0.0 && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          stack.push_back(j);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c; });
  };
  return reach_all(false) && reach_all(true);
}

}  // namespace

StateTable positive_part(const StateTable& f) {
  StateTable out(f.size());
  std::transform(f.begin(), f.end(), out.begin(),
                 [](double v) { return std::max(v, 0.0); });
  return out;
}

StateTable negative_part(const StateTable& f) {
  StateTable out(f.size());
  std::transform(f.begin(), f.end(), out.begin(),
                 [](double v) { return std::max(-v, 0.0); });
  return out;
}

CtmcCorrelation::CtmcCorrelation(std::vector<double> terms, double limit,
                                 double residual, double rate)
    : terms_(std::move(terms)), limit_(limit), residual_(residual),
      rate_(rate) {}

double CtmcCorrelation::operator()(double u) const {
  if (!(u >= 0.0)) throw std::invalid_argument("correlation lag must be >= 0");
  const double mean = rate_ * u;
  if (mean == 0.0) return terms_.front();
  const double log_mean = std::log(mean);
  double sum = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const double kd = static_cast<double>(k);
    const double w = std::exp(-mean + kd * log_mean - std::lgamma(kd + 1.0));
    sum += w * terms_[k];
    mass += w;
    if (kd > mean && 1.0 - mass < 1e-17) break;
  }
  const double tail = std::max(0.0, 1.0 - mass);
  if (tail * residual_ > kUniformizationTolerance) {
    throw std::runtime_error(
        "uniformization truncation error above tolerance; chain mixes too "
        "slowly for this lag");
  }
  return sum + tail * limit_;
}

CtmcPathSession::CtmcPathSession(const FiniteCtmc& model, RandomStream& rng,
                                 std::size_t x0)
    : model_(&model), rng_(&rng), state_(x0) {
  if (x0 >= model.n_states()) {
    throw std::invalid_argument("initial state out of range");
  }
  schedule_jump();
}

void CtmcPathSession::schedule_jump() {
  const double rate = model_->alpha_ * model_->exit_rates_[state_];
  next_jump_ = rate > 0.0 ? now_ + exponential(*rng_, rate)
                          : std::numeric_limits<double>::infinity();
}

std::size_t CtmcPathSession::value_at(double t) {
  if (t < now_) {
    throw std::invalid_argument("path session queried at a decreasing time");
  }
  while (next_jump_ <= t) {
    now_ = next_jump_;
    const auto& cdf = model_->jump_cdf_[state_];
    const double u = uniform01(*rng_);
    state_ = static_cast<std::size_t>(
        std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    state_ = std::min(state_, cdf.size() - 1);
    schedule_jump();
  }
  now_ = t;
  return state_;
}

FiniteCtmc::FiniteCtmc(Eigen::MatrixXd generator)
    : generator_(std::move(generator)) {
  const auto n = generator_.rows();
  if (n == 0 || generator_.cols() != n) {
    throw InvalidModel("generator must be a non-empty square matrix");
  }
  if (!generator_.allFinite()) throw InvalidModel("generator has non-finite entries");
  double scale = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    scale = std::max(scale, std::abs(generator_(i, i)));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && generator_(i, j) < 0.0) {
        throw InvalidModel("generator off-diagonal entry (" + std::to_string(i) +
                           "," + std::to_string(j) + ") is negative");
      }
    }
    if (std::abs(generator_.row(i).sum()) > 1e-10 * scale) {
      throw InvalidModel("generator row " + std::to_string(i) +
                         " does not sum to zero");
    }
  }
  if (!strongly_connected(generator_)) {
    throw InvalidModel("generator is not irreducible");
  }

  Eigen::MatrixXd a = generator_.transpose();
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  stationary_ = a.fullPivLu().solve(b);
  const double residual = (stationary_.transpose() * generator_).cwiseAbs().maxCoeff();
  if (residual > 1e-12 * scale || (stationary_.array() < -1e-14).any()) {
    throw InvalidModel("could not solve for the stationary distribution");
  }
  stationary_ = stationary_.cwiseMax(0.0);
  stationary_ /= stationary_.sum();

  exit_rates_.resize(static_cast<std::size_t>(n));
  jump_cdf_.resize(static_cast<std::size_t>(n));
  double max_rate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = -generator_(i, i);
    exit_rates_[static_cast<std::size_t>(i)] = q;
    max_rate = std::max(max_rate, q);
    auto& cdf = jump_cdf_[static_cast<std::size_t>(i)];
    cdf.resize(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i && q > 0.0) acc += generator_(i, j) / q;
      cdf[static_cast<std::size_t>(j)] = acc;
    }
  }
  uniformization_rate_ = 2.0 * max_rate;
}

FiniteCtmc FiniteCtmc::time_scale(double alpha) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("time scale alpha must be positive");
  }
  FiniteCtmc scaled = *this;
  scaled.alpha_ = alpha_ * alpha;
  return scaled;
}

std::size_t FiniteCtmc::sample_stationary(RandomStream& rng) const {
  const double u = uniform01(rng);
  double acc = 0.0;
  const auto n = n_states();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    acc += stationary_(static_cast<Eigen::Index>(i));
    if (u < acc) return i;
  }
  return n - 1;
}

CtmcPathSession FiniteCtmc::path_session(RandomStream& rng,
                                         std::size_t x0) const {
  return CtmcPathSession(*this, rng, x0);
}

void FiniteCtmc::check_function(const StateTable& f) const {
  if (f.size() != n_states()) {
    throw InvalidModel("state table has " + std::to_string(f.size()) +
                       " entries for a " + std::to_string(n_states()) +
                       "-state environment");
  }
  for (double v : f) {
    if (!std::isfinite(v)) throw InvalidModel("state table has non-finite values");
  }
}

double FiniteCtmc::expectation(const StateTable& f) const {
  check_function(f);
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    s += stationary_(static_cast<Eigen::Index>(i)) * f[i];
  }
  return s;
}

double FiniteCtmc::sup_abs(const StateTable& f) const {
  check_function(f);
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

std::pair<double, double> FiniteCtmc::range(const StateTable& f, bool) const {
  check_function(f);
  const auto [lo, hi] = std::minmax_element(f.begin(), f.end());
  return {*lo, *hi};
}

CtmcCorrelation FiniteCtmc::correlation(const StateTable& f,
                                        const StateTable& g) const {
  check_function(f);
  check_function(g);
  const auto n = static_cast<Eigen::Index>(n_states());
  const Eigen::Map<const Eigen::VectorXd> fv(f.data(), n);
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), n);
  const Eigen::VectorXd weighted = stationary_.cwiseProduct(fv);
  const double limit = stationary_.dot(gv) * stationary_.dot(fv);
  const double f_mass = weighted.cwiseAbs().sum();

  std::vector<double> terms;
  Eigen::VectorXd v = gv;
  const double g_mean = stationary_.dot(gv);
  double residual = (v.array() - g_mean).abs().maxCoeff() * f_mass;
  if (uniformization_rate_ == 0.0) {
    return CtmcCorrelation({weighted.dot(v)}, limit, 0.0, 0.0);
  }
  const Eigen::MatrixXd p =
      Eigen::MatrixXd::Identity(n, n) + generator_ / uniformization_rate_;
  const double floor = 1e-15 * std::max(1.0, f_mass * gv.cwiseAbs().maxCoeff());
  while (terms.size() < kMaxUniformizationTerms) {
    terms.push_back(weighted.dot(v));
    if (residual <= floor) break;
    v = p * v;
    residual = (v.array() - g_mean).abs().maxCoeff() * f_mass;
  }
  return CtmcCorrelation(std::move(terms), limit, residual,
                         uniformization_rate_ * alpha_);
}

double FiniteCtmc::spectral_gap() const {
  if (n_states() == 1) return std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(generator_, false);
  const auto& ev = solver.eigenvalues();
  double scale = 1.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) scale = std::max(scale, std::abs(ev(i)));
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > 1e-9 * scale) gap = std::min(gap, -ev(i).real());
  }
  return gap * alpha_;
}

}  // namespace mm1re
