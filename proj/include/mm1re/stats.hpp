#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mm1re {

// Streaming mean/variance (Welford) with an associative merge (Chan et al.).
class RunningStats {
 public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const RunningStats& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const auto n1 = static_cast<double>(count_);
    const auto n2 = static_cast<double>(other.count_);
    const double n = n1 + n2;
    const double delta = other.mean_ - mean_;
    mean_ += delta * n2 / n;
    m2_ += other.m2_ + delta * delta * n1 * n2 / n;
    count_ += other.count_;
  }

  std::uint64_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }
  double std_error() const noexcept {
    return count_ > 1 ? std::sqrt(variance() / static_cast<double>(count_))
                      : 0.0;
  }

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

enum class EstimateMethod { closed_form, semi_analytic_mc, simulation };

constexpr std::string_view to_string(EstimateMethod m) noexcept {
  switch (m) {
    case EstimateMethod::closed_form:
      return "CLOSED_FORM";
    case EstimateMethod::semi_analytic_mc:
      return "SEMI_ANALYTIC_MC";
    case EstimateMethod::simulation:
      return "SIMULATION";
  }
  return "UNKNOWN";
}

// A point value with its Monte Carlo standard error. Closed forms carry a zero
// error and no replicas.
struct CoefficientEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n_replicas = 0;
  EstimateMethod method = EstimateMethod::closed_form;

  static CoefficientEstimate closed(double v) noexcept {
    return {v, 0.0, 0, EstimateMethod::closed_form};
  }
  static CoefficientEstimate from(const RunningStats& s,
                                  EstimateMethod m) noexcept {
    return {s.mean(), s.std_error(), s.count(), m};
  }
};

// |a - b| <= k * sqrt(se_a^2 + se_b^2)
inline bool agrees_within(const CoefficientEstimate& a,
                          const CoefficientEstimate& b, double k) noexcept {
  return std::abs(a.value - b.value) <=
         k * std::hypot(a.std_error, b.std_error);
}

}  // namespace mm1re
