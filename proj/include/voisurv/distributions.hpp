#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace voisurv {

/// The four candidate parametric survival families.
enum class Family { Weibull, Gamma, Lognormal, Loglogistic };

inline constexpr std::array<Family, 4> kAllFamilies = {
    Family::Weibull, Family::Gamma, Family::Lognormal, Family::Loglogistic};

std::string_view family_name(Family f);
/// Accepts the canonical names plus a few common short forms ("weib", "lnorm", "llogis").
Family parse_family(std::string_view name);

/**
 * Two survival-model parameters on the transformed (fitting) scale.
 *
 *  - Weibull:      (log shape, log scale)
 *  - Gamma:        (log shape, log rate)
 *  - Lognormal:    (meanlog, log sdlog)
 *  - Log-logistic: (log shape, log scale)
 */
using LogParams = std::array<double, 2>;

/// Raised when an argument is outside the support of a kernel.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when left truncation leaves (numerically) no probability mass.
class TruncationMassError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative numerical routine fails to meet its tolerance.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Converts natural parameters (shape/scale, shape/rate, meanlog/sdlog) to LogParams.
LogParams to_log_params(Family f, double first, double second);

double hazard(Family f, const LogParams& theta, double t);
double log_hazard(Family f, const LogParams& theta, double t);
double survivor(Family f, const LogParams& theta, double t);
double log_survivor(Family f, const LogParams& theta, double t);
double cdf(Family f, const LogParams& theta, double t);
double density(Family f, const LogParams& theta, double t);
double log_density(Family f, const LogParams& theta, double t);

/// Inverse CDF for p in [0, 1). Gamma uses bracketed Newton to 1e-10 in probability.
double quantile(Family f, const LogParams& theta, double p);

/// Inverse survivor function given log S. More accurate than quantile() in the far tail.
double inverse_log_survivor(Family f, const LogParams& theta, double log_s);

/**
 * Maps a uniform draw v in [0, 1) to a time from the law left-truncated at t1.
 * v = 0 maps to t1 exactly; the result is never below t1.
 */
double truncated_time_from_uniform(Family f, const LogParams& theta, double t1, double v);

/// Draws n survival times from the law conditional on T > t1.
template <class Engine>
std::vector<double> sample_truncated(Family f, const LogParams& theta, double t1, std::size_t n,
                                     Engine& rng);

/// Sum of delta_i * log h(x_i) + log S(x_i).
double loglik_censored(Family f, const LogParams& theta, std::span<const double> times,
                       std::span<const int> status);

/// loglik_censored minus n * log S(t1). Requires every time >= t1.
double loglik_left_truncated(Family f, const LogParams& theta, std::span<const double> times,
                             std::span<const int> status, double t1);

/// Integral of S(t) over [0, t_h] by adaptive Gauss-Kronrod quadrature.
double restricted_mean_survival(Family f, const LogParams& theta, double t_h);

// ---------------------------------------------------------------------------

void check_finite(const LogParams& theta);
void check_truncation_mass(Family f, const LogParams& theta, double t1);

template <class Engine>
std::vector<double> sample_truncated(Family f, const LogParams& theta, double t1, std::size_t n,
                                     Engine& rng) {
  check_finite(theta);
  check_truncation_mass(f, theta, t1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(truncated_time_from_uniform(f, theta, t1, unif(rng)));
  }
  return out;
}

}  // namespace voisurv
