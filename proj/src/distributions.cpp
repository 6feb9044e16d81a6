#include "voisurv/distributions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "voisurv/quadrature.hpp"

namespace voisurv {
namespace {

// Double precision throughout; the default policy promotes to long double.
using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

double gamma_q(double a, double x) { return boost::math::gamma_q(a, x, Policy()); }
double lgamma(double a) { return boost::math::lgamma(a, Policy()); }
double erfc_inv(double z) { return boost::math::erfc_inv(z, Policy()); }

constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    std::ostringstream msg;
    msg << "time must be positive and finite, got " << t;
    throw DomainError(msg.str());
  }
}

void check_time_nonneg(double t) {
  if (!(t >= 0.0) || std::isnan(t)) {
    std::ostringstream msg;
    msg << "time must be non-negative, got " << t;
    throw DomainError(msg.str());
  }
}

// log Q(a, x) for the regularized upper incomplete gamma, robust when Q underflows.
double log_gamma_q(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double q = gamma_q(a, x);
  if (q > 1e-280) return std::log(q);
  // Leading terms of the asymptotic expansion for large x.
  const double lead = (a - 1.0) * std::log(x) - x - lgamma(a);
  const double r1 = (a - 1.0) / x;
  const double r2 = r1 * (a - 2.0) / x;
  const double r3 = r2 * (a - 3.0) / x;
  return lead + std::log1p(r1 + r2 + r3);
}

// log of the standard normal upper tail, 1 - Phi(z).
double log_normal_upper(double z) {
  if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  const double z2 = z * z;
  return -0.5 * z2 - std::log(z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double normal_quantile(double p) {
  return -std::numbers::sqrt2 * erfc_inv(2.0 * p);
}

// Solves log Q(alpha, x) = log_s for x by Newton steps inside a shrinking bracket.
double gamma_inverse_log_upper(double alpha, double log_s) {
  if (log_s >= 0.0) return 0.0;
  auto g = [&](double x) { return log_gamma_q(alpha, x) - log_s; };
  double lo = 0.0;
  double hi = std::max(1.0, alpha);
  while (g(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("gamma quantile: failed to bracket root");
  }
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double gx = g(x);
    if (gx > 0.0) lo = x; else hi = x;
    if (std::abs(gx) < 1e-13) return x;
    // d/dx log Q = -hazard(x)
    const double log_f = (alpha - 1.0) * std::log(x) - x - lgamma(alpha);
    const double slope = -std::exp(log_f - log_gamma_q(alpha, x));
    double next = x - gx / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * std::max(1.0, x)) return next;
    x = next;
  }
  if (std::abs(g(x)) > 1e-10) throw NumericError("gamma quantile: Newton/bisection did not converge");
  return x;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Weibull: return "weibull";
    case Family::Gamma: return "gamma";
    case Family::Lognormal: return "lognormal";
    case Family::Loglogistic: return "loglogistic";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  std::erase(lower, '-');
  if (lower == "weibull" || lower == "weib") return Family::Weibull;
  if (lower == "gamma") return Family::Gamma;
  if (lower == "lognormal" || lower == "lnorm") return Family::Lognormal;
  if (lower == "loglogistic" || lower == "llogis") return Family::Loglogistic;
  throw DomainError("unknown survival family '" + std::string(name) + "'");
}

LogParams to_log_params(Family f, double first, double second) {
  if (f == Family::Lognormal) {
    if (!(second > 0.0)) throw DomainError("sdlog must be positive");
    return {first, std::log(second)};
  }
  if (!(first > 0.0) || !(second > 0.0)) throw DomainError("natural parameters must be positive");
  return {std::log(first), std::log(second)};
}

void check_finite(const LogParams& theta) {
  if (!std::isfinite(theta[0]) || !std::isfinite(theta[1])) {
    throw DomainError("non-finite survival parameters");
  }
}

double log_survivor(Family f, const LogParams& theta, double t) {
  check_finite(theta);
  check_time_nonneg(t);
  if (t == 0.0) return 0.0;
  if (std::isinf(t)) return -std::numeric_limits<double>::infinity();
  const double log_t = std::log(t);
  switch (f) {
    case Family::Weibull:
      return -std::exp(std::exp(theta[0]) * (log_t - theta[1]));
    case Family::Gamma:
      return log_gamma_q(std::exp(theta[0]), t * std::exp(theta[1]));
    case Family::Lognormal:
      return log_normal_upper((log_t - theta[0]) / std::exp(theta[1]));
    case Family::Loglogistic: {
      const double u = std::exp(theta[0]) * (log_t - theta[1]);
      return u > 30.0 ? -(u + std::log1p(std::exp(-u))) : -std::log1p(std::exp(u));
    }
  }
  return 0.0;
}

double log_density(Family f, const LogParams& theta, double t) {
  check_finite(theta);
  check_time(t);
  const double log_t = std::log(t);
  switch (f) {
    case Family::Weibull: {
      const double k = std::exp(theta[0]);
      const double u = k * (log_t - theta[1]);
      return theta[0] - theta[1] + (k - 1.0) * (log_t - theta[1]) - std::exp(u);
    }
    case Family::Gamma: {
      const double alpha = std::exp(theta[0]);
      const double beta = std::exp(theta[1]);
      return alpha * theta[1] - lgamma(alpha) + (alpha - 1.0) * log_t - beta * t;
    }
    case Family::Lognormal: {
      const double sigma = std::exp(theta[1]);
      const double z = (log_t - theta[0]) / sigma;
      return -log_t - theta[1] - kLogSqrt2Pi - 0.5 * z * z;
    }
    case Family::Loglogistic: {
      const double k = std::exp(theta[0]);
      const double u = k * (log_t - theta[1]);
      const double log1p_z = u > 30.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
      return theta[0] - theta[1] + (k - 1.0) * (log_t - theta[1]) - 2.0 * log1p_z;
    }
  }
  return 0.0;
}

double log_hazard(Family f, const LogParams& theta, double t) {
  check_finite(theta);
  check_time(t);
  switch (f) {
    case Family::Weibull: {
      const double k = std::exp(theta[0]);
      return theta[0] - theta[1] + (k - 1.0) * (std::log(t) - theta[1]);
    }
    case Family::Loglogistic: {
      const double k = std::exp(theta[0]);
      const double u = k * (std::log(t) - theta[1]);
      const double log1p_z = u > 30.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
      return theta[0] - theta[1] + (k - 1.0) * (std::log(t) - theta[1]) - log1p_z;
    }
    case Family::Gamma:
    case Family::Lognormal:
      return log_density(f, theta, t) - log_survivor(f, theta, t);
  }
  return 0.0;
}

double hazard(Family f, const LogParams& theta, double t) { return std::exp(log_hazard(f, theta, t)); }

double survivor(Family f, const LogParams& theta, double t) {
  check_finite(theta);
  check_time_nonneg(t);
  if (t == 0.0) return 1.0;
  switch (f) {
    case Family::Gamma:
      return gamma_q(std::exp(theta[0]), t * std::exp(theta[1]));
    case Family::Lognormal:
      return 0.5 * std::erfc((std::log(t) - theta[0]) / std::exp(theta[1]) / std::numbers::sqrt2);
    default:
      return std::exp(log_survivor(f, theta, t));
  }
}

double cdf(Family f, const LogParams& theta, double t) { return 1.0 - survivor(f, theta, t); }

double density(Family f, const LogParams& theta, double t) { return std::exp(log_density(f, theta, t)); }

double quantile(Family f, const LogParams& theta, double p) {
  check_finite(theta);
  if (!(p >= 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "probability must lie in [0, 1), got " << p;
    throw DomainError(msg.str());
  }
  if (p == 0.0) return 0.0;
  switch (f) {
    case Family::Weibull:
      return std::exp(theta[1]) * std::pow(-std::log1p(-p), std::exp(-theta[0]));
    case Family::Loglogistic:
      return std::exp(theta[1]) * std::pow(p / (1.0 - p), std::exp(-theta[0]));
    case Family::Lognormal:
      return std::exp(theta[0] + std::exp(theta[1]) * normal_quantile(p));
    case Family::Gamma:
      return gamma_inverse_log_upper(std::exp(theta[0]), std::log1p(-p)) / std::exp(theta[1]);
  }
  return 0.0;
}

double inverse_log_survivor(Family f, const LogParams& theta, double log_s) {
  check_finite(theta);
  if (!(log_s <= 0.0)) throw DomainError("log survivor must be <= 0");
  if (log_s == 0.0) return 0.0;
  switch (f) {
    case Family::Weibull:
      return std::exp(theta[1]) * std::pow(-log_s, std::exp(-theta[0]));
    case Family::Loglogistic: {
      // S = 1 / (1 + z)  =>  z = 1/S - 1
      const double log_z = log_s < -30.0 ? -log_s + std::log1p(-std::exp(log_s))
                                         : std::log(std::expm1(-log_s));
      return std::exp(theta[1] + std::exp(-theta[0]) * log_z);
    }
    case Family::Lognormal: {
      const double z = log_s > -0.69 ? normal_quantile(-std::expm1(log_s))
                                     : std::numbers::sqrt2 * erfc_inv(2.0 * std::exp(log_s));
      return std::exp(theta[0] + std::exp(theta[1]) * z);
    }
    case Family::Gamma:
      return gamma_inverse_log_upper(std::exp(theta[0]), log_s) / std::exp(theta[1]);
  }
  return 0.0;
}

void check_truncation_mass(Family f, const LogParams& theta, double t1) {
  const double log_s1 = log_survivor(f, theta, t1);
  if (!(log_s1 > std::log(1e-12))) {
    std::ostringstream msg;
    msg << family_name(f) << " (" << theta[0] << ", " << theta[1] << "): survival beyond t1=" << t1
        << " is numerically zero (log S = " << log_s1 << ")";
    throw TruncationMassError(msg.str());
  }
}

double truncated_time_from_uniform(Family f, const LogParams& theta, double t1, double v) {
  if (!(v >= 0.0 && v < 1.0)) throw DomainError("uniform draw must lie in [0, 1)");
  if (v == 0.0) return t1;
  const double log_s = log_survivor(f, theta, t1) + std::log1p(-v);
  return std::max(t1, inverse_log_survivor(f, theta, log_s));
}

double loglik_censored(Family f, const LogParams& theta, std::span<const double> times,
                       std::span<const int> status) {
  if (times.size() != status.size()) throw DomainError("times and status differ in length");
  double total = 0.0;
  // Administrative censoring produces long runs of one time; reuse the last log S.
  double last_censor_time = -1.0;
  double last_log_s = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    check_time(times[i]);
    if (status[i] == 1) {
      total += log_density(f, theta, times[i]);
    } else if (status[i] == 0) {
      if (times[i] != last_censor_time) {
        last_censor_time = times[i];
        last_log_s = log_survivor(f, theta, times[i]);
      }
      total += last_log_s;
    } else {
      throw DomainError("status must be 0 or 1");
    }
  }
  return total;
}

double loglik_left_truncated(Family f, const LogParams& theta, std::span<const double> times,
                             std::span<const int> status, double t1) {
  check_time_nonneg(t1);
  for (double t : times) {
    if (t < t1) {
      std::ostringstream msg;
      msg << "observation at " << t << " precedes truncation time " << t1;
      throw DomainError(msg.str());
    }
  }
  const double base = loglik_censored(f, theta, times, status);
  return base - static_cast<double>(times.size()) * log_survivor(f, theta, t1);
}

double restricted_mean_survival(Family f, const LogParams& theta, double t_h) {
  check_finite(theta);
  if (!(t_h > 0.0) || !std::isfinite(t_h)) throw DomainError("restricted-mean horizon must be positive");
  const auto integrand = [&](double t) { return survivor(f, theta, t); };
  const QuadratureResult q = integrate_gauss_kronrod(integrand, 0.0, t_h, 1e-6, 200);
  if (!q.converged) {
    std::ostringstream msg;
    msg << "restricted mean survival did not converge for " << family_name(f) << " (" << theta[0]
        << ", " << theta[1] << "): error estimate " << q.abs_error << " after " << q.subdivisions
        << " subdivisions";
    throw NumericError(msg.str());
  }
  return q.value;
}

}  // namespace voisurv
