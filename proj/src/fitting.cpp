#include "voisurv/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace voisurv {

BivariateNormal::BivariateNormal(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov)
    : mean_(mean), cov_(0.5 * (cov + cov.transpose())) {
  Eigen::LLT<Eigen::Matrix2d> llt(cov_);
  if (llt.info() != Eigen::Success) throw DomainError("covariance matrix is not positive definite");
  chol_ = llt.matrixL();
  prec_ = llt.solve(Eigen::Matrix2d::Identity());
  log_norm_ = -std::log(2.0 * std::numbers::pi) - std::log(chol_(0, 0)) - std::log(chol_(1, 1));
}

double BivariateNormal::log_density(const LogParams& x) const {
  const Eigen::Vector2d d(x[0] - mean_(0), x[1] - mean_(1));
  return log_norm_ - 0.5 * d.dot(prec_ * d);
}

LogParams BivariateNormal::transform(double z0, double z1) const {
  return {mean_(0) + chol_(0, 0) * z0, mean_(1) + chol_(1, 0) * z0 + chol_(1, 1) * z1};
}

// ---------------------------------------------------------------------------

OptimResult nelder_mead(const Objective2& f, const LogParams& start, double initial_step, double ftol,
                        int max_iter) {
  std::array<LogParams, 3> p{start, start, start};
  p[1][0] += initial_step;
  p[2][1] += initial_step;
  std::array<double, 3> v{f(p[0]), f(p[1]), f(p[2])};
  auto point = [](const LogParams& a, const LogParams& b, double t) {
    return LogParams{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };
  OptimResult r;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::array<int, 3> idx{0, 1, 2};
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    const int best = idx[0], mid = idx[1], worst = idx[2];
    const double spread = std::abs(v[worst] - v[best]);
    const double size = std::max(std::abs(p[worst][0] - p[best][0]) + std::abs(p[worst][1] - p[best][1]),
                                 std::abs(p[mid][0] - p[best][0]) + std::abs(p[mid][1] - p[best][1]));
    if (std::isfinite(v[best]) && spread <= ftol * (std::abs(v[best]) + 1e-10) && size < 1e-9) {
      r.converged = true;
      break;
    }
    const LogParams centroid{0.5 * (p[best][0] + p[mid][0]), 0.5 * (p[best][1] + p[mid][1])};
    const LogParams xr = point(centroid, p[worst], -1.0);
    const double fr = f(xr);
    if (fr < v[best]) {
      const LogParams xe = point(centroid, p[worst], -2.0);
      const double fe = f(xe);
      if (fe < fr) {
        p[worst] = xe;
        v[worst] = fe;
      } else {
        p[worst] = xr;
        v[worst] = fr;
      }
    } else if (fr < v[mid]) {
      p[worst] = xr;
      v[worst] = fr;
    } else {
      const bool outside = fr < v[worst];
      const LogParams xc = outside ? point(centroid, xr, 0.5) : point(centroid, p[worst], 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, v[worst])) {
        p[worst] = xc;
        v[worst] = fc;
      } else {
        for (int i : {mid, worst}) {
          p[i] = point(p[best], p[i], 0.5);
          v[i] = f(p[i]);
        }
      }
    }
  }
  const auto best = std::min_element(v.begin(), v.end()) - v.begin();
  r.x = p[best];
  r.value = v[best];
  r.iterations = iter;
  return r;
}

LogParams numerical_gradient(const Objective2& f, const LogParams& x) {
  LogParams g{};
  for (int i = 0; i < 2; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    LogParams up = x, dn = x;
    up[i] += h;
    dn[i] -= h;
    g[i] = (f(up) - f(dn)) / (2.0 * h);
  }
  return g;
}

Eigen::Matrix2d numerical_hessian(const Objective2& f, const LogParams& x, double rel_step) {
  const std::array<double, 2> h{rel_step * std::max(1.0, std::abs(x[0])),
                                rel_step * std::max(1.0, std::abs(x[1]))};
  const double f0 = f(x);
  Eigen::Matrix2d H;
  for (int i = 0; i < 2; ++i) {
    LogParams up = x, dn = x;
    up[i] += h[i];
    dn[i] -= h[i];
    H(i, i) = (f(up) - 2.0 * f0 + f(dn)) / (h[i] * h[i]);
  }
  auto shifted = [&](double s0, double s1) { return f(LogParams{x[0] + s0 * h[0], x[1] + s1 * h[1]}); };
  const double cross =
      (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4.0 * h[0] * h[1]);
  H(0, 1) = cross;
  H(1, 0) = cross;
  return H;
}

OptimResult bfgs(const Objective2& f, const LogParams& start, double gtol, int max_iter) {
  using V = Eigen::Vector2d;
  auto to_v = [](const LogParams& p) { return V(p[0], p[1]); };
  auto to_p = [](const V& v) { return LogParams{v(0), v(1)}; };
  V x = to_v(start);
  double fx = f(start);
  V g = to_v(numerical_gradient(f, start));
  Eigen::Matrix2d Hinv = Eigen::Matrix2d::Identity();
  OptimResult r;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    if (g.norm() < gtol) {
      r.converged = true;
      break;
    }
    V dir = -Hinv * g;
    if (dir.dot(g) >= 0.0) {
      Hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    V xn;
    double fn = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * dir;
      fn = f(to_p(xn));
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * g.dot(dir)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const V gn = to_v(numerical_gradient(f, to_p(xn)));
    const V s = xn - x;
    const V y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-14) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = xn;
    fx = fn;
    g = gn;
  }
  if (!r.converged && g.norm() < gtol) r.converged = true;
  r.x = to_p(x);
  r.value = fx;
  r.iterations = iter;
  return r;
}

// ---------------------------------------------------------------------------

LogParams initial_values(Family family, std::span<const double> times, std::span<const int> status) {
  const double total = std::accumulate(times.begin(), times.end(), 0.0);
  const int events = std::accumulate(status.begin(), status.end(), 0);
  const double mean_time = total / std::max(events, 1);
  const double log_m = std::log(mean_time);
  switch (family) {
    case Family::Weibull:
    case Family::Loglogistic:
      return {0.0, log_m};
    case Family::Gamma:
      return {0.0, -log_m};
    case Family::Lognormal:
      return {log_m, 0.0};
  }
  return {0.0, log_m};
}

FittedModel fit_mle(Family family, const TrialArm& arm) {
  arm.validate();
  return fit_mle(family, arm.times, arm.status);
}

FittedModel fit_mle(Family family, std::span<const double> times, std::span<const int> status) {
  if (times.size() != status.size()) throw DataError("times and status differ in length");
  const int events = std::accumulate(status.begin(), status.end(), 0);
  if (events < 2) throw FitError(std::string(family_name(family)) + ": need at least 2 events to fit");

  const Objective2 negll = [&](const LogParams& th) {
    const double v = -loglik_censored(family, th, times, status);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  const LogParams start = initial_values(family, times, status);
  const OptimResult nm = nelder_mead(negll, start);
  const OptimResult qn = bfgs(negll, nm.x);
  const OptimResult& best = qn.value <= nm.value ? qn : nm;
  const LogParams g = numerical_gradient(negll, best.x);
  const double gnorm = std::hypot(g[0], g[1]);

  FittedModel fit;
  fit.family = family;
  fit.theta_hat = best.x;
  fit.loglik = -best.value;
  fit.aic = -2.0 * fit.loglik + 2.0 * fit.n_params;
  fit.iterations = nm.iterations + qn.iterations;
  fit.gradient_norm = gnorm;
  fit.converged = std::isfinite(best.value) && gnorm < 1e-4;
  if (!fit.converged) {
    std::ostringstream msg;
    msg << family_name(family) << ": optimiser did not converge (theta = " << best.x[0] << ", "
        << best.x[1] << "; -loglik = " << best.value << "; |grad| = " << gnorm << "; nelder-mead "
        << nm.iterations << " its, bfgs " << qn.iterations << " its)";
    throw FitError(msg.str());
  }

  for (double step : {1e-4, 1e-3}) {
    const Eigen::Matrix2d info = numerical_hessian(negll, best.x, step);
    Eigen::LLT<Eigen::Matrix2d> llt(info);
    if (llt.info() == Eigen::Success && info(0, 0) > 0.0 && info.determinant() > 0.0) {
      Eigen::Matrix2d cov = llt.solve(Eigen::Matrix2d::Identity());
      fit.cov = 0.5 * (cov + cov.transpose());
      return fit;
    }
  }
  throw FitError(std::string(family_name(family)) + ": observed information is not positive definite");
}

std::vector<double> akaike_weights(std::span<const double> aics) {
  if (aics.empty()) throw DomainError("need at least one AIC");
  for (double a : aics) {
    if (!std::isfinite(a)) throw DomainError("AIC values must be finite");
  }
  const double best = *std::min_element(aics.begin(), aics.end());
  std::vector<double> w(aics.size());
  for (std::size_t i = 0; i < aics.size(); ++i) w[i] = std::exp(-0.5 * (aics[i] - best));
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

BivariateNormal posterior_approx(const FittedModel& fit) {
  return BivariateNormal(Eigen::Vector2d(fit.theta_hat[0], fit.theta_hat[1]), fit.cov);
}

}  // namespace voisurv
