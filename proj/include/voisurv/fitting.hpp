#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "voisurv/distributions.hpp"
#include "voisurv/trial_data.hpp"

namespace voisurv {

/// Maximum-likelihood fit failed (no convergence, singular information matrix).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FittedModel {
  Family family = Family::Weibull;
  LogParams theta_hat{};
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
  double loglik = 0.0;
  double aic = 0.0;
  int n_params = 2;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Two-dimensional normal distribution with a cached Cholesky factor.
class BivariateNormal {
 public:
  BivariateNormal() = default;
  BivariateNormal(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov);

  const Eigen::Vector2d& mean() const { return mean_; }
  const Eigen::Matrix2d& cov() const { return cov_; }
  const Eigen::Matrix2d& chol() const { return chol_; }

  double log_density(const LogParams& x) const;
  /// mean + L z for a given standard-normal vector z.
  LogParams transform(double z0, double z1) const;

  template <class Engine>
  LogParams sample(Engine& rng) const {
    std::normal_distribution<double> n01;
    const double z0 = n01(rng);
    const double z1 = n01(rng);
    return transform(z0, z1);
  }

 private:
  Eigen::Vector2d mean_ = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov_ = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d chol_ = Eigen::Matrix2d::Identity();
  double log_norm_ = 0.0;
  Eigen::Matrix2d prec_ = Eigen::Matrix2d::Identity();
};

// ---- Optimisers ------------------------------------------------------------

struct OptimResult {
  LogParams x{};
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective2 = std::function<double(const LogParams&)>;

/// Nelder-Mead simplex minimisation in two dimensions.
OptimResult nelder_mead(const Objective2& f, const LogParams& start, double initial_step = 0.5,
                        double ftol = 1e-12, int max_iter = 5000);

/// BFGS with central-difference gradients and backtracking line search.
OptimResult bfgs(const Objective2& f, const LogParams& start, double gtol = 1e-7, int max_iter = 200);

LogParams numerical_gradient(const Objective2& f, const LogParams& x);

/// Central-difference Hessian with steps rel_step * max(1, |x_i|), symmetrised.
Eigen::Matrix2d numerical_hessian(const Objective2& f, const LogParams& x, double rel_step);

// ---- Fitting ----------------------------------------------------------------

/// Family-appropriate starting point from the exponential rate estimate.
LogParams initial_values(Family family, std::span<const double> times, std::span<const int> status);

FittedModel fit_mle(Family family, std::span<const double> times, std::span<const int> status);
FittedModel fit_mle(Family family, const TrialArm& arm);

/// Softmax of -AIC/2 with max subtraction.
std::vector<double> akaike_weights(std::span<const double> aics);

BivariateNormal posterior_approx(const FittedModel& fit);

}  // namespace voisurv
