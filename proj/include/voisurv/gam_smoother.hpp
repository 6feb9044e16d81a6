#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace voisurv {

/// Cubic regression spline basis parameterised by function values at the knots.
struct CrBasis {
  std::vector<double> knots;
  Eigen::MatrixXd F;        ///< k x k map from knot values to knot second derivatives
  Eigen::MatrixXd penalty;  ///< k x k integrated squared second derivative

  int size() const { return static_cast<int>(knots.size()); }
  /// Design matrix (n x k); linear extrapolation outside the knot range.
  Eigen::MatrixXd evaluate(std::span<const double> x) const;
};

/// Knots at evenly spaced positions through the sorted unique values of x.
std::vector<double> place_knots(std::span<const double> x, int k);

CrBasis make_cr_basis(std::vector<double> knots);

struct SmootherOptions {
  int basis_dimension = 5;
  double log_lambda_min = -18.420680743952367;  // log 1e-8
  double log_lambda_max = 18.420680743952367;
};

struct SmoothFit {
  std::vector<double> fitted;
  Eigen::VectorXd coef;
  std::vector<double> smoothing_params;  ///< one per penalised dimension
  double edf = 1.0;
  double sigma2 = 0.0;
  double gcv = 0.0;
  int dimension = 2;        ///< covariates actually smoothed over (0, 1 or 2)
  bool degenerate = false;  ///< both covariates constant: fitted values are the response mean

  Eigen::MatrixXd design;     ///< K x p
  Eigen::MatrixXd coef_chol;  ///< lower factor L with L L' = Bayesian coefficient covariance

  /// Fitted values for coefficient draws coef + L z, one column per column of z (p x B).
  Eigen::MatrixXd simulate_fitted(const Eigen::MatrixXd& z) const;
};

/**
 * Penalised least squares on a tensor product of two cubic regression spline
 * bases with a sum-to-zero constraint plus intercept; smoothing parameters by
 * GCV. A constant covariate drops out (one-dimensional smooth); two constant
 * covariates give the mean.
 */
SmoothFit fit_tensor_spline(std::span<const double> x1, std::span<const double> x2,
                            std::span<const double> response, const SmootherOptions& options = {});

}  // namespace voisurv
