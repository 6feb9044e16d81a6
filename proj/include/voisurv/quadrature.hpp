#pragma once

#include <functional>

namespace voisurv {

struct QuadratureResult {
  double value = 0.0;
  double abs_error = 0.0;
  int subdivisions = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Globally adaptive 21-point Gauss-Kronrod on [a, b]. Splits the interval
/// with the largest error estimate until the summed estimate is <= abs_tol or
/// max_subdivisions intervals exist.
QuadratureResult integrate_gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                                         double abs_tol = 1e-6, int max_subdivisions = 200);

}  // namespace voisurv
