#pragma once

#include <cstdint>

#include "voisurv/model_evidence.hpp"
#include "voisurv/posterior_mcmc.hpp"

// Independent reference computations shared by the unit and acceptance tests.
namespace voisurv::oracle {

/// Kolmogorov-Smirnov distance of n truncated draws from the exact truncated cdf.
struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;  ///< asymptotic, alpha = 0.01
};
KsResult truncated_sampler_ks(Family f, const LogParams& theta, double t1, std::size_t n, std::uint64_t seed);

/// Log evidence by midpoint quadrature on a G x G grid spanning +-half_width prior SDs.
double grid_log_evidence(const PosteriorSpec& spec, int G = 400, double half_width = 7.0);

/// Bridge sampling on exact draws from a conjugate normal-normal posterior.
struct NormalNormalCheck {
  double bridge = 0.0;
  double exact = 0.0;
  bool converged = false;
};
NormalNormalCheck normal_normal_evidence(std::uint64_t seed, int draws = 4000);

/// Chi-square test of MCMC draws against a grid posterior on a 4 x 4 table of
/// marginal-quartile cells, deflated by the smallest cell-indicator ESS.
struct GofResult {
  double x2 = 0.0;
  double scaled = 0.0;
  double critical = 0.0;  ///< chi-square(15), alpha = 0.01
  double ess = 0.0;
  PosteriorDraws posterior;
};
GofResult mcmc_grid_gof(const PosteriorSpec& spec, const McmcSettings& settings, int G = 400);

}  // namespace voisurv::oracle
