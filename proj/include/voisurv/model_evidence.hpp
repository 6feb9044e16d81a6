#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "voisurv/distributions.hpp"
#include "voisurv/posterior_mcmc.hpp"

namespace voisurv {

struct EvidenceResult {
  double log_marginal = 0.0;
  int iterations = 0;
  bool converged = false;
  double relative_change = 0.0;
};

struct BridgeOptions {
  double tolerance = 1e-8;
  int max_iterations = 1000;
  std::uint64_t seed = 1;
};

using LogDensity2 = std::function<double(const LogParams&)>;

/**
 * Iterative bridge sampling estimate of log of the integral of exp(log_q).
 * The first half of `draws` fits a normal proposal; the second half and an
 * equal number of proposal draws enter the fixed-point iteration.
 */
EvidenceResult bridge_sampling(const LogDensity2& log_q, std::span<const LogParams> draws,
                               const BridgeOptions& options = {});

/// Log marginal likelihood of spec.ongoing under spec.prior and the truncated likelihood.
EvidenceResult log_marginal_bridge(const PosteriorSpec& spec, std::span<const LogParams> draws,
                                   const BridgeOptions& options = {});

/// Softmax of log_marginal + log prior, max-subtracted.
std::vector<double> posterior_model_probs(std::span<const double> log_marginals,
                                          std::span<const double> prior_probs);

}  // namespace voisurv
