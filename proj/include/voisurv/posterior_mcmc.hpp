#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "voisurv/distributions.hpp"
#include "voisurv/fitting.hpp"
#include "voisurv/trial_data.hpp"

namespace voisurv {

struct McmcSettings {
  int draws = 2000;  ///< J, pooled over chains
  int warmup = 1000;
  int chains = 4;
  int thin = 5;  ///< iterations per kept draw after warmup
  std::uint64_t seed = 1;

  void validate() const;
};

struct PosteriorSpec {
  Family family = Family::Weibull;
  BivariateNormal prior;
  OngoingArmData ongoing;
};

/**
 * Left-truncated log-likelihood of ongoing data, with event terms reduced to
 * sufficient statistics where the family allows and censorings grouped by
 * time. Matches loglik_left_truncated up to rounding.
 */
class TruncatedLikelihood {
 public:
  TruncatedLikelihood(Family family, const OngoingArmData& data);

  double operator()(const LogParams& theta) const;
  Family family() const { return family_; }
  bool empty() const { return n_events_ == 0 && censored_.empty(); }

 private:
  Family family_;
  double t1_;
  double n_truncated_ = 0.0;  // participants contributing -log S(t1)
  int n_events_ = 0;
  std::vector<double> log_event_times_;
  double sum_log_t_ = 0.0;
  double sum_log_t2_ = 0.0;
  double sum_t_ = 0.0;
  std::vector<std::pair<double, double>> censored_;  // (time, count), times > t1
};

struct McmcDiagnostics {
  std::array<double, 2> rhat{1.0, 1.0};
  std::array<double, 2> ess{0.0, 0.0};
  double acceptance = 0.0;
  bool rhat_warning = false;
};

struct PosteriorDraws {
  std::vector<LogParams> draws;   ///< pooled, chain-major
  std::vector<double> log_target; ///< log prior + log-likelihood at each draw
  McmcDiagnostics diagnostics;
};

/// log prior density + truncated log-likelihood; -infinity where the likelihood is not finite.
double log_unnormalized_posterior(const BivariateNormal& prior, const TruncatedLikelihood& lik,
                                  const LogParams& theta);

/// Adaptive random-walk Metropolis. Chains use streams keyed by (settings.seed, chain).
PosteriorDraws sample_posterior(const PosteriorSpec& spec, const McmcSettings& settings);

/// Split-chain potential scale reduction for one coordinate.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Multi-chain effective sample size (Geyer initial positive sequence).
double effective_sample_size(const std::vector<std::vector<double>>& chains);

}  // namespace voisurv
