#include "voisurv/model_evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "voisurv/fitting.hpp"
#include "voisurv/rng.hpp"

namespace voisurv {

EvidenceResult bridge_sampling(const LogDensity2& log_q, std::span<const LogParams> draws,
                               const BridgeOptions& options) {
  const std::size_t n_fit = draws.size() / 2;
  const std::size_t n1 = draws.size() - n_fit;
  if (n_fit < 3 || n1 < 3) throw DomainError("bridge sampling needs at least 6 posterior draws");

  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < n_fit; ++i) mean += Eigen::Vector2d(draws[i][0], draws[i][1]);
  mean /= static_cast<double>(n_fit);
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < n_fit; ++i) {
    const Eigen::Vector2d d = Eigen::Vector2d(draws[i][0], draws[i][1]) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n_fit - 1);
  if (!(cov.determinant() > 0.0) || !(cov(0, 0) > 0.0)) {
    throw DomainError("posterior draws are degenerate: sample covariance is not positive definite");
  }
  const BivariateNormal proposal(mean, cov);

  const std::size_t n2 = n1;
  std::vector<double> l1(n1), l2(n2);
  for (std::size_t i = 0; i < n1; ++i) {
    const LogParams& th = draws[n_fit + i];
    l1[i] = log_q(th) - proposal.log_density(th);
  }
  Rng rng = make_rng({options.seed, 0xb41d6eULL});
  for (std::size_t j = 0; j < n2; ++j) {
    const LogParams th = proposal.sample(rng);
    l2[j] = log_q(th) - proposal.log_density(th);
  }

  std::vector<double> sorted = l1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n1 / 2), sorted.end());
  const double lstar = sorted[n1 / 2];
  if (!std::isfinite(lstar)) throw NumericError("bridge sampling: target not finite at posterior draws");

  const double s1 = static_cast<double>(n1) / static_cast<double>(n1 + n2);
  const double s2 = static_cast<double>(n2) / static_cast<double>(n1 + n2);
  std::vector<double> e1(n1), e2(n2);
  for (std::size_t i = 0; i < n1; ++i) e1[i] = std::exp(l1[i] - lstar);
  for (std::size_t j = 0; j < n2; ++j) e2[j] = std::isfinite(l2[j]) ? std::exp(l2[j] - lstar) : 0.0;

  EvidenceResult res;
  double r = 1.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    double num = 0.0;
    for (double e : e2) num += e / (s1 * e + s2 * r);
    num /= static_cast<double>(n2);
    double den = 0.0;
    for (double e : e1) den += 1.0 / (s1 * e + s2 * r);
    den /= static_cast<double>(n1);
    const double r_new = num / den;
    res.iterations = it;
    res.relative_change = std::abs(r_new - r) / r_new;
    r = r_new;
    if (!std::isfinite(r) || r <= 0.0) break;
    if (res.relative_change < options.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.log_marginal = std::log(r) + lstar;
  if (!std::isfinite(res.log_marginal)) res.converged = false;
  return res;
}

EvidenceResult log_marginal_bridge(const PosteriorSpec& spec, std::span<const LogParams> draws,
                                   const BridgeOptions& options) {
  const TruncatedLikelihood lik(spec.family, spec.ongoing);
  return bridge_sampling(
      [&](const LogParams& th) { return log_unnormalized_posterior(spec.prior, lik, th); }, draws, options);
}

std::vector<double> posterior_model_probs(std::span<const double> log_marginals,
                                          std::span<const double> prior_probs) {
  if (log_marginals.size() != prior_probs.size() || log_marginals.empty()) {
    throw DomainError("log marginals and prior probabilities must be non-empty and equal in length");
  }
  std::vector<double> a(log_marginals.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(log_marginals[i])) throw DomainError("log marginal likelihoods must be finite");
    a[i] = prior_probs[i] > 0.0 ? log_marginals[i] + std::log(prior_probs[i])
                                : -std::numeric_limits<double>::infinity();
  }
  const double m = *std::max_element(a.begin(), a.end());
  std::vector<double> p(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) p[i] = std::exp(a[i] - m);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& x : p) x /= total;
  return p;
}

}  // namespace voisurv
