#include "voisurv/posterior_mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "voisurv/rng.hpp"

namespace voisurv {
namespace {

using Policy = boost::math::policies::policy<boost::math::policies::promote_double<false>>;
constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

void McmcSettings::validate() const {
  if (draws < 100) throw DomainError("MCMC draws must be at least 100");
  if (warmup < 100) throw DomainError("MCMC warmup must be at least 100");
  if (chains < 2) throw DomainError("MCMC needs at least 2 chains");
  if (thin < 1) throw DomainError("MCMC thinning interval must be at least 1");
  if (draws < chains) throw DomainError("MCMC draws must be at least the number of chains");
}

TruncatedLikelihood::TruncatedLikelihood(Family family, const OngoingArmData& data)
    : family_(family), t1_(data.t1) {
  data.validate();
  std::map<double, double> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double t = data.times[i];
    if (data.status[i] == 1) {
      if (!(t > 0.0)) throw DomainError("event time must be positive");
      const double lt = std::log(t);
      ++n_events_;
      log_event_times_.push_back(lt);
      sum_log_t_ += lt;
      sum_log_t2_ += lt * lt;
      sum_t_ += t;
      n_truncated_ += 1.0;
    } else if (t > t1_) {
      groups[t] += 1.0;
      n_truncated_ += 1.0;
    }
    // A censoring at t1 contributes log S(t1) - log S(t1) = 0.
  }
  censored_.assign(groups.begin(), groups.end());
}

double TruncatedLikelihood::operator()(const LogParams& theta) const {
  if (!std::isfinite(theta[0]) || !std::isfinite(theta[1])) return kNegInf;
  if (n_truncated_ == 0.0) return 0.0;
  const double ne = n_events_;
  double events = 0.0;
  switch (family_) {
    case Family::Weibull: {
      const double k = std::exp(theta[0]);
      double cum = 0.0;
      for (double lt : log_event_times_) cum += std::exp(k * (lt - theta[1]));
      events = ne * (theta[0] - theta[1]) + (k - 1.0) * (sum_log_t_ - ne * theta[1]) - cum;
      break;
    }
    case Family::Gamma: {
      const double alpha = std::exp(theta[0]);
      const double beta = std::exp(theta[1]);
      const double lg = ne > 0.0 ? boost::math::lgamma(alpha, Policy()) : 0.0;
      events = ne * (alpha * theta[1] - lg) + (alpha - 1.0) * sum_log_t_ - beta * sum_t_;
      break;
    }
    case Family::Lognormal: {
      const double inv_var = std::exp(-2.0 * theta[1]);
      const double mu = theta[0];
      const double ss = sum_log_t2_ - 2.0 * mu * sum_log_t_ + ne * mu * mu;
      events = -sum_log_t_ - ne * (theta[1] + kLogSqrt2Pi) - 0.5 * inv_var * ss;
      break;
    }
    case Family::Loglogistic: {
      const double k = std::exp(theta[0]);
      double cum = 0.0;
      for (double lt : log_event_times_) {
        const double u = k * (lt - theta[1]);
        cum += u > 30.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
      }
      events = ne * (theta[0] - theta[1]) + (k - 1.0) * (sum_log_t_ - ne * theta[1]) - 2.0 * cum;
      break;
    }
  }
  double total = events;
  for (const auto& [t, count] : censored_) total += count * log_survivor(family_, theta, t);
  total -= n_truncated_ * log_survivor(family_, theta, t1_);
  return std::isfinite(total) ? total : kNegInf;
}

double log_unnormalized_posterior(const BivariateNormal& prior, const TruncatedLikelihood& lik,
                                  const LogParams& theta) {
  const double ll = lik(theta);
  if (!std::isfinite(ll)) return kNegInf;
  return prior.log_density(theta) + ll;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  for (const auto& c : chains) {
    const std::size_t h = c.size() / 2;
    if (h < 2) throw DomainError("chains too short for split R-hat");
    halves.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(h));
    halves.emplace_back(c.end() - static_cast<std::ptrdiff_t>(h), c.end());
  }
  const double n = static_cast<double>(halves.front().size());
  std::vector<double> means;
  double w = 0.0;
  for (const auto& h : halves) {
    const double m = mean_of(h);
    means.push_back(m);
    w += var_of(h, m);
  }
  w /= static_cast<double>(halves.size());
  const double grand = mean_of(means);
  const double b = n * var_of(means, grand);
  if (w <= 0.0) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) return 0.0;
  std::vector<double> means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    std::vector<double> head(chains[c].begin(), chains[c].begin() + static_cast<std::ptrdiff_t>(n));
    means[c] = mean_of(head);
    vars[c] = var_of(head, means[c]);
  }
  const double w = mean_of(vars);
  const double b_over_n = m > 1 ? var_of(means, mean_of(means)) : 0.0;
  const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b_over_n;
  if (!(var_plus > 0.0)) return static_cast<double>(m * n);

  auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) {
        s += (chains[c][i] - means[c]) * (chains[c][i + lag] - means[c]);
      }
      acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(m);
  };
  auto rho = [&](std::size_t lag) { return 1.0 - (w - autocov(lag)) / var_plus; };

  double tau = -1.0;
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = rho(lag) + rho(lag + 1);
    if (pair < 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(m * n)));
  return static_cast<double>(m * n) / tau;
}

PosteriorDraws sample_posterior(const PosteriorSpec& spec, const McmcSettings& settings) {
  settings.validate();
  const TruncatedLikelihood lik(spec.family, spec.ongoing);
  const auto log_target = [&](const LogParams& th) { return log_unnormalized_posterior(spec.prior, lik, th); };

  const double prior_ll = lik(LogParams{spec.prior.mean()(0), spec.prior.mean()(1)});
  if (!std::isfinite(prior_ll)) {
    std::ostringstream msg;
    msg << family_name(spec.family) << ": truncated likelihood is not finite at the prior mean";
    throw NumericError(msg.str());
  }

  const int n_chains = settings.chains;
  PosteriorDraws out;
  out.draws.reserve(static_cast<std::size_t>(settings.draws));
  out.log_target.reserve(static_cast<std::size_t>(settings.draws));
  std::array<std::vector<std::vector<double>>, 2> traces;
  traces[0].resize(static_cast<std::size_t>(n_chains));
  traces[1].resize(static_cast<std::size_t>(n_chains));
  long accepted_total = 0;
  long proposed_total = 0;

  constexpr int kBatch = 50;
  for (int c = 0; c < n_chains; ++c) {
    const int kept = settings.draws / n_chains + (c < settings.draws % n_chains ? 1 : 0);
    Rng rng = make_rng({settings.seed, static_cast<std::uint64_t>(c)});
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    double z0 = n01(rng);
    double z1 = n01(rng);
    LogParams x = spec.prior.transform(z0, z1);
    double lp = log_target(x);
    if (!std::isfinite(lp)) {
      x = {spec.prior.mean()(0), spec.prior.mean()(1)};
      lp = log_target(x);
    }

    Eigen::Matrix2d prop_chol = spec.prior.chol();
    double log_scale = std::log(2.38 / std::numbers::sqrt2);
    int batch_accepts = 0;
    int batch_index = 0;
    std::vector<LogParams> warm;
    warm.reserve(static_cast<std::size_t>(settings.warmup));

    const int total_iter = settings.warmup + kept * settings.thin;
    for (int it = 0; it < total_iter; ++it) {
      z0 = n01(rng);
      z1 = n01(rng);
      const double s = std::exp(log_scale);
      const LogParams y{x[0] + s * prop_chol(0, 0) * z0,
                        x[1] + s * (prop_chol(1, 0) * z0 + prop_chol(1, 1) * z1)};
      const double ly = log_target(y);
      const double u = unif(rng);
      bool accept = std::isfinite(ly) && std::log(u) < ly - lp;
      if (accept) {
        x = y;
        lp = ly;
      }
      if (it < settings.warmup) {
        warm.push_back(x);
        batch_accepts += accept ? 1 : 0;
        if ((it + 1) % kBatch == 0) {
          ++batch_index;
          const double rate = static_cast<double>(batch_accepts) / kBatch;
          log_scale += 3.0 * (rate - 0.3) / std::sqrt(static_cast<double>(batch_index));
          batch_accepts = 0;
        }
        // Halfway through warmup, switch the proposal shape to the draws seen so far.
        if (it + 1 == settings.warmup / 2) {
          const std::size_t from = warm.size() / 2;
          Eigen::Vector2d m = Eigen::Vector2d::Zero();
          for (std::size_t i = from; i < warm.size(); ++i) m += Eigen::Vector2d(warm[i][0], warm[i][1]);
          m /= static_cast<double>(warm.size() - from);
          Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
          for (std::size_t i = from; i < warm.size(); ++i) {
            const Eigen::Vector2d d = Eigen::Vector2d(warm[i][0], warm[i][1]) - m;
            cov += d * d.transpose();
          }
          cov /= static_cast<double>(warm.size() - from - 1);
          cov += 1e-3 * spec.prior.cov();
          Eigen::LLT<Eigen::Matrix2d> llt(cov);
          if (llt.info() == Eigen::Success) {
            const Eigen::Matrix2d cand = llt.matrixL();
            if (cand.allFinite() && cand(0, 0) > 0.0 && cand(1, 1) > 0.0) {
              prop_chol = cand;
              log_scale = std::log(2.38 / std::numbers::sqrt2);
            }
          }
        }
      } else {
        ++proposed_total;
        accepted_total += accept ? 1 : 0;
        if ((it - settings.warmup + 1) % settings.thin != 0) continue;
        out.draws.push_back(x);
        out.log_target.push_back(lp);
        traces[0][static_cast<std::size_t>(c)].push_back(x[0]);
        traces[1][static_cast<std::size_t>(c)].push_back(x[1]);
      }
    }
  }

  auto& d = out.diagnostics;
  d.acceptance = proposed_total > 0 ? static_cast<double>(accepted_total) / static_cast<double>(proposed_total) : 0.0;
  for (int j = 0; j < 2; ++j) {
    d.rhat[j] = split_rhat(traces[j]);
    d.ess[j] = effective_sample_size(traces[j]);
    if (!(d.rhat[j] <= 1.05)) d.rhat_warning = true;
  }
  return out;
}

}  // namespace voisurv
