#include "voisurv/voi_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "voisurv/gam_smoother.hpp"
#include "voisurv/model_evidence.hpp"
#include "voisurv/parallel.hpp"
#include "voisurv/rng.hpp"

namespace voisurv {
namespace {

// Stream tags keep the outer, EVPI, inner and bridge random numbers apart.
constexpr std::uint64_t kTagEvpi = 0x45565049ULL;
constexpr std::uint64_t kTagOuter = 0x4f555445ULL;
constexpr std::uint64_t kTagBridge = 0x42524447ULL;
constexpr std::uint64_t kTagRegressionSe = 0x52534545ULL;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int sample_model(const ArmPrior& arm, Rng& rng) {
  if (arm.weights.size() == 1) return 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double cum = 0.0;
  for (std::size_t r = 0; r < arm.weights.size(); ++r) {
    cum += arm.weights[r];
    if (u < cum) return static_cast<int>(r);
  }
  // Rounding left u above the cumulative total: take the last model with weight.
  for (std::size_t r = arm.weights.size(); r-- > 0;) {
    if (arm.weights[r] > 0.0) return static_cast<int>(r);
  }
  return 0;
}

void check_prior(const DecisionPrior& prior) {
  for (const auto& arm : prior.arms) {
    if (arm.fits.empty()) throw DomainError("each arm needs at least one candidate model");
    if (arm.fits.size() != arm.weights.size() || arm.fits.size() != arm.normals.size()) {
      throw DomainError("arm prior is inconsistent: fits, weights and normals differ in length");
    }
  }
  if (!(prior.t_h > prior.t1)) throw DomainError("net-benefit horizon must exceed t1");
}

}  // namespace

std::string_view method_name(VoiMethod m) {
  switch (m) {
    case VoiMethod::NestedMC: return "nested_mc";
    case VoiMethod::Regression: return "regression";
    case VoiMethod::MonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

ArmPrior make_arm_prior(std::vector<FittedModel> fits, int at_risk) {
  if (fits.empty()) throw DomainError("need at least one fitted model");
  ArmPrior arm;
  std::vector<double> aics;
  for (const auto& f : fits) {
    aics.push_back(f.aic);
    arm.normals.push_back(posterior_approx(f));
  }
  arm.weights = akaike_weights(aics);
  arm.fits = std::move(fits);
  arm.at_risk = at_risk;
  return arm;
}

GainEstimate expected_gain(std::span<const double> g0, std::span<const double> g1) {
  if (g0.size() != g1.size() || g0.empty()) throw DomainError("net benefit samples must be non-empty and aligned");
  const std::size_t K = g0.size();
  const double n = static_cast<double>(K);
  double s0 = 0.0, s1 = 0.0, smax = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    s0 += g0[k];
    s1 += g1[k];
    smax += std::max(g0[k], g1[k]);
  }
  GainEstimate out;
  out.means = {s0 / n, s1 / n};
  const bool first = out.means[0] >= out.means[1];
  out.value = smax / n - (first ? out.means[0] : out.means[1]);
  // SE of the mean of max_d g_d - g_{d*}, d* the option with the larger mean.
  std::span<const double> best = first ? g0 : g1;
  double m = 0.0;
  for (std::size_t k = 0; k < K; ++k) m += std::max(g0[k], g1[k]) - best[k];
  m /= n;
  double ss = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double v = std::max(g0[k], g1[k]) - best[k] - m;
    ss += v * v;
  }
  out.se = K > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return out;
}

std::array<std::vector<double>, 2> sample_net_benefits(const DecisionPrior& prior, int n, std::uint64_t seed,
                                                       int threads) {
  check_prior(prior);
  if (n < 1) throw DomainError("need at least one draw");
  std::array<std::vector<double>, 2> nb{std::vector<double>(static_cast<std::size_t>(n)),
                                        std::vector<double>(static_cast<std::size_t>(n))};
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    for (int d = 0; d < 2; ++d) {
      const ArmPrior& arm = prior.arms[d];
      Rng rng = make_rng({seed, kTagEvpi, i, static_cast<std::uint64_t>(d)});
      const int r = sample_model(arm, rng);
      const LogParams theta = arm.normals[r].sample(rng);
      nb[d][i] = restricted_mean_survival(arm.fits[r].family, theta, prior.t_h);
    }
  });
  return nb;
}

VoiResult evpi_mc(const DecisionPrior& prior, int n, std::uint64_t seed, int threads) {
  const auto start = std::chrono::steady_clock::now();
  const auto nb = sample_net_benefits(prior, n, seed, threads);
  const GainEstimate g = expected_gain(nb[0], nb[1]);
  VoiResult res;
  res.estimate = g.value;
  res.se = g.se;
  res.method = VoiMethod::MonteCarlo;
  res.K = n;
  res.seconds = seconds_since(start);
  return res;
}

// ---------------------------------------------------------------------------

OngoingArmData OuterSample::ongoing(std::size_t k, int arm, double t2) const {
  return censor_at(draws.at(k).latent[arm], t1, t2);
}

std::array<std::vector<SummaryStat>, 2> OuterSample::summaries(double t2) const {
  std::array<std::vector<SummaryStat>, 2> out;
  for (int d = 0; d < 2; ++d) {
    out[d].reserve(draws.size());
    for (std::size_t k = 0; k < draws.size(); ++k) out[d].push_back(summary_stat(ongoing(k, d, t2)));
  }
  return out;
}

OuterSample generate_outer_sample(const DecisionPrior& prior, int K, std::uint64_t seed, int threads) {
  check_prior(prior);
  if (K < 1) throw DomainError("outer sample size must be positive");
  OuterSample out;
  out.t1 = prior.t1;
  out.t_h = prior.t_h;
  out.seed = seed;
  out.draws.resize(static_cast<std::size_t>(K));
  const double log_mass_floor = std::log(1e-12);
  parallel_for(static_cast<std::size_t>(K), threads, [&](std::size_t k) {
    OuterDraw& draw = out.draws[k];
    for (int d = 0; d < 2; ++d) {
      const ArmPrior& arm = prior.arms[d];
      Rng rng = make_rng({seed, kTagOuter, k, static_cast<std::uint64_t>(d)});
      int r = 0;
      LogParams theta{};
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        r = sample_model(arm, rng);
        theta = arm.normals[r].sample(rng);
        ok = log_survivor(arm.fits[r].family, theta, prior.t1) > log_mass_floor;
        if (!ok) ++draw.resamples;
      }
      if (!ok) {
        std::ostringstream msg;
        msg << "outer draw " << k << ", arm " << d + 1 << ": no survival mass beyond t1 after 100 attempts (last "
            << family_name(arm.fits[r].family) << " theta = " << theta[0] << ", " << theta[1] << ")";
        throw TruncationMassError(msg.str());
      }
      const Family fam = arm.fits[r].family;
      draw.model[d] = r;
      draw.theta[d] = theta;
      draw.nb[d] = restricted_mean_survival(fam, theta, prior.t_h);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      auto& latent = draw.latent[d];
      latent.resize(static_cast<std::size_t>(arm.at_risk));
      for (double& t : latent) t = truncated_time_from_uniform(fam, theta, prior.t1, unif(rng));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

VoiResult evsi_regression(const OuterSample& outer, double t2, const RegressionOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t K = outer.size();
  if (K < 50) throw DomainError("regression EVSI needs at least 50 outer draws");
  if (t2 < outer.t1) throw DomainError("t2 precedes t1");
  const auto stats = outer.summaries(t2);

  std::array<SmoothFit, 2> fits;
  for (int d = 0; d < 2; ++d) {
    std::vector<double> e(K), y(K), nb(K);
    for (std::size_t k = 0; k < K; ++k) {
      e[k] = stats[d][k].events;
      y[k] = stats[d][k].time_at_risk;
      nb[k] = outer.draws[k].nb[d];
    }
    fits[d] = fit_tensor_spline(e, y, nb);
  }
  const GainEstimate point = expected_gain(fits[0].fitted, fits[1].fitted);

  // Standard error: recompute the estimate from simulated fitted values.
  constexpr int kBatch = 250;
  std::vector<double> sims;
  sims.reserve(static_cast<std::size_t>(options.se_draws));
  std::array<Rng, 2> rngs{make_rng({options.seed, kTagRegressionSe, 0}), make_rng({options.seed, kTagRegressionSe, 1})};
  std::normal_distribution<double> n01;
  for (int done = 0; done < options.se_draws; done += kBatch) {
    const int b = std::min(kBatch, options.se_draws - done);
    std::array<Eigen::MatrixXd, 2> sim;
    for (int d = 0; d < 2; ++d) {
      Eigen::MatrixXd z(fits[d].coef.size(), b);
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = n01(rngs[d]);
      }
      sim[d] = fits[d].simulate_fitted(z);
    }
    for (int j = 0; j < b; ++j) {
      const auto c0 = sim[0].col(j);
      const auto c1 = sim[1].col(j);
      sims.push_back(expected_gain(std::span<const double>(c0.data(), K), std::span<const double>(c1.data(), K)).value);
    }
  }
  double m = std::accumulate(sims.begin(), sims.end(), 0.0) / static_cast<double>(sims.size());
  double ss = 0.0;
  for (double v : sims) ss += (v - m) * (v - m);

  VoiResult res;
  res.estimate = point.value;
  res.se = sims.size() > 1 ? std::sqrt(ss / static_cast<double>(sims.size() - 1)) : 0.0;
  res.method = VoiMethod::Regression;
  res.K = static_cast<int>(K);
  res.t2 = t2;
  res.edf = {fits[0].edf, fits[1].edf};
  res.smoother_degenerate = fits[0].degenerate || fits[1].degenerate;
  res.seconds = seconds_since(start);
  return res;
}

VoiResult evsi_nested_mc(const OuterSample& outer, const DecisionPrior& prior, double t2,
                         const NestedMcOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  check_prior(prior);
  options.mcmc.validate();
  if (t2 < outer.t1) throw DomainError("t2 precedes t1");
  const std::size_t K = outer.size();
  std::array<std::vector<double>, 2> mu{std::vector<double>(K), std::vector<double>(K)};
  std::vector<int> rhat_warn(K, 0), bridge_fail(K, 0);
  std::vector<double> acceptance(K, 0.0);

  parallel_for(K, options.threads, [&](std::size_t k) {
    int runs = 0;
    for (int d = 0; d < 2; ++d) {
      const ArmPrior& arm = prior.arms[d];
      const OngoingArmData data = outer.ongoing(k, d, t2);
      const std::size_t R = arm.fits.size();
      std::vector<double> inner_mean(R, 0.0), log_ml(R, 0.0);
      for (std::size_t r = 0; r < R; ++r) {
        if (arm.weights[r] <= 0.0) continue;
        const PosteriorSpec spec{arm.fits[r].family, arm.normals[r], data};
        McmcSettings settings = options.mcmc;
        settings.seed = stream_key({options.mcmc.seed, k, static_cast<std::uint64_t>(d), r});
        const PosteriorDraws post = sample_posterior(spec, settings);
        rhat_warn[k] += post.diagnostics.rhat_warning ? 1 : 0;
        acceptance[k] += post.diagnostics.acceptance;
        ++runs;
        double s = 0.0;
        for (const auto& th : post.draws) s += restricted_mean_survival(spec.family, th, prior.t_h);
        inner_mean[r] = s / static_cast<double>(post.draws.size());
        if (R > 1) {
          BridgeOptions bo;
          bo.seed = stream_key({options.mcmc.seed, kTagBridge, k, static_cast<std::uint64_t>(d), r});
          const EvidenceResult ev = log_marginal_bridge(spec, post.draws, bo);
          if (!ev.converged) ++bridge_fail[k];
          if (!std::isfinite(ev.log_marginal)) {
            std::ostringstream msg;
            msg << "bridge sampling produced a non-finite marginal likelihood (outer draw " << k << ", arm "
                << d + 1 << ", " << family_name(spec.family) << ")";
            throw NumericError(msg.str());
          }
          log_ml[r] = ev.log_marginal;
        }
      }
      if (R == 1) {
        mu[d][k] = inner_mean[0];
      } else {
        std::vector<double> lm, pw;
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < R; ++r) {
          if (arm.weights[r] <= 0.0) continue;
          idx.push_back(r);
          lm.push_back(log_ml[r]);
          pw.push_back(arm.weights[r]);
        }
        const auto probs = posterior_model_probs(lm, pw);
        double m = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) m += probs[i] * inner_mean[idx[i]];
        mu[d][k] = m;
      }
    }
    acceptance[k] /= std::max(runs, 1);
  });

  GainEstimate g = expected_gain(mu[0], mu[1]);
  if (options.second_term == SecondTerm::OuterNetBenefit) {
    std::array<double, 2> s{0.0, 0.0};
    for (const auto& draw : outer.draws) {
      s[0] += draw.nb[0];
      s[1] += draw.nb[1];
    }
    const double first_term = g.value + std::max(g.means[0], g.means[1]);
    g.value = first_term - std::max(s[0], s[1]) / static_cast<double>(K);
  }

  VoiResult res;
  res.estimate = g.value;
  res.se = g.se;
  res.method = VoiMethod::NestedMC;
  res.K = static_cast<int>(K);
  res.J = options.mcmc.draws;
  res.t2 = t2;
  res.rhat_warnings = std::accumulate(rhat_warn.begin(), rhat_warn.end(), 0);
  res.bridge_failures = std::accumulate(bridge_fail.begin(), bridge_fail.end(), 0);
  res.mean_acceptance = std::accumulate(acceptance.begin(), acceptance.end(), 0.0) / static_cast<double>(K);
  res.seconds = seconds_since(start);
  return res;
}

// ---------------------------------------------------------------------------

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw DomainError("interpolation needs at least 2 aligned points");
  for (std::size_t i = 1; i < n; ++i) {
    if (!(x_[i] > x_[i - 1])) throw DomainError("interpolation abscissae must be strictly increasing");
  }
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x_[i + 1] - x_[i];
    delta[i] = (y_[i + 1] - y_[i]) / h[i];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = delta[0];
    return;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) continue;
    const double w1 = 2.0 * h[i] + h[i - 1];
    const double w2 = h[i] + 2.0 * h[i - 1];
    d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (std::signbit(d) != std::signbit(d0) || d0 == 0.0) return 0.0;
    if (std::signbit(d0) != std::signbit(d1) && std::abs(d) > 3.0 * std::abs(d0)) d = 3.0 * d0;
    return d;
  };
  d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

std::size_t Pchip::segment(double x) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin() - 1, 0));
  return std::min(i, x_.size() - 2);
}

double Pchip::value(double x) const {
  const std::size_t i = segment(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
         (t3 - t2) * h * d_[i + 1];
}

double Pchip::derivative(double x) const {
  const std::size_t i = segment(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t;
  return (6 * t2 - 6 * t) / h * y_[i] + (3 * t2 - 4 * t + 1) * d_[i] + (-6 * t2 + 6 * t) / h * y_[i + 1] +
         (3 * t2 - 2 * t) * d_[i + 1];
}

EnbsCurves enbs_curves(std::span<const double> additional_months, std::span<const double> evsi,
                       const EnbsInputs& inputs, double t1) {
  if (additional_months.size() != evsi.size() || evsi.empty()) {
    throw DomainError("ENBS needs aligned, non-empty EVSI points");
  }
  if (inputs.trial_cost_rate < 0.0 || inputs.accrual_rate < 0.0 || !(inputs.horizon > 0.0)) {
    throw DomainError("ENBS inputs must be non-negative with a positive horizon");
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < evsi.size(); ++i) pts.emplace_back(additional_months[i], evsi[i]);
  std::sort(pts.begin(), pts.end());
  if (pts.front().first < 0.0) throw DomainError("additional follow-up must be non-negative");
  if (pts.front().first > 0.0) pts.insert(pts.begin(), {0.0, 0.0});
  if (pts.size() < 2) throw DomainError("ENBS needs EVSI beyond zero additional follow-up");
  std::vector<double> x, y;
  for (const auto& [a, b] : pts) {
    x.push_back(a);
    y.push_back(b);
  }
  const Pchip curve(x, y);

  const double population = inputs.accrual_rate * inputs.horizon;
  EnbsCurves out;
  const double awr = population > 0.0 ? inputs.trial_cost_rate / population : 0.0;
  const double oir =
      population > 0.0 ? (inputs.trial_cost_rate + inputs.accrual_rate * inputs.incremental_nb) / population : 0.0;
  const double last = curve.hi();
  for (double m = 1.0; m <= last + 1e-9; m += 1.0) {
    out.month.push_back(t1 + m);
    out.mb.push_back(curve.derivative(m));
    out.mc_awr.push_back(awr);
    out.mc_oir.push_back(oir);
  }

  auto crossing = [&](double cost) -> std::optional<double> {
    if (!(cost > 0.0)) return std::nullopt;
    const double lo = std::min(1.0, last);
    auto f = [&](double a) { return curve.derivative(a) - cost; };
    if (f(lo) <= 0.0) return lo;
    constexpr double kStep = 0.01;
    double prev = lo;
    for (double a = lo + kStep; a <= last + 1e-12; a += kStep) {
      if (f(a) <= 0.0) {
        double l = prev, r = a;
        for (int it = 0; it < 60; ++it) {
          const double m = 0.5 * (l + r);
          (f(m) > 0.0 ? l : r) = m;
        }
        return 0.5 * (l + r);
      }
      prev = a;
    }
    return std::nullopt;
  };
  out.awr_crossing = crossing(awr);
  out.oir_crossing = crossing(oir);
  return out;
}

}  // namespace voisurv
