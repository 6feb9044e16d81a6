#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "voisurv/posterior_mcmc.hpp"
#include "voisurv/rng.hpp"

using namespace voisurv;

namespace {

OngoingArmData small_ongoing() {
  OngoingArmData d;
  d.times = {13.0, 15.5, 20.0, 24.0, 24.0, 24.0, 24.0, 24.0, 12.0};
  d.status = {1, 1, 1, 0, 0, 0, 0, 0, 0};
  d.t1 = 12.0;
  d.t2 = 24.0;
  return d;
}

BivariateNormal prior_for(Family f) {
  Eigen::Matrix2d c;
  Eigen::Vector2d m;
  switch (f) {
    case Family::Gamma:
      m << 0.3, -3.7;
      c << 0.05, 0.11, 0.11, 0.28;
      break;
    case Family::Lognormal:
      m << 4.3, 0.47;
      c << 0.16, 0.06, 0.06, 0.03;
      break;
    default:
      m << 0.29, 4.0;
      c << 0.04, -0.06, -0.06, 0.11;
  }
  return {m, c};
}

}  // namespace

TEST_SUITE("posterior-mcmc") {

TEST_CASE("sufficient-statistic likelihood equals the direct left-truncated likelihood") {
  Rng rng = make_rng({11});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Family f : kAllFamilies) {
    const LogParams truth = prior_for(f).transform(0.0, 0.0);
    std::vector<double> latent(60);
    for (double& t : latent) t = truncated_time_from_uniform(f, truth, 12.0, u(rng));
    latent[0] = 12.0;
    const OngoingArmData d = censor_at(latent, 12.0, 30.0);
    const TruncatedLikelihood lik(f, d);
    for (double z0 : {-1.5, 0.0, 1.0}) {
      for (double z1 : {-1.0, 0.5}) {
        const LogParams th = prior_for(f).transform(z0, z1);
        CAPTURE(family_name(f));
        CHECK(lik(th) == doctest::Approx(loglik_left_truncated(f, th, d.times, d.status, 12.0)).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("no follow-up beyond t1 leaves a flat likelihood") {
  const OngoingArmData d = censor_at(std::vector<double>{15.0, 40.0}, 12.0, 12.0);
  const TruncatedLikelihood lik(Family::Weibull, d);
  CHECK(lik({0.1, 3.0}) == 0.0);
  CHECK(lik({-2.0, 9.0}) == 0.0);
}

TEST_CASE("MCMC draws match a grid posterior (chi-square, alpha = 0.01)") {
  for (Family f : {Family::Weibull, Family::Gamma, Family::Lognormal}) {
    const PosteriorSpec spec{f, prior_for(f), small_ongoing()};
    McmcSettings ms;
    ms.draws = 8000;
    ms.warmup = 1000;
    ms.thin = 10;
    ms.seed = 2024;
    const oracle::GofResult g = oracle::mcmc_grid_gof(spec, ms);
    REQUIRE(g.posterior.draws.size() == 8000);
    CAPTURE(family_name(f));
    CAPTURE(g.x2);
    CAPTURE(g.ess);
    CHECK(g.scaled < g.critical);
    CHECK(g.posterior.diagnostics.acceptance > 0.15);
    CHECK(g.posterior.diagnostics.acceptance < 0.6);
    CHECK_FALSE(g.posterior.diagnostics.rhat_warning);
  }
}

TEST_CASE("sampling is deterministic for a fixed seed") {
  const PosteriorSpec spec{Family::Weibull, prior_for(Family::Weibull), small_ongoing()};
  McmcSettings ms;
  ms.draws = 400;
  ms.warmup = 200;
  ms.seed = 9;
  const auto a = sample_posterior(spec, ms);
  const auto b = sample_posterior(spec, ms);
  CHECK(a.draws == b.draws);
  ms.seed = 10;
  CHECK(sample_posterior(spec, ms).draws != a.draws);
}

TEST_CASE("pooled draw count honours J for any number of chains") {
  const PosteriorSpec spec{Family::Weibull, prior_for(Family::Weibull), small_ongoing()};
  McmcSettings ms;
  ms.warmup = 100;
  ms.thin = 1;
  for (int chains : {2, 3, 4, 7}) {
    ms.chains = chains;
    ms.draws = 500;
    const auto post = sample_posterior(spec, ms);
    CHECK(post.draws.size() == 500);
    CHECK(post.log_target.size() == 500);
  }
}

TEST_CASE("R-hat and effective sample size") {
  Rng rng = make_rng({5});
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> iid(4, std::vector<double>(2000));
  for (auto& c : iid) {
    for (double& x : c) x = n01(rng);
  }
  CHECK(split_rhat(iid) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(effective_sample_size(iid) == doctest::Approx(8000.0).epsilon(0.1));

  auto shifted = iid;
  for (double& x : shifted[0]) x += 2.0;
  CHECK(split_rhat(shifted) > 1.1);

  // AR(1) with rho = 0.8: ESS ~ N (1 - rho) / (1 + rho).
  std::vector<std::vector<double>> ar(4, std::vector<double>(5000));
  for (auto& c : ar) {
    double x = 0.0;
    for (double& v : c) v = x = 0.8 * x + std::sqrt(1.0 - 0.64) * n01(rng);
  }
  CHECK(effective_sample_size(ar) == doctest::Approx(20000.0 * 0.2 / 1.8).epsilon(0.15));
}

TEST_CASE("settings are validated") {
  McmcSettings ms;
  ms.draws = 50;
  CHECK_THROWS_AS(ms.validate(), DomainError);
  ms = {};
  ms.chains = 1;
  CHECK_THROWS_AS(ms.validate(), DomainError);
  ms = {};
  ms.thin = 0;
  CHECK_THROWS_AS(ms.validate(), DomainError);
}

}  // TEST_SUITE
