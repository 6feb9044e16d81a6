#include <doctest.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "voisurv/fitting.hpp"
#include "voisurv/rng.hpp"

using namespace voisurv;

namespace {

std::vector<QuantileComponent> mixture(double weibull_shape, double weibull_scale, double gamma_shape,
                                       double gamma_rate) {
  return {{Family::Weibull, weibull_shape, weibull_scale, 100}, {Family::Gamma, gamma_shape, gamma_rate, 100}};
}

TrialArm synthetic_arm(const std::string& name) {
  static const std::map<std::string, std::vector<QuantileComponent>> arms = {
      {"inc_new", mixture(1.1, 70.0, 1.8, 0.04)},
      {"inc_std", mixture(1.1, 50.0, 1.8, 0.04)},
      {"dec_new", mixture(0.6, 80.0, 0.8, 0.01)},
      {"dec_std", mixture(0.6, 57.0, 0.8, 0.01)},
  };
  return generate_quantile_arm(arms.at(name), 12.0);
}

// Maximum-likelihood fits of the same data by scipy (Nelder-Mead + BFGS on
// scipy.stats log densities), central-difference covariance, quad RMST to 240.
struct FitRef {
  const char* arm;
  Family family;
  double theta0, theta1, loglik, aic, rmst, c00, c01, c11;
};
const FitRef kFits[] = {
    {"inc_new", Family::Weibull, 0.28712025521496376, 3.995423334889547, -136.71705401059293, 277.43410802118586, 49.937824219681, 0.03870171643463665, -0.059440105353201975, 0.11381649299032745},
    {"inc_new", Family::Gamma, 0.32542183825494786, -3.716878724952033, -136.70688347507638, 277.41376695015276, 56.65923486040389, 0.0510101675299839, 0.11340879186547959, 0.27550859056470767},
    {"inc_new", Family::Lognormal, 4.330633176953449, 0.4697592070089141, -136.8071962029146, 277.6143924058292, 108.35387943874112, 0.15802233078535502, 0.06086898624044358, 0.029227071604626887},
    {"inc_new", Family::Loglogistic, 0.3197147545037491, 3.8980956359671923, -136.7085795538506, 277.4171591077012, 78.0586474221325, 0.03755875148498561, -0.05506690292318896, 0.10471378392072092},
    {"inc_std", Family::Weibull, 0.2654470329118104, 3.8513072947581892, -162.56768458419435, 329.1353691683887, 43.42664049617592, 0.030972263909546646, -0.04331046581194051, 0.07953403710311763},
    {"inc_std", Family::Gamma, 0.3019181998488687, -3.58825929798621, -162.5741699009699, 329.1483398019398, 48.80588563834887, 0.041678899623582746, 0.08810120633357192, 0.20605498442598308},
    {"inc_std", Family::Lognormal, 4.1098061158261086, 0.46384518135451147, -162.924467410705, 329.84893482141, 96.96761889756195, 0.10975203100117684, 0.04354384226852036, 0.023006961355924924},
    {"inc_std", Family::Loglogistic, 0.30528342623430316, 3.736351870725824, -162.59016501657402, 329.18033003314804, 70.15401608014129, 0.029877084740721645, -0.03940654415450195, 0.07251052311384783},
    {"dec_new", Family::Weibull, -0.39018540671787005, 4.467058321450933, -216.5755114389253, 437.1510228778506, 84.54168494355758, 0.0204244114802955, -0.0424728479949707, 0.13576377520662036},
    {"dec_new", Family::Gamma, -0.4308914018969662, -4.851165069851295, -216.59088564489343, 437.18177128978687, 74.0800477192205, 0.024172429776474692, 0.06678723050733198, 0.2288977394813537},
    {"dec_new", Family::Lognormal, 4.607703016587732, 1.0415492120228547, -217.16691292577423, 438.33382585154845, 123.04684731999623, 0.18335940070025608, 0.04105305558437118, 0.014894994526050795},
    {"dec_new", Family::Loglogistic, -0.3288004618604339, 4.167988923482854, -216.60370029425368, 437.20740058850737, 105.75274731041156, 0.019407337988155558, -0.03674851377814692, 0.12284550459272744},
    {"dec_std", Family::Weibull, -0.409901821023035, 4.327235675619866, -233.23279477756756, 470.4655895551351, 77.63143334529394, 0.01828426224476458, -0.035736989842673025, 0.1143595889288846},
    {"dec_std", Family::Gamma, -0.4560199458603389, -4.747138730173848, -233.25527731336393, 470.51055462672787, 66.83171654134412, 0.021941847580725943, 0.058526960112005456, 0.1973798178194134},
    {"dec_std", Family::Lognormal, 4.384685587816517, 1.0407963587534832, -233.96468237156938, 471.92936474313876, 115.89097096242028, 0.15519571518085998, 0.034294075771080526, 0.013266302624052574},
    {"dec_std", Family::Loglogistic, -0.3411848873223723, 3.9985231872360463, -233.27020520804672, 470.54041041609344, 99.51949079446963, 0.017295234048187332, -0.03040389158748373, 0.10403183247275984},
};

}  // namespace

TEST_SUITE("fitting") {

TEST_CASE("maximum-likelihood fits match an independent optimiser") {
  for (const auto& r : kFits) {
    CAPTURE(r.arm);
    CAPTURE(family_name(r.family));
    const FittedModel fit = fit_mle(r.family, synthetic_arm(r.arm));
    CHECK(fit.converged);
    CHECK(fit.theta_hat[0] == doctest::Approx(r.theta0).epsilon(1e-5));
    CHECK(fit.theta_hat[1] == doctest::Approx(r.theta1).epsilon(1e-5));
    CHECK(fit.loglik == doctest::Approx(r.loglik).epsilon(1e-9));
    CHECK(fit.aic == doctest::Approx(r.aic).epsilon(1e-9));
    CHECK(restricted_mean_survival(r.family, fit.theta_hat, 240.0) == doctest::Approx(r.rmst).epsilon(1e-5));
    CHECK(fit.cov(0, 0) == doctest::Approx(r.c00).epsilon(2e-3));
    CHECK(fit.cov(0, 1) == doctest::Approx(r.c01).epsilon(2e-3));
    CHECK(fit.cov(1, 1) == doctest::Approx(r.c11).epsilon(2e-3));
    CHECK(fit.cov(1, 0) == fit.cov(0, 1));
  }
}

TEST_CASE("exponential data: Weibull MLE with unit shape recovers events over exposure") {
  // Uncensored quantiles of an exponential law; for a fixed unit shape the
  // scale MLE is the mean, and the free-shape fit must do at least as well.
  TrialArm arm = generate_quantile_arm(Family::Weibull, 1.0, 20.0, 400, INFINITY);
  double total = 0.0;
  for (double t : arm.times) total += t;
  arm.followup_end = 1e9;
  const FittedModel fit = fit_mle(Family::Weibull, arm);
  const double mean = total / static_cast<double>(arm.size());
  const double ll_exp = loglik_censored(Family::Weibull, {0.0, std::log(mean)}, arm.times, arm.status);
  CHECK(fit.loglik >= ll_exp - 1e-9);
  CHECK(std::exp(fit.theta_hat[0]) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("optimisers minimise the Rosenbrock function") {
  const Objective2 rosen = [](const LogParams& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const OptimResult nm = nelder_mead(rosen, {-1.2, 1.0}, 0.5, 1e-14, 20000);
  CHECK(nm.x[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(nm.x[1] == doctest::Approx(1.0).epsilon(1e-4));
  const OptimResult bf = bfgs(rosen, nm.x, 1e-8, 500);
  CHECK(bf.x[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(bf.x[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("numerical derivatives of a quadratic are exact") {
  const Objective2 q = [](const LogParams& x) { return 3.0 * x[0] * x[0] + 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1]; };
  const auto g = numerical_gradient(q, {1.0, -2.0});
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  const Eigen::Matrix2d h = numerical_hessian(q, {1.0, -2.0}, 1e-4);
  CHECK(h(0, 0) == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(h(0, 1) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(h(1, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("Akaike weights") {
  const std::vector<double> equal{10.0, 10.0, 10.0, 10.0};
  for (double w : akaike_weights(equal)) CHECK(w == doctest::Approx(0.25));
  const std::vector<double> two{100.0, 102.0};
  const auto w = akaike_weights(two);
  CHECK(w[0] / w[1] == doctest::Approx(std::exp(1.0)));
  CHECK(w[0] + w[1] == doctest::Approx(1.0));
  // Large AICs do not underflow.
  const std::vector<double> big{1e6, 1e6 + 2.0};
  CHECK(akaike_weights(big)[0] == doctest::Approx(w[0]));
}

TEST_CASE("normal approximation is centred at the MLE with the inverse-information covariance") {
  const FittedModel fit = fit_mle(Family::Gamma, synthetic_arm("dec_new"));
  const BivariateNormal post = posterior_approx(fit);
  CHECK(post.mean()(0) == fit.theta_hat[0]);
  CHECK(post.mean()(1) == fit.theta_hat[1]);
  CHECK((post.chol() * post.chol().transpose() - fit.cov).norm() < 1e-12);
  // Empirical moments of draws.
  Rng rng = make_rng({3});
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
  constexpr int n = 200000;
  for (int i = 0; i < n; ++i) {
    const LogParams x = post.sample(rng);
    const Eigen::Vector2d v(x[0], x[1]);
    m += v;
    s += v * v.transpose();
  }
  m /= n;
  s = s / n - m * m.transpose();
  CHECK((m - post.mean()).norm() < 5e-3);
  CHECK((s - fit.cov).norm() < 5e-3);
}

TEST_CASE("bivariate normal density integrates to one and rejects indefinite covariances") {
  Eigen::Matrix2d c;
  c << 0.04, -0.03, -0.03, 0.09;
  const BivariateNormal bn(Eigen::Vector2d(0.3, 4.0), c);
  double sum = 0.0;
  const double h = 0.01;
  for (double a = 0.3 - 2.0; a <= 0.3 + 2.0; a += h) {
    for (double b = 4.0 - 3.0; b <= 4.0 + 3.0; b += h) sum += std::exp(bn.log_density({a, b})) * h * h;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(BivariateNormal(Eigen::Vector2d::Zero(), bad), DomainError);
}

TEST_CASE("fitting fails loudly without events") {
  TrialArm arm;
  arm.times = {12.0, 12.0, 12.0};
  arm.status = {0, 0, 0};
  arm.followup_end = 12.0;
  CHECK_THROWS(fit_mle(Family::Weibull, arm));
}

}  // TEST_SUITE
