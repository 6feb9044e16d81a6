#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "voisurv/trial_data.hpp"

using namespace voisurv;

namespace {

// Five participants followed to 12 months, then three of them to 24.
TrialArm five_participants() {
  TrialArm arm;
  arm.times = {9.3, 12.0, 12.0, 6.7, 12.0};
  arm.status = {1, 0, 0, 0, 0};
  arm.followup_end = 12.0;
  return arm;
}

std::vector<QuantileComponent> mixture(double weibull_shape, double weibull_scale, double gamma_shape,
                                       double gamma_rate) {
  return {{Family::Weibull, weibull_shape, weibull_scale, 100}, {Family::Gamma, gamma_shape, gamma_rate, 100}};
}

}  // namespace

TEST_SUITE("trial-data") {

TEST_CASE("participants at risk are those censored exactly at t1") {
  CHECK(at_risk(five_participants(), 12.0) == 3);
  CHECK(five_participants().events() == 1);
}

TEST_CASE("summary statistic of the ongoing follow-up") {
  OngoingArmData d;
  d.times = {13.4, 24.0, 15.9};
  d.status = {1, 0, 0};
  d.t1 = 12.0;
  d.t2 = 24.0;
  d.validate();
  const SummaryStat s = summary_stat(d);
  CHECK(s.events == 1);
  CHECK(s.time_at_risk == doctest::Approx(1.4 + 12.0 + 3.9));
}

TEST_CASE("Kaplan-Meier on five participants") {
  const auto km = kaplan_meier(five_participants());
  REQUIRE(km.size() == 2);
  CHECK(km[0].time == 0.0);
  CHECK(km[0].survival == 1.0);
  CHECK(km[1].time == 9.3);
  CHECK(km[1].survival == doctest::Approx(0.75));
}

TEST_CASE("Kaplan-Meier with ties takes events before censorings") {
  TrialArm arm;
  arm.times = {2.0, 2.0, 2.0, 5.0, 7.0};
  arm.status = {1, 0, 1, 1, 0};
  arm.followup_end = 7.0;
  const auto km = kaplan_meier(arm);
  REQUIRE(km.size() == 3);
  CHECK(km[1].survival == doctest::Approx(3.0 / 5.0));
  CHECK(km[2].survival == doctest::Approx(3.0 / 5.0 * (1.0 - 1.0 / 2.0)));
}

TEST_CASE("quantile generator event counts") {
  // Counts of scipy quantiles at (i + 0.5) / 100 falling at or before 12 months.
  const double t1 = 12.0;
  const auto inc_new = generate_quantile_arm(mixture(1.1, 70.0, 1.8, 0.04), t1);
  const auto inc_std = generate_quantile_arm(mixture(1.1, 50.0, 1.8, 0.04), t1);
  const auto dec_new = generate_quantile_arm(mixture(0.6, 80.0, 0.8, 0.01), t1);
  const auto dec_std = generate_quantile_arm(mixture(0.6, 57.0, 0.8, 0.01), t1);
  CHECK(inc_new.size() == 200);
  CHECK(inc_new.events() == 25);
  CHECK(inc_std.events() == 31);
  CHECK(dec_new.events() == 46);
  CHECK(dec_std.events() == 51);
  CHECK(at_risk(dec_new, t1) == 154);
  for (std::size_t i = 0; i < dec_new.size(); ++i) {
    CHECK(dec_new.times[i] <= t1);
    if (dec_new.status[i] == 0) CHECK(dec_new.times[i] == t1);
  }
}

TEST_CASE("single-family quantile block equals the closed-form Weibull quantiles") {
  const auto arm = generate_quantile_arm(Family::Weibull, 0.6, 80.0, 10, INFINITY);
  for (int i = 0; i < 10; ++i) {
    const double p = (i + 0.5) / 10.0;
    CHECK(arm.times[i] == doctest::Approx(80.0 * std::pow(-std::log1p(-p), 1.0 / 0.6)).epsilon(1e-12));
    CHECK(arm.status[i] == 1);
  }
}

TEST_CASE("censoring latent times at t2") {
  const std::vector<double> latent{12.0, 13.0, 30.0, 24.0};
  const auto d = censor_at(latent, 12.0, 24.0);
  CHECK(d.times == std::vector<double>{12.0, 13.0, 24.0, 24.0});
  CHECK(d.status == std::vector<int>{1, 1, 0, 1});
  const auto none = censor_at(latent, 12.0, 12.0);
  for (std::size_t i = 0; i < latent.size(); ++i) {
    CHECK(none.times[i] == 12.0);
    CHECK(none.status[i] == 0);
  }
  const SummaryStat s = summary_stat(none);
  CHECK(s.events == 0);
  CHECK(s.time_at_risk == 0.0);
}

TEST_CASE("CSV round trip") {
  TrialDataset data;
  data.arms[0] = generate_quantile_arm(mixture(1.1, 70.0, 1.8, 0.04), 12.0);
  data.arms[1] = five_participants();
  std::stringstream ss;
  write_csv(ss, data);
  const std::string text = ss.str();
  CHECK(text.rfind("id,arm,time,status\n1,1,", 0) == 0);
  const TrialDataset back = read_csv(ss);
  for (int a = 0; a < 2; ++a) {
    REQUIRE(back.arms[a].size() == data.arms[a].size());
    CHECK(back.arms[a].status == data.arms[a].status);
    for (std::size_t i = 0; i < back.arms[a].size(); ++i) {
      CHECK(std::abs(back.arms[a].times[i] - data.arms[a].times[i]) <= 5e-7);
    }
  }
  CHECK(at_risk(back.arms[0], 12.0) == 175);
}

TEST_CASE("empty arms give a header-only CSV") {
  TrialDataset data;
  data.arms[0] = generate_quantile_arm(std::vector<QuantileComponent>{}, 12.0);
  std::stringstream ss;
  write_csv(ss, data);
  CHECK(ss.str() == "id,arm,time,status\n");
  const TrialDataset back = read_csv(ss);
  CHECK(back.arms[0].size() == 0);
  CHECK(back.arms[1].size() == 0);
}

TEST_CASE("malformed CSV rows report their line") {
  auto error_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_csv(in);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(error_of("") == "empty dataset: missing header");
  CHECK(error_of("id,time\n").find("line 1") != std::string::npos);
  CHECK(error_of("id,arm,time,status\n1,1,3.0,1\n2,3,4.0,1\n").find("line 3: arm") != std::string::npos);
  CHECK(error_of("id,arm,time,status\n1,1,x,1\n").find("line 2: cannot parse time") != std::string::npos);
  CHECK(error_of("id,arm,time,status\n1,1,-2,1\n").find("line 2: time") != std::string::npos);
  CHECK(error_of("id,arm,time,status\n1,1,2,5\n").find("line 2: status") != std::string::npos);
  CHECK(error_of("id,arm,time,status\n1,1,2\n").find("line 2: expected 4 fields") != std::string::npos);
}

TEST_CASE("validation rejects inconsistent arms") {
  TrialArm arm = five_participants();
  arm.followup_end = 10.0;
  CHECK_THROWS_AS(arm.validate(), DataError);
  OngoingArmData d;
  d.times = {11.0};
  d.status = {1};
  d.t1 = 12.0;
  d.t2 = 24.0;
  CHECK_THROWS_AS(d.validate(), DataError);
}

}  // TEST_SUITE
