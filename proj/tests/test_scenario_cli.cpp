#include <doctest.h>

#include <sstream>
#include <string>

#include "voisurv/commands.hpp"
#include "voisurv/scenario.hpp"

using namespace voisurv;
using nlohmann::json;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "no error";
}

// Built-in scenario shrunk to a quick run.
ScenarioConfig quick(const char* name, std::initializer_list<double> t2) {
  json j = to_json(builtin_config(name));
  j["K"] = 200;
  j["J"] = 100;
  j["warmup"] = 100;
  j["evpi_n"] = 2000;
  j["se_draws"] = 200;
  j["mode"] = "single:weibull";
  j["t2_grid"] = std::vector<double>(t2);
  return parse_config(j.dump(2));
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("built-in configurations round-trip through JSON") {
  for (const auto& name : builtin_config_names()) {
    const ScenarioConfig c = builtin_config(name);
    const json j = to_json(c);
    CHECK(to_json(parse_config(j.dump(2))) == j);
    CHECK(to_json(resolve_config("builtin:" + name)) == j);
  }
  CHECK_THROWS_AS(builtin_config("flat-hazard"), ConfigError);
}

TEST_CASE("configuration errors name the file, line and key") {
  const std::string text = R"({
  "schema_version": 1,
  "generator": {
    "new_treatment": [
      {"family": "weibull", "params": [1.1, 70], "n": 100},
      {"family": "gama", "params": [1.8, 0.04], "n": 100}
    ],
    "standard_care": []
  }
})";
  CHECK(config_error(text) == "cfg.json:6: generator.new_treatment[1].family: unknown family 'gama'");
  CHECK(config_error("{\n  \"K\": 100,\n  \"colour\": 3\n}").rfind("cfg.json:3:", 0) == 0);
  CHECK(config_error("{\n  \"schema_version\": 2\n}").find("schema_version") != std::string::npos);
  CHECK(config_error("{\n  \"t2_grid\": [24, 12]\n}").rfind("cfg.json:2: t2_grid", 0) == 0);
  CHECK(config_error("{\n  \"K\": 10\n}").rfind("cfg.json:2: K", 0) == 0);
  CHECK(config_error("{ \"K\": ").rfind("cfg.json", 0) == 0);
  CHECK(config_error("{\n  \"mode\": \"single:cauchy\"\n}").find("cauchy") != std::string::npos);
}

TEST_CASE("empty arms produce a header-only dataset") {
  ScenarioConfig c = builtin_config("increasing-hazard");
  c.generator = {};
  const TrialDataset data = generate_dataset(c);
  std::ostringstream out;
  write_csv(out, data);
  CHECK(out.str() == "id,arm,time,status\n");
}

TEST_CASE("fit report for a single family") {
  const ScenarioConfig c = builtin_config("decreasing-hazard");
  const TrialDataset data = generate_dataset(c);
  const std::vector<Family> only{Family::Weibull};
  const json r = fit_report(data, only, c.t1, c.t_h);
  REQUIRE(r["arms"].size() == 2);
  CHECK(r["arms"][0]["events"] == 46);
  CHECK(r["arms"][1]["at_risk"] == 149);
  CHECK(r["arms"][0]["models"][0]["weight"] == 1.0);
  CHECK(r["incremental_nb"].get<double>() ==
        doctest::Approx(r["arms"][0]["weighted_nb"].get<double>() - r["arms"][1]["weighted_nb"].get<double>()));
}

TEST_CASE("method names") {
  CHECK(parse_method("mc") == MethodChoice::Mc);
  CHECK(parse_method("gam") == MethodChoice::Gam);
  CHECK(parse_method("both") == MethodChoice::Both);
  CHECK_THROWS_AS(parse_method("nested"), ConfigError);
}

TEST_CASE("nested Monte Carlo above the budget needs --force") {
  ScenarioConfig c = quick("increasing-hazard", {24.0});
  c.mc_budget = 1000.0;
  const TrialDataset data = generate_dataset(c);
  RunOptions opt;
  opt.method = MethodChoice::Both;
  CHECK_THROWS_AS(run_evsi(c, data, opt), BudgetError);
  opt.method = MethodChoice::Gam;
  CHECK_NOTHROW(run_evsi(c, data, opt));
}

TEST_CASE("EVSI run: zero at t1, stable bytes across threads, ENBS from results") {
  ScenarioConfig c = quick("increasing-hazard", {12.0, 24.0, 36.0});
  c.enbs = EnbsConfig{};
  const TrialDataset data = generate_dataset(c);
  RunOptions opt;
  opt.method = MethodChoice::Gam;
  opt.threads = 1;
  const EvsiRun a = run_evsi(c, data, opt);
  opt.threads = 3;
  const EvsiRun b = run_evsi(c, data, opt);
  CHECK(a.results.dump() == b.results.dump());

  const json& evsi = a.results["evsi"];
  REQUIRE(evsi.size() == 3);
  CHECK(evsi[0]["estimate"].get<double>() == 0.0);
  CHECK(evsi[2]["estimate"].get<double>() > 0.0);
  CHECK(a.results["enbs"].is_object());
  CHECK(a.timings.contains("total"));
  CHECK_FALSE(a.results.dump().find("seconds") != std::string::npos);

  EnbsInputs used;
  std::string method;
  const EnbsCurves curves = enbs_from_results(a.results, {}, &used, &method);
  CHECK(method == "regression");
  CHECK(used.incremental_nb == doctest::Approx(a.results["evpi"]["mean_nb"][0].get<double>() -
                                               a.results["evpi"]["mean_nb"][1].get<double>()));
  CHECK(curves.month.front() == 13.0);
  CHECK(curves.month.back() == 36.0);
  const json cj = crossings_json(curves, used);
  CHECK(cj.contains("awr_crossing_months"));
  CHECK(cj.contains("oir_crossing_months"));
  std::ostringstream csv;
  write_curve_csv(csv, curves);
  CHECK(csv.str().rfind("month,mb,mc_awr,mc_oir\n13,", 0) == 0);

  EnbsRequest req;
  req.method = "mc";
  CHECK_THROWS_AS(enbs_from_results(a.results, req), DataError);
  CHECK_THROWS_AS(enbs_from_results(json::object(), {}), DataError);
}

}  // TEST_SUITE
