#include "voisurv/commands.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "voisurv/fitting.hpp"

namespace voisurv {
namespace {

using nlohmann::json;

constexpr std::array<const char*, 2> kArmLabels = {"new_treatment", "standard_care"};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json cov_json(const Eigen::Matrix2d& m) { return {{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}; }

json result_json(const VoiResult& r, double t1) {
  json out = {{"t2", r.t2},
              {"additional_months", r.t2 - t1},
              {"method", method_name(r.method)},
              {"estimate", r.estimate},
              {"se", r.se},
              {"K", r.K}};
  if (r.method == VoiMethod::NestedMC) {
    out["J"] = r.J;
    out["diagnostics"] = {{"rhat_warnings", r.rhat_warnings},
                          {"bridge_failures", r.bridge_failures},
                          {"mean_acceptance", r.mean_acceptance}};
  } else {
    out["diagnostics"] = {{"edf", r.edf}, {"smoother_degenerate", r.smoother_degenerate}};
  }
  return out;
}

std::string method_key(std::string_view choice) {
  if (choice == "gam" || choice == "regression") return "regression";
  if (choice == "mc" || choice == "nested_mc") return "nested_mc";
  throw ConfigError("unknown EVSI method '" + std::string(choice) + "'");
}

}  // namespace

nlohmann::json fit_report(const TrialDataset& data, std::span<const Family> families, double t1, double t_h) {
  json arms = json::array();
  std::array<std::optional<double>, 2> weighted;
  for (int a = 0; a < 2; ++a) {
    const TrialArm& arm = data.arms[a];
    json models = json::array();
    std::vector<FittedModel> fits;
    std::vector<double> rmst;
    std::vector<std::size_t> slot;
    for (Family f : families) {
      json m = {{"family", family_name(f)}};
      try {
        FittedModel fit = fit_mle(f, arm);
        const double nb = restricted_mean_survival(f, fit.theta_hat, t_h);
        m["theta_hat"] = fit.theta_hat;
        m["cov"] = cov_json(fit.cov);
        m["loglik"] = fit.loglik;
        m["aic"] = fit.aic;
        m["rmst"] = nb;
        m["converged"] = fit.converged;
        slot.push_back(models.size());
        fits.push_back(std::move(fit));
        rmst.push_back(nb);
      } catch (const std::exception& e) {
        m["error"] = e.what();
      }
      models.push_back(std::move(m));
    }
    std::vector<double> aics;
    for (const auto& f : fits) aics.push_back(f.aic);
    if (!fits.empty()) {
      const auto w = akaike_weights(aics);
      double avg = 0.0;
      for (std::size_t i = 0; i < fits.size(); ++i) {
        models[slot[i]]["weight"] = w[i];
        avg += w[i] * rmst[i];
      }
      weighted[a] = avg;
    }
    arms.push_back({{"arm", a + 1},
                    {"label", kArmLabels[a]},
                    {"participants", arm.size()},
                    {"events", arm.events()},
                    {"at_risk", at_risk(arm, t1)},
                    {"models", std::move(models)},
                    {"weighted_nb", weighted[a] ? json(*weighted[a]) : json(nullptr)}});
  }
  json out = {{"t1", t1}, {"t_h", t_h}, {"arms", std::move(arms)}};
  out["incremental_nb"] = weighted[0] && weighted[1] ? json(*weighted[0] - *weighted[1]) : json(nullptr);
  return out;
}

DecisionPrior build_decision_prior(const ScenarioConfig& config, const TrialDataset& data) {
  DecisionPrior prior;
  prior.t1 = config.t1;
  prior.t_h = config.t_h;
  for (int a = 0; a < 2; ++a) {
    std::vector<FittedModel> fits;
    for (Family f : config.model_families()) {
      try {
        fits.push_back(fit_mle(f, data.arms[a]));
      } catch (const FitError& e) {
        throw FitError(std::string(family_name(f)) + " fit to arm " + std::to_string(a + 1) + ": " + e.what());
      }
    }
    prior.arms[a] = make_arm_prior(std::move(fits), at_risk(data.arms[a], config.t1));
  }
  return prior;
}

MethodChoice parse_method(std::string_view s) {
  if (s == "mc") return MethodChoice::Mc;
  if (s == "gam") return MethodChoice::Gam;
  if (s == "both") return MethodChoice::Both;
  throw ConfigError("--method must be mc, gam or both");
}

EvsiRun run_evsi(const ScenarioConfig& config, const TrialDataset& data, const RunOptions& options) {
  config.validate();
  const bool want_mc = options.method != MethodChoice::Gam;
  const bool want_gam = options.method != MethodChoice::Mc;
  const double budget = static_cast<double>(config.K) * static_cast<double>(config.J);
  if (want_mc && budget > config.mc_budget && !options.force) {
    std::ostringstream msg;
    msg << "nested Monte Carlo with K*J = " << budget << " exceeds mc_budget = " << config.mc_budget
        << "; rerun with --force to proceed";
    throw BudgetError(msg.str());
  }
  auto say = [&](const std::string& s) {
    if (options.progress) options.progress(s);
  };
  const auto run_start = std::chrono::steady_clock::now();
  EvsiRun run;
  json& res = run.results;
  json& tim = run.timings;
  res["schema_version"] = kSchemaVersion;
  res["command"] = "evsi";
  res["seed"] = config.seed;
  res["method"] = options.method == MethodChoice::Mc ? "mc" : options.method == MethodChoice::Gam ? "gam" : "both";
  res["config"] = to_json(config);

  const auto families = config.model_families();
  res["fits"] = fit_report(data, families, config.t1, config.t_h);
  const DecisionPrior prior = build_decision_prior(config, data);
  json weights = json::array();
  for (const auto& arm : prior.arms) {
    json w = json::object();
    for (std::size_t r = 0; r < arm.fits.size(); ++r) w[std::string(family_name(arm.fits[r].family))] = arm.weights[r];
    weights.push_back(std::move(w));
  }
  res["weights"] = std::move(weights);

  say("EVPI, n = " + std::to_string(config.evpi_n));
  auto t0 = std::chrono::steady_clock::now();
  const auto nb = sample_net_benefits(prior, config.evpi_n, config.seed, options.threads);
  const GainEstimate evpi = expected_gain(nb[0], nb[1]);
  res["evpi"] = {{"estimate", evpi.value}, {"se", evpi.se}, {"n", config.evpi_n}, {"mean_nb", evpi.means}};
  tim["evpi"] = seconds_since(t0);

  say("outer sample, K = " + std::to_string(config.K));
  t0 = std::chrono::steady_clock::now();
  const OuterSample outer = generate_outer_sample(prior, config.K, config.seed, options.threads);
  int resamples = 0;
  std::array<double, 2> outer_mean{0.0, 0.0};
  for (const auto& d : outer.draws) {
    resamples += d.resamples;
    outer_mean[0] += d.nb[0] / config.K;
    outer_mean[1] += d.nb[1] / config.K;
  }
  res["outer"] = {{"K", config.K}, {"truncation_resamples", resamples}, {"mean_nb", outer_mean}};
  tim["outer"] = seconds_since(t0);

  json evsi = json::array();
  std::vector<double> gam_months, gam_values, mc_months, mc_values;
  tim["regression"] = json::array();
  tim["nested_mc"] = json::array();
  for (double t2 : config.t2_grid) {
    if (want_gam) {
      say("regression EVSI, t2 = " + std::to_string(t2));
      const VoiResult r = evsi_regression(outer, t2, {config.se_draws, config.seed});
      evsi.push_back(result_json(r, config.t1));
      tim["regression"].push_back({{"t2", t2}, {"seconds", r.seconds}});
      gam_months.push_back(t2 - config.t1);
      gam_values.push_back(r.estimate);
    }
    if (want_mc) {
      say("nested Monte Carlo EVSI, t2 = " + std::to_string(t2));
      NestedMcOptions mo;
      mo.mcmc = config.mcmc();
      mo.threads = options.threads;
      const VoiResult r = evsi_nested_mc(outer, prior, t2, mo);
      evsi.push_back(result_json(r, config.t1));
      tim["nested_mc"].push_back({{"t2", t2}, {"seconds", r.seconds}});
      mc_months.push_back(t2 - config.t1);
      mc_values.push_back(r.estimate);
    }
  }
  res["evsi"] = std::move(evsi);

  res["enbs"] = nullptr;
  if (config.enbs) {
    const bool use_gam = want_gam;
    EnbsInputs in;
    in.trial_cost_rate = config.enbs->trial_cost_rate;
    in.accrual_rate = config.enbs->accrual_rate;
    in.horizon = config.enbs->horizon;
    in.incremental_nb = evpi.means[0] - evpi.means[1];
    const auto& months = use_gam ? gam_months : mc_months;
    const auto& values = use_gam ? gam_values : mc_values;
    // The origin is added by enbs_curves, so a single positive grid point suffices.
    if (months.size() + (months.front() > 0.0 ? 1 : 0) >= 2) {
      const EnbsCurves curves = enbs_curves(months, values, in, config.t1);
      json block = crossings_json(curves, in);
      block["source_method"] = use_gam ? "regression" : "nested_mc";
      block["curve"] = {{"month", curves.month}, {"mb", curves.mb}, {"mc_awr", curves.mc_awr}, {"mc_oir", curves.mc_oir}};
      res["enbs"] = std::move(block);
    }
  }
  tim["total"] = seconds_since(run_start);
  return run;
}

nlohmann::json crossings_json(const EnbsCurves& curves, const EnbsInputs& inputs) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"inputs",
           {{"trial_cost_rate", inputs.trial_cost_rate},
            {"accrual_rate", inputs.accrual_rate},
            {"horizon", inputs.horizon},
            {"incremental_nb", inputs.incremental_nb}}},
          {"awr_crossing_months", opt(curves.awr_crossing)},
          {"oir_crossing_months", opt(curves.oir_crossing)}};
}

EnbsCurves enbs_from_results(const nlohmann::json& results, const EnbsRequest& request, EnbsInputs* used,
                             std::string* method_used) {
  if (!results.is_object() || !results.contains("evsi") || !results.contains("config")) {
    throw DataError("not an EVSI results document (missing evsi or config block)");
  }
  const double t1 = results["config"].at("t1").get<double>();
  std::string method;
  if (request.method) {
    method = method_key(*request.method);
  } else {
    method = "nested_mc";
    for (const auto& e : results["evsi"]) {
      if (e.at("method") == "regression") method = "regression";
    }
  }
  std::vector<double> months, values;
  for (const auto& e : results["evsi"]) {
    if (e.at("method") != method) continue;
    months.push_back(e.at("additional_months").get<double>());
    values.push_back(e.at("estimate").get<double>());
  }
  if (months.empty()) throw DataError("results hold no " + method + " EVSI estimates");

  EnbsInputs in;
  if (request.inputs) {
    in.trial_cost_rate = request.inputs->trial_cost_rate;
    in.accrual_rate = request.inputs->accrual_rate;
    in.horizon = request.inputs->horizon;
  } else if (const auto& e = results["config"].value("enbs", json(nullptr)); e.is_object()) {
    in.trial_cost_rate = e.at("trial_cost_rate").get<double>();
    in.accrual_rate = e.at("accrual_rate").get<double>();
    in.horizon = e.at("horizon").get<double>();
  }
  if (request.incremental_nb) {
    in.incremental_nb = *request.incremental_nb;
  } else if (results.contains("evpi") && results["evpi"].contains("mean_nb")) {
    const auto& m = results["evpi"]["mean_nb"];
    in.incremental_nb = m.at(0).get<double>() - m.at(1).get<double>();
  } else {
    throw DataError("results carry no incremental net benefit; pass one explicitly");
  }
  const EnbsCurves curves = enbs_curves(months, values, in, t1);
  if (used) *used = in;
  if (method_used) *method_used = method;
  return curves;
}

void write_curve_csv(std::ostream& out, const EnbsCurves& curves) {
  out << "month,mb,mc_awr,mc_oir\n";
  out << std::setprecision(10);
  for (std::size_t i = 0; i < curves.month.size(); ++i) {
    out << curves.month[i] << ',' << curves.mb[i] << ',' << curves.mc_awr[i] << ',' << curves.mc_oir[i] << '\n';
  }
}

}  // namespace voisurv
