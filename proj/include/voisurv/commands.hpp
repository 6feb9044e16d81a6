#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "voisurv/scenario.hpp"
#include "voisurv/voi_engine.hpp"

namespace voisurv {

/**
 * Per family and arm: MLE, covariance, log-likelihood, AIC and RMST at t_h,
 * then Akaike weights, the weighted NB per arm and the incremental NB.
 * A family that fails to fit is reported with its error and left out of the
 * weights; the others are unaffected.
 */
nlohmann::json fit_report(const TrialDataset& data, std::span<const Family> families, double t1, double t_h);

/// Fits the configured model set to each arm. Any fit failure is fatal here.
DecisionPrior build_decision_prior(const ScenarioConfig& config, const TrialDataset& data);

enum class MethodChoice { Mc, Gam, Both };
MethodChoice parse_method(std::string_view s);

struct RunOptions {
  MethodChoice method = MethodChoice::Gam;
  int threads = 1;
  bool force = false;  ///< allow nested MC above the configured budget
  std::function<void(const std::string&)> progress;  ///< optional status lines
};

struct EvsiRun {
  nlohmann::json results;  ///< deterministic for a given config and seed
  nlohmann::json timings;  ///< wall-clock seconds, kept apart so results stay byte-stable
};

/// EVPI, EVSI per t2 and method on one shared outer sample, and ENBS when configured.
EvsiRun run_evsi(const ScenarioConfig& config, const TrialDataset& data, const RunOptions& options);

/// ENBS from a results document. Uses the GAM estimates when present unless
/// `method` names another one. Inputs default to the config block of the results.
struct EnbsRequest {
  std::optional<std::string> method;
  std::optional<EnbsConfig> inputs;
  std::optional<double> incremental_nb;
};
EnbsCurves enbs_from_results(const nlohmann::json& results, const EnbsRequest& request, EnbsInputs* used = nullptr,
                             std::string* method_used = nullptr);

nlohmann::json crossings_json(const EnbsCurves& curves, const EnbsInputs& inputs);

/// month,mb,mc_awr,mc_oir
void write_curve_csv(std::ostream& out, const EnbsCurves& curves);

}  // namespace voisurv
