#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "voisurv/distributions.hpp"
#include "voisurv/trial_data.hpp"
#include "voisurv/voi_engine.hpp"

namespace voisurv {

/// Invalid scenario configuration. Messages carry "source:line: " when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nested Monte Carlo requested beyond the configured K * J budget.
class BudgetError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

inline constexpr int kSchemaVersion = 1;

/// Monthly cost inputs for ENBS; the incremental net benefit is derived at run time.
struct EnbsConfig {
  double trial_cost_rate = 5.0;
  double accrual_rate = 5.0;
  double horizon = 120.0;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::vector<Family> families{kAllFamilies.begin(), kAllFamilies.end()};
  std::optional<Family> single_family;  ///< set for "single:<family>", empty for "averaged"
  std::array<std::vector<QuantileComponent>, 2> generator;  ///< arm 0 = new treatment
  double t1 = 12.0;
  std::vector<double> t2_grid{24.0, 36.0, 48.0, 60.0};
  double t_h = 240.0;
  int K = 6000;
  int J = 2000;
  int chains = 4;
  int warmup = 1000;
  int thin = 5;
  std::uint64_t seed = 1;
  int evpi_n = 100000;
  int se_draws = 10000;
  double mc_budget = 1.0e6;  ///< largest K * J accepted for nested MC without --force
  std::optional<EnbsConfig> enbs;

  bool averaged() const { return !single_family.has_value(); }
  /// Families entering the decision model: the single family, or all configured ones.
  std::vector<Family> model_families() const;
  McmcSettings mcmc() const;
  void validate() const;
};

/// Parses a JSON scenario. Unknown keys are rejected.
ScenarioConfig parse_config(std::string_view text, std::string_view source = "config");
ScenarioConfig load_config(const std::filesystem::path& path);

/// "increasing-hazard" and "decreasing-hazard" reproduce the synthetic case studies.
ScenarioConfig builtin_config(std::string_view name);
std::vector<std::string> builtin_config_names();

/// Accepts a file path or "builtin:<name>".
ScenarioConfig resolve_config(std::string_view spec);

nlohmann::json to_json(const ScenarioConfig& config);

TrialDataset generate_dataset(const ScenarioConfig& config);

}  // namespace voisurv
