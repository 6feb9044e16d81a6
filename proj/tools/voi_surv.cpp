// voi_surv: generate synthetic trial data, fit survival models, and compute
// EVPI / EVSI / ENBS for extending follow-up of an ongoing two-arm trial.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "voisurv/commands.hpp"
#include "voisurv/fitting.hpp"
#include "voisurv/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace voisurv;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kNumericError = 4 };

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string dataset;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool force = false;
};

int resolve_threads(const std::optional<int>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("VOI_SURV_THREADS"); env && *env) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(env, &used);
      if (used == std::string(env).size() && n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("VOI_SURV_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

ScenarioConfig load(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  ScenarioConfig cfg = resolve_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

TrialDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open dataset");
  try {
    return read_csv(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

fs::path out_file(const Common& c, const std::string& name) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IoError(c.out + ": " + ec.message());
  return fs::path(c.out) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string() + ": write failed");
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

int cmd_generate(const Common& c) {
  const ScenarioConfig cfg = load(c);
  const TrialDataset data = generate_dataset(cfg);
  std::ostringstream csv;
  write_csv(csv, data);
  const fs::path path = out_file(c, "dataset.csv");
  write_text(path, csv.str());
  // The CSV layout is fixed, so provenance goes into a sidecar.
  write_json(out_file(c, "dataset.meta.json"), {{"schema_version", kSchemaVersion},
                                                {"command", "generate"},
                                                {"seed", cfg.seed},
                                                {"config", to_json(cfg)},
                                                {"rows", data.arms[0].size() + data.arms[1].size()}});
  std::cerr << "wrote " << path.string() << '\n';
  return kOk;
}

int cmd_fit(const Common& c, const std::vector<std::string>& family_names) {
  if (c.dataset.empty()) throw ConfigError("--dataset is required");
  std::optional<ScenarioConfig> cfg;
  if (!c.config.empty()) cfg = load(c);
  std::vector<Family> families;
  for (const auto& n : family_names) {
    try {
      families.push_back(parse_family(n));
    } catch (const std::exception&) {
      throw ConfigError("--families: unknown family '" + n + "'");
    }
  }
  if (families.empty()) families = cfg ? cfg->families : std::vector<Family>(kAllFamilies.begin(), kAllFamilies.end());
  const double t1 = cfg ? cfg->t1 : 12.0;
  const double t_h = cfg ? cfg->t_h : 240.0;
  const TrialDataset data = read_dataset(c.dataset);
  json doc = {{"schema_version", kSchemaVersion}, {"command", "fit"}, {"dataset", c.dataset}};
  doc["seed"] = cfg ? json(cfg->seed) : json(nullptr);
  doc["config"] = cfg ? to_json(*cfg) : json(nullptr);
  doc["fits"] = fit_report(data, families, t1, t_h);
  const fs::path path = out_file(c, "fit.json");
  write_json(path, doc);
  std::cerr << "wrote " << path.string() << '\n';
  return kOk;
}

int cmd_evsi(const Common& c, const std::string& method) {
  const ScenarioConfig cfg = load(c);
  const TrialDataset data = c.dataset.empty() ? generate_dataset(cfg) : read_dataset(c.dataset);
  RunOptions opt;
  opt.method = parse_method(method);
  opt.threads = resolve_threads(c.threads);
  opt.force = c.force;
  opt.progress = [](const std::string& s) { std::cerr << "[voi_surv] " << s << '\n'; };
  EvsiRun run = run_evsi(cfg, data, opt);
  run.results["dataset"] = c.dataset.empty() ? json("generated") : json(c.dataset);
  const fs::path path = out_file(c, "results.json");
  write_json(path, run.results);
  run.timings["seed"] = cfg.seed;
  run.timings["threads"] = opt.threads;
  write_json(out_file(c, "timings.json"), run.timings);
  std::cerr << "EVPI " << run.results["evpi"]["estimate"].get<double>() << '\n';
  for (const auto& e : run.results["evsi"]) {
    std::cerr << "EVSI t2=" << e["t2"].get<double>() << ' ' << e["method"].get<std::string>() << ' '
              << e["estimate"].get<double>() << " (" << e["se"].get<double>() << ")\n";
  }
  std::cerr << "total " << run.timings["total"].get<double>() << " s; wrote " << path.string() << '\n';
  return kOk;
}

struct EnbsFlags {
  std::string results;
  std::string method;
  std::optional<double> trial_cost_rate, accrual_rate, horizon, incremental_nb;
};

int cmd_enbs(const Common& c, const EnbsFlags& f) {
  if (f.results.empty()) throw ConfigError("--results is required");
  std::ifstream in(f.results);
  if (!in) throw DataError(f.results + ": cannot open results");
  json results;
  try {
    results = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(f.results + ": " + e.what());
  }
  EnbsRequest req;
  if (!f.method.empty()) req.method = f.method;
  if (f.trial_cost_rate || f.accrual_rate || f.horizon) {
    EnbsConfig ec;
    if (const auto& e = results["config"].value("enbs", json(nullptr)); e.is_object()) {
      ec.trial_cost_rate = e.value("trial_cost_rate", ec.trial_cost_rate);
      ec.accrual_rate = e.value("accrual_rate", ec.accrual_rate);
      ec.horizon = e.value("horizon", ec.horizon);
    }
    if (f.trial_cost_rate) ec.trial_cost_rate = *f.trial_cost_rate;
    if (f.accrual_rate) ec.accrual_rate = *f.accrual_rate;
    if (f.horizon) ec.horizon = *f.horizon;
    req.inputs = ec;
  }
  req.incremental_nb = f.incremental_nb;
  EnbsInputs used;
  std::string method;
  EnbsCurves curves;
  try {
    curves = enbs_from_results(results, req, &used, &method);
  } catch (const json::exception& e) {
    throw DataError(f.results + ": " + e.what());
  }
  std::ostringstream csv;
  write_curve_csv(csv, curves);
  write_text(out_file(c, "enbs_curve.csv"), csv.str());
  json doc = crossings_json(curves, used);
  doc["schema_version"] = kSchemaVersion;
  doc["command"] = "enbs";
  doc["seed"] = results.value("seed", json(nullptr));
  doc["source_results"] = f.results;
  doc["source_method"] = method;
  doc["config"] = results["config"];
  const fs::path path = out_file(c, "enbs_crossings.json");
  write_json(path, doc);
  auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("none"); };
  std::cerr << "AWR crossing " << show(curves.awr_crossing) << ", OIR crossing " << show(curves.oir_crossing)
            << " additional months; wrote " << path.string() << '\n';
  return kOk;
}

struct FlagSet {
  bool config = true;
  bool config_required = false;
  bool dataset = false;
  bool compute = false;  ///< --seed, --threads and --force
};

void add_common(CLI::App* sub, Common& c, const FlagSet& flags) {
  if (flags.config) {
    auto* opt =
        sub->add_option("--config", c.config, "scenario JSON, or builtin:increasing-hazard / builtin:decreasing-hazard");
    if (flags.config_required) opt->required();
  }
  if (flags.dataset) sub->add_option("--dataset", c.dataset, "dataset CSV (id,arm,time,status)");
  if (flags.compute) {
    sub->add_option("--seed", c.seed, "override the configured seed");
    sub->add_option("--threads", c.threads, "worker threads (default: VOI_SURV_THREADS or 1)")->check(CLI::PositiveNumber);
    sub->add_flag("--force", c.force, "run nested Monte Carlo beyond the configured K*J budget");
  }
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Value of information for extending follow-up in an ongoing survival trial"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::string> families;
  std::string method = "gam";
  EnbsFlags enbs;

  auto* gen = app.add_subcommand("generate", "write the synthetic dataset described by a scenario");
  add_common(gen, common, {.config_required = true});
  gen->add_option("--seed", common.seed, "override the configured seed");
  auto* fit = app.add_subcommand("fit", "fit survival families to a dataset and report AIC weights");
  add_common(fit, common, {.dataset = true});
  fit->add_option("--families", families, "families to fit (default: all four)")->delimiter(',');
  auto* evsi = app.add_subcommand("evsi", "EVPI and EVSI over the t2 grid, plus ENBS when configured");
  add_common(evsi, common, {.config_required = true, .dataset = true, .compute = true});
  evsi->add_option("--method", method, "mc, gam or both")->check(CLI::IsMember({"mc", "gam", "both"}))->capture_default_str();
  auto* en = app.add_subcommand("enbs", "marginal benefit and cost curves from an EVSI results file");
  add_common(en, common, {.config = false});
  en->add_option("--results", enbs.results, "results.json written by evsi")->required();
  en->add_option("--method", enbs.method, "EVSI estimates to use: gam or mc")->check(CLI::IsMember({"mc", "gam"}));
  en->add_option("--trial-cost", enbs.trial_cost_rate, "months of life per month of trial");
  en->add_option("--accrual", enbs.accrual_rate, "patients per month");
  en->add_option("--horizon", enbs.horizon, "decision horizon in months");
  en->add_option("--incremental-nb", enbs.incremental_nb, "expected incremental net benefit at t1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return cmd_generate(common);
    if (*fit) return cmd_fit(common, families);
    if (*evsi) return cmd_evsi(common, method);
    if (*en) return cmd_enbs(common, enbs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    // FitError, NumericError, TruncationMassError, DomainError
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  }
  return kOk;
}
