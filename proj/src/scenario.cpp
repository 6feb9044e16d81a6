#include "voisurv/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace voisurv {
namespace {

using nlohmann::json;

constexpr std::array<const char*, 2> kArmKeys = {"new_treatment", "standard_care"};

// Start of element `index` of the array opening at or after `pos`, or npos.
std::size_t array_element(std::string_view text, std::size_t pos, std::size_t index) {
  pos = text.find('[', pos);
  if (pos == std::string_view::npos) return pos;
  int depth = 0;
  bool in_string = false;
  std::size_t seen = 0;
  for (std::size_t i = pos; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') ++i;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '[' || ch == '{') ++depth;
    else if (ch == ']' || ch == '}') {
      if (--depth == 0) return std::string_view::npos;
    } else if (ch == ',' && depth == 1) ++seen;
    if (seen == index && depth == 1 && (ch == '[' || ch == ',') && i + 1 < text.size()) {
      std::size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      return j;
    }
  }
  return std::string_view::npos;
}

// Line holding the innermost element of `path` in the raw text; 0 if not found.
int locate_line(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  bool found = false;
  for (const auto& key : path) {
    if (key.empty()) continue;
    if (key.front() == '[') {
      const std::size_t at = array_element(text, pos, std::stoul(key.substr(1)));
      if (at == std::string_view::npos) break;
      pos = at;
      continue;
    }
    const std::string quoted = "\"" + key + "\"";
    found = false;
    for (std::size_t p = text.find(quoted, pos); p != std::string_view::npos; p = text.find(quoted, p + 1)) {
      std::size_t q = p + quoted.size();
      while (q < text.size() && std::isspace(static_cast<unsigned char>(text[q]))) ++q;
      if (q < text.size() && text[q] == ':') {
        pos = p;
        found = true;
        break;
      }
    }
    if (!found) break;
  }
  if (!found) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class Reader {
 public:
  Reader(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& what) const {
    std::ostringstream msg;
    msg << source_;
    if (const int line = locate_line(text_, path); line > 0) msg << ':' << line;
    msg << ": ";
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i > 0 && path[i].front() != '[') msg << '.';
      msg << path[i];
    }
    msg << ": " << what;
    throw ConfigError(msg.str());
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path, "must be finite");
    return x;
  }

  int count(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < 0 || x > 100'000'000) fail(path, "out of range");
    return static_cast<int>(x);
  }

  std::uint64_t seed(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  Family family(const json& v, const std::vector<std::string>& path) const {
    const std::string s = string(v, path);
    try {
      return parse_family(s);
    } catch (const std::exception&) {
      fail(path, "unknown family '" + s + "'");
    }
  }

  void only_keys(const json& obj, const std::vector<std::string>& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [k, _] : obj.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        auto p = path;
        p.push_back(k);
        fail(p, "unknown key");
      }
    }
  }

  std::string_view text() const { return text_; }

 private:
  std::string_view text_;
  std::string_view source_;
};

std::vector<QuantileComponent> read_arm(const Reader& rd, const json& v, std::vector<std::string> path) {
  if (!v.is_array()) rd.fail(path, "expected a list of quantile components");
  std::vector<QuantileComponent> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto p = path;
    p.push_back("[" + std::to_string(i) + "]");
    const json& c = v[i];
    rd.only_keys(c, p, {"family", "params", "n"});
    if (!c.contains("family") || !c.contains("params") || !c.contains("n")) {
      rd.fail(p, "component needs family, params and n");
    }
    QuantileComponent q;
    q.family = rd.family(c["family"], [&] { auto pp = p; pp.push_back("family"); return pp; }());
    auto pp = p;
    pp.push_back("params");
    if (!c["params"].is_array() || c["params"].size() != 2) rd.fail(pp, "expected two natural parameters");
    q.first = rd.number(c["params"][0], pp);
    q.second = rd.number(c["params"][1], pp);
    auto pn = p;
    pn.push_back("n");
    q.n_quantiles = rd.count(c["n"], pn);
    try {
      (void)to_log_params(q.family, q.first, q.second);
    } catch (const std::exception& e) {
      rd.fail(pp, e.what());
    }
    out.push_back(q);
  }
  return out;
}

json arm_to_json(const std::vector<QuantileComponent>& arm) {
  json out = json::array();
  for (const auto& c : arm) {
    out.push_back({{"family", family_name(c.family)}, {"params", {c.first, c.second}}, {"n", c.n_quantiles}});
  }
  return out;
}

ScenarioConfig case_study(std::string name, double shape_w, double scale_new, double scale_std, double shape_g,
                          double rate_g, std::uint64_t seed) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.generator[0] = {{Family::Weibull, shape_w, scale_new, 100}, {Family::Gamma, shape_g, rate_g, 100}};
  c.generator[1] = {{Family::Weibull, shape_w, scale_std, 100}, {Family::Gamma, shape_g, rate_g, 100}};
  c.seed = seed;
  c.enbs = EnbsConfig{};
  return c;
}

}  // namespace

std::vector<Family> ScenarioConfig::model_families() const {
  if (single_family) return {*single_family};
  return families;
}

McmcSettings ScenarioConfig::mcmc() const {
  McmcSettings s;
  s.draws = J;
  s.warmup = warmup;
  s.chains = chains;
  s.thin = thin;
  s.seed = seed;
  return s;
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& what) { throw ConfigError(what); };
  if (families.empty()) bad("families: at least one family is required");
  std::set<Family> seen(families.begin(), families.end());
  if (seen.size() != families.size()) bad("families: duplicate entry");
  if (!(t1 > 0.0)) bad("t1: must be positive");
  if (t2_grid.empty()) bad("t2_grid: at least one follow-up time is required");
  for (std::size_t i = 0; i < t2_grid.size(); ++i) {
    if (t2_grid[i] < t1) bad("t2_grid: every t2 must be at least t1");
    if (i > 0 && !(t2_grid[i] > t2_grid[i - 1])) bad("t2_grid: must be strictly increasing");
  }
  if (!(t_h > t2_grid.back())) bad("t_h: must exceed the largest t2");
  if (K < 50 || K > 1'000'000) bad("K: must lie in [50, 1000000]");
  if (J < 100 || J > 1'000'000) bad("J: must lie in [100, 1000000]");
  if (chains < 2 || chains > 64) bad("chains: must lie in [2, 64]");
  if (warmup < 100) bad("warmup: must be at least 100");
  if (thin < 1 || thin > 1000) bad("thin: must lie in [1, 1000]");
  if (evpi_n < 1000) bad("evpi_n: must be at least 1000");
  if (se_draws < 100) bad("se_draws: must be at least 100");
  if (!(mc_budget > 0.0)) bad("mc_budget: must be positive");
  if (enbs) {
    if (!(enbs->trial_cost_rate >= 0.0) || !(enbs->accrual_rate >= 0.0) || !(enbs->horizon > 0.0)) {
      bad("enbs: costs and accrual must be non-negative and the horizon positive");
    }
  }
}

ScenarioConfig parse_config(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  const Reader rd(text, source);
  rd.only_keys(doc, {}, {"schema_version", "name", "families", "mode", "generator", "t1", "t2_grid", "t_h", "K", "J",
                         "chains", "warmup", "thin", "seed", "evpi_n", "se_draws", "mc_budget", "enbs"});
  ScenarioConfig c;
  if (doc.contains("schema_version")) {
    if (rd.count(doc["schema_version"], {"schema_version"}) != kSchemaVersion) {
      rd.fail({"schema_version"}, "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }
  if (doc.contains("name")) c.name = rd.string(doc["name"], {"name"});
  if (doc.contains("families")) {
    const json& f = doc["families"];
    if (!f.is_array()) rd.fail({"families"}, "expected a list");
    c.families.clear();
    for (const auto& v : f) c.families.push_back(rd.family(v, {"families"}));
  }
  if (doc.contains("mode")) {
    const std::string m = rd.string(doc["mode"], {"mode"});
    if (m == "averaged") {
      c.single_family.reset();
    } else if (m.starts_with("single:")) {
      c.single_family = rd.family(json(m.substr(7)), {"mode"});
    } else {
      rd.fail({"mode"}, "expected \"averaged\" or \"single:<family>\"");
    }
  }
  if (doc.contains("generator")) {
    const json& g = doc["generator"];
    rd.only_keys(g, {"generator"}, {kArmKeys[0], kArmKeys[1]});
    for (int a = 0; a < 2; ++a) {
      if (g.contains(kArmKeys[a])) c.generator[a] = read_arm(rd, g[kArmKeys[a]], {"generator", kArmKeys[a]});
    }
  }
  if (doc.contains("t1")) c.t1 = rd.number(doc["t1"], {"t1"});
  if (doc.contains("t2_grid")) {
    const json& g = doc["t2_grid"];
    if (!g.is_array()) rd.fail({"t2_grid"}, "expected a list");
    c.t2_grid.clear();
    for (const auto& v : g) c.t2_grid.push_back(rd.number(v, {"t2_grid"}));
  }
  if (doc.contains("t_h")) c.t_h = rd.number(doc["t_h"], {"t_h"});
  if (doc.contains("K")) c.K = rd.count(doc["K"], {"K"});
  if (doc.contains("J")) c.J = rd.count(doc["J"], {"J"});
  if (doc.contains("chains")) c.chains = rd.count(doc["chains"], {"chains"});
  if (doc.contains("warmup")) c.warmup = rd.count(doc["warmup"], {"warmup"});
  if (doc.contains("thin")) c.thin = rd.count(doc["thin"], {"thin"});
  if (doc.contains("seed")) c.seed = rd.seed(doc["seed"], {"seed"});
  if (doc.contains("evpi_n")) c.evpi_n = rd.count(doc["evpi_n"], {"evpi_n"});
  if (doc.contains("se_draws")) c.se_draws = rd.count(doc["se_draws"], {"se_draws"});
  if (doc.contains("mc_budget")) c.mc_budget = rd.number(doc["mc_budget"], {"mc_budget"});
  if (doc.contains("enbs") && !doc["enbs"].is_null()) {
    const json& e = doc["enbs"];
    rd.only_keys(e, {"enbs"}, {"trial_cost_rate", "accrual_rate", "horizon"});
    EnbsConfig ec;
    if (e.contains("trial_cost_rate")) ec.trial_cost_rate = rd.number(e["trial_cost_rate"], {"enbs", "trial_cost_rate"});
    if (e.contains("accrual_rate")) ec.accrual_rate = rd.number(e["accrual_rate"], {"enbs", "accrual_rate"});
    if (e.contains("horizon")) ec.horizon = rd.number(e["horizon"], {"enbs", "horizon"});
    c.enbs = ec;
  }

  try {
    c.validate();
  } catch (const ConfigError& e) {
    // validate() messages start with the offending key.
    const std::string what = e.what();
    const std::string key = what.substr(0, what.find(':'));
    rd.fail({key}, what.substr(std::min(what.size(), key.size() + 2)));
  }
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

ScenarioConfig builtin_config(std::string_view name) {
  if (name == "increasing-hazard") return case_study(std::string(name), 1.1, 70.0, 50.0, 1.8, 0.04, 20210101);
  if (name == "decreasing-hazard") return case_study(std::string(name), 0.6, 80.0, 57.0, 0.8, 0.01, 20210102);
  throw ConfigError("unknown built-in configuration '" + std::string(name) + "'");
}

std::vector<std::string> builtin_config_names() { return {"increasing-hazard", "decreasing-hazard"}; }

ScenarioConfig resolve_config(std::string_view spec) {
  constexpr std::string_view prefix = "builtin:";
  if (spec.starts_with(prefix)) return builtin_config(spec.substr(prefix.size()));
  return load_config(std::filesystem::path(spec));
}

nlohmann::json to_json(const ScenarioConfig& c) {
  json fams = json::array();
  for (Family f : c.families) fams.push_back(family_name(f));
  json out = {
      {"schema_version", kSchemaVersion},
      {"name", c.name},
      {"families", fams},
      {"mode", c.single_family ? "single:" + std::string(family_name(*c.single_family)) : std::string("averaged")},
      {"generator", {{kArmKeys[0], arm_to_json(c.generator[0])}, {kArmKeys[1], arm_to_json(c.generator[1])}}},
      {"t1", c.t1},
      {"t2_grid", c.t2_grid},
      {"t_h", c.t_h},
      {"K", c.K},
      {"J", c.J},
      {"chains", c.chains},
      {"warmup", c.warmup},
      {"thin", c.thin},
      {"seed", c.seed},
      {"evpi_n", c.evpi_n},
      {"se_draws", c.se_draws},
      {"mc_budget", c.mc_budget},
  };
  if (c.enbs) {
    out["enbs"] = {{"trial_cost_rate", c.enbs->trial_cost_rate},
                   {"accrual_rate", c.enbs->accrual_rate},
                   {"horizon", c.enbs->horizon}};
  } else {
    out["enbs"] = nullptr;
  }
  return out;
}

TrialDataset generate_dataset(const ScenarioConfig& config) {
  TrialDataset data;
  for (int a = 0; a < 2; ++a) data.arms[a] = generate_quantile_arm(config.generator[a], config.t1);
  return data;
}

}  // namespace voisurv
