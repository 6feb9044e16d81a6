#include "voisurv/trial_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace voisurv {

int TrialArm::events() const { return std::accumulate(status.begin(), status.end(), 0); }

void TrialArm::validate() const {
  if (times.size() != status.size()) throw DataError("times and status differ in length");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > 0.0) || times[i] > followup_end) {
      std::ostringstream msg;
      msg << "time " << times[i] << " outside (0, " << followup_end << "]";
      throw DataError(msg.str());
    }
    if (status[i] != 0 && status[i] != 1) throw DataError("status must be 0 or 1");
  }
}

void OngoingArmData::validate() const {
  if (times.size() != status.size()) throw DataError("times and status differ in length");
  if (!(t2 >= t1)) throw DataError("t2 precedes t1");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t1 || times[i] > t2) {
      std::ostringstream msg;
      msg << "ongoing time " << times[i] << " outside [" << t1 << ", " << t2 << "]";
      throw DataError(msg.str());
    }
    if (status[i] != 0 && status[i] != 1) throw DataError("status must be 0 or 1");
  }
}

TrialArm generate_quantile_arm(Family family, double first, double second, int n_quantiles, double t1) {
  const QuantileComponent c{family, first, second, n_quantiles};
  return generate_quantile_arm(std::span<const QuantileComponent>(&c, 1), t1);
}

TrialArm generate_quantile_arm(std::span<const QuantileComponent> components, double t1) {
  if (!(t1 > 0.0)) throw DomainError("censoring time must be positive");
  TrialArm arm;
  arm.followup_end = t1;
  for (const auto& c : components) {
    if (c.n_quantiles < 0) throw DomainError("number of quantiles must be non-negative");
    const LogParams theta = to_log_params(c.family, c.first, c.second);
    const double n = c.n_quantiles;
    for (int i = 0; i < c.n_quantiles; ++i) {
      const double t = quantile(c.family, theta, (i + 0.5) / n);
      if (t > t1) {
        arm.times.push_back(t1);
        arm.status.push_back(0);
      } else {
        arm.times.push_back(t);
        arm.status.push_back(1);
      }
    }
  }
  return arm;
}

int at_risk(const TrialArm& arm, double t1) {
  int n = 0;
  for (std::size_t i = 0; i < arm.size(); ++i) {
    if (arm.status[i] == 0 && arm.times[i] == t1) ++n;
  }
  return n;
}

SummaryStat summary_stat(const OngoingArmData& ongoing) {
  SummaryStat s;
  for (std::size_t i = 0; i < ongoing.size(); ++i) {
    s.events += ongoing.status[i];
    s.time_at_risk += ongoing.times[i] - ongoing.t1;
  }
  return s;
}

OngoingArmData censor_at(std::span<const double> latent_times, double t1, double t2) {
  if (!(t2 >= t1)) throw DomainError("t2 precedes t1");
  OngoingArmData d;
  d.t1 = t1;
  d.t2 = t2;
  d.times.reserve(latent_times.size());
  d.status.reserve(latent_times.size());
  for (double t : latent_times) {
    if (t < t1) throw DomainError("latent time precedes t1");
    if (t > t2 || t2 == t1) {
      d.times.push_back(t2);
      d.status.push_back(0);
    } else {
      d.times.push_back(t);
      d.status.push_back(1);
    }
  }
  return d;
}

std::vector<KmStep> kaplan_meier(const TrialArm& arm) {
  if (arm.size() == 0) throw DataError("Kaplan-Meier needs at least one observation");
  std::vector<std::size_t> order(arm.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Events before censorings at tied times, the usual product-limit convention.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (arm.times[a] != arm.times[b]) return arm.times[a] < arm.times[b];
    return arm.status[a] > arm.status[b];
  });
  std::vector<KmStep> steps{{0.0, 1.0}};
  double s = 1.0;
  std::size_t at_risk_now = arm.size();
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = arm.times[order[i]];
    std::size_t deaths = 0;
    std::size_t leaving = 0;
    while (i < order.size() && arm.times[order[i]] == t) {
      deaths += static_cast<std::size_t>(arm.status[order[i]]);
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk_now);
      steps.push_back({t, s});
    }
    at_risk_now -= leaving;
  }
  return steps;
}

void write_csv(std::ostream& out, const TrialDataset& data) {
  out << "id,arm,time,status\n";
  int id = 1;
  for (int a = 0; a < 2; ++a) {
    const TrialArm& arm = data.arms[a];
    for (std::size_t i = 0; i < arm.size(); ++i) {
      out << id++ << ',' << (a + 1) << ',' << std::fixed << std::setprecision(6) << arm.times[i]
          << ',' << arm.status[i] << '\n';
    }
  }
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    fields.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

template <class T>
T parse_field(const std::string& s, int line_no, const char* what) {
  T value{};
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    std::ostringstream msg;
    msg << "line " << line_no << ": cannot parse " << what << " '" << s << "'";
    throw DataError(msg.str());
  }
  return value;
}

}  // namespace

TrialDataset read_csv(std::istream& in) {
  TrialDataset data;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (!header_seen) {
      if (fields != std::vector<std::string>{"id", "arm", "time", "status"}) {
        throw DataError("line " + std::to_string(line_no) + ": expected header id,arm,time,status");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) {
      throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    const int arm = parse_field<int>(fields[1], line_no, "arm");
    const double time = parse_field<double>(fields[2], line_no, "time");
    const int status = parse_field<int>(fields[3], line_no, "status");
    if (arm != 1 && arm != 2) {
      throw DataError("line " + std::to_string(line_no) + ": arm must be 1 or 2");
    }
    if (!(time > 0.0) || !std::isfinite(time)) {
      throw DataError("line " + std::to_string(line_no) + ": time must be positive");
    }
    if (status != 0 && status != 1) {
      throw DataError("line " + std::to_string(line_no) + ": status must be 0 or 1");
    }
    data.arms[arm - 1].times.push_back(time);
    data.arms[arm - 1].status.push_back(status);
  }
  if (!header_seen) throw DataError("empty dataset: missing header");
  for (auto& arm : data.arms) {
    arm.followup_end = arm.times.empty() ? 0.0 : *std::max_element(arm.times.begin(), arm.times.end());
  }
  return data;
}

}  // namespace voisurv
