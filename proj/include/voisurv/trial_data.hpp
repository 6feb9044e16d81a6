#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "voisurv/distributions.hpp"

namespace voisurv {

/// Malformed or inconsistent trial data (bad CSV rows, times outside follow-up).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Observations for one arm up to the end of follow-up. status 1 = event.
struct TrialArm {
  std::vector<double> times;
  std::vector<int> status;
  double followup_end = 0.0;

  std::size_t size() const { return times.size(); }
  int events() const;
  void validate() const;
};

/// Observations collected between t1 and t2 for the participants at risk at t1.
struct OngoingArmData {
  std::vector<double> times;
  std::vector<int> status;
  double t1 = 0.0;
  double t2 = 0.0;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

/// Regression covariates for one arm: event count and exposure after t1.
struct SummaryStat {
  int events = 0;
  double time_at_risk = 0.0;
};

/// One block of evenly spaced quantiles from a parametric law.
/// Parameters are on the natural scale: (shape, scale), (shape, rate),
/// (meanlog, sdlog) or (shape, scale) for the log-logistic.
struct QuantileComponent {
  Family family = Family::Weibull;
  double first = 1.0;
  double second = 1.0;
  int n_quantiles = 100;
};

/// Index 0 is the new treatment, index 1 standard care.
struct TrialDataset {
  std::array<TrialArm, 2> arms;
};

/**
 * Times at quantiles (i + 0.5) / n, i = 0..n-1, administratively censored at
 * t1: anything beyond t1 becomes (t1, status 0). t1 may be +infinity.
 */
TrialArm generate_quantile_arm(Family family, double first, double second, int n_quantiles, double t1);

/// Concatenates several quantile blocks (in order) into one arm.
TrialArm generate_quantile_arm(std::span<const QuantileComponent> components, double t1);

/// Participants still under observation at t1 (censored exactly at t1).
int at_risk(const TrialArm& arm, double t1);

/// e = number of events; y = sum of (time - t1).
SummaryStat summary_stat(const OngoingArmData& ongoing);

/// Censors latent survival times (all >= t1) at t2.
OngoingArmData censor_at(std::span<const double> latent_times, double t1, double t2);

struct KmStep {
  double time;
  double survival;
};

/// Product-limit estimate. The first step is (0, 1); one further step per distinct event time.
std::vector<KmStep> kaplan_meier(const TrialArm& arm);

/// CSV with header id,arm,time,status. arm is 1 (new treatment) or 2.
void write_csv(std::ostream& out, const TrialDataset& data);

/// Reads the CSV written by write_csv. followup_end of each arm is its largest time.
/// Errors carry the 1-based line number.
TrialDataset read_csv(std::istream& in);

}  // namespace voisurv
