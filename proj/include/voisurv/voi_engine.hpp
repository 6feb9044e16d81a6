#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "voisurv/fitting.hpp"
#include "voisurv/posterior_mcmc.hpp"
#include "voisurv/trial_data.hpp"

namespace voisurv {

enum class VoiMethod { NestedMC, Regression, MonteCarlo };
std::string_view method_name(VoiMethod m);

/// Candidate models for one arm with their current probabilities P(M_r | x).
struct ArmPrior {
  std::vector<FittedModel> fits;
  std::vector<double> weights;
  std::vector<BivariateNormal> normals;
  int at_risk = 0;
};

/// Everything known at t1 that the value-of-information calculations condition on.
/// Arm 0 is the new treatment. A single-model analysis is the R = 1 case.
struct DecisionPrior {
  std::array<ArmPrior, 2> arms;
  double t1 = 12.0;
  double t_h = 240.0;

  bool averaged() const { return arms[0].fits.size() > 1 || arms[1].fits.size() > 1; }
};

/// Builds an arm prior; weights come from AIC when more than one model is given.
ArmPrior make_arm_prior(std::vector<FittedModel> fits, int at_risk);

struct VoiResult {
  double estimate = 0.0;
  double se = 0.0;
  VoiMethod method = VoiMethod::MonteCarlo;
  int K = 0;
  int J = 0;
  double t2 = 0.0;
  double seconds = 0.0;
  // Nested MC diagnostics
  int rhat_warnings = 0;
  int bridge_failures = 0;
  double mean_acceptance = 0.0;
  // Regression diagnostics
  std::array<double, 2> edf{0.0, 0.0};
  bool smoother_degenerate = false;
};

/// mean_k max_d g[d][k] - max_d mean_k g[d][k] and its Monte Carlo standard error.
/// Returns exactly 0 when every row is constant.
struct GainEstimate {
  double value = 0.0;
  double se = 0.0;
  std::array<double, 2> means{0.0, 0.0};
};
GainEstimate expected_gain(std::span<const double> g0, std::span<const double> g1);

/// Net benefit draws from the current beliefs (model then parameters per arm).
std::array<std::vector<double>, 2> sample_net_benefits(const DecisionPrior& prior, int n, std::uint64_t seed,
                                                       int threads);

VoiResult evpi_mc(const DecisionPrior& prior, int n, std::uint64_t seed, int threads = 1);

/// One outer draw: a model and parameters per arm, their net benefit, and the
/// latent (uncensored) survival times after t1 of the participants at risk.
struct OuterDraw {
  std::array<int, 2> model{0, 0};
  std::array<LogParams, 2> theta{};
  std::array<double, 2> nb{0.0, 0.0};
  std::array<std::vector<double>, 2> latent;
  int resamples = 0;
};

/// Outer sample shared by every t2: censoring at t2 is applied on demand, so
/// all follow-up durations see common random numbers.
struct OuterSample {
  double t1 = 0.0;
  double t_h = 0.0;
  std::uint64_t seed = 0;
  std::vector<OuterDraw> draws;

  std::size_t size() const { return draws.size(); }
  OngoingArmData ongoing(std::size_t k, int arm, double t2) const;
  std::array<std::vector<SummaryStat>, 2> summaries(double t2) const;
};

OuterSample generate_outer_sample(const DecisionPrior& prior, int K, std::uint64_t seed, int threads = 1);

struct RegressionOptions {
  int se_draws = 10000;
  std::uint64_t seed = 1;
};

VoiResult evsi_regression(const OuterSample& outer, double t2, const RegressionOptions& options = {});

enum class SecondTerm { PooledInnerMeans, OuterNetBenefit };

struct NestedMcOptions {
  McmcSettings mcmc;  ///< mcmc.seed is the base key for every inner stream
  int threads = 1;
  SecondTerm second_term = SecondTerm::PooledInnerMeans;
};

VoiResult evsi_nested_mc(const OuterSample& outer, const DecisionPrior& prior, double t2,
                         const NestedMcOptions& options);

// ---- ENBS --------------------------------------------------------------------

struct EnbsInputs {
  double trial_cost_rate = 5.0;  ///< months of life per month of trial
  double accrual_rate = 5.0;     ///< patients per month
  double horizon = 120.0;        ///< decision horizon, months
  double incremental_nb = 0.0;   ///< expected incremental net benefit at t1, months
};

/// Shape-preserving monotone cubic Hermite interpolant (Fritsch-Carlson).
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);
  double value(double x) const;
  double derivative(double x) const;
  double lo() const { return x_.front(); }
  double hi() const { return x_.back(); }

 private:
  std::size_t segment(double x) const;
  std::vector<double> x_, y_, d_;
};

struct EnbsCurves {
  std::vector<double> month;  ///< absolute month (t1 + additional follow-up)
  std::vector<double> mb;
  std::vector<double> mc_awr;
  std::vector<double> mc_oir;
  std::optional<double> awr_crossing;  ///< additional months of follow-up
  std::optional<double> oir_crossing;
};

/**
 * Marginal benefit is d EVSI / d(additional months) of the interpolated
 * per-patient EVSI curve (the origin (0, 0) is added). Marginal costs are on
 * the same per-patient scale: trial cost, and trial cost plus forgone
 * incremental benefit of the accruing patients, divided by accrual * horizon.
 */
EnbsCurves enbs_curves(std::span<const double> additional_months, std::span<const double> evsi,
                       const EnbsInputs& inputs, double t1);

}  // namespace voisurv
