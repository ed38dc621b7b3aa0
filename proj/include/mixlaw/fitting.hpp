#pragma once

// Estimation procedures for every law form: per-weighting power laws, the
// bivariate encoder/decoder law, the joint law with shared exponent and
// asymptote, effective-fraction curves, learning-curve extrapolation, and
// perturbation bootstrap.
//
// All fits are deterministic in (data, config). Positivity is enforced by
// reparameterization: beta and alpha are optimized in log space and l_inf
// through softplus.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mixlaw/lawcore.hpp"

namespace mixlaw {

enum class ResidualSpace { raw, log_shifted };

std::string_view to_string(ResidualSpace s) noexcept;
ResidualSpace parse_residual_space(std::string_view s);

struct FitConfig {
  ResidualSpace residual_space = ResidualSpace::raw;
  int multistart_count = 16;
  int max_iterations = 2000;
  double convergence_tol = 1e-10;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

struct FitDiagnostics {
  double sse = 0.0;
  double r_squared = 0.0;
  int n_points = 0;
  int n_params = 0;
  bool converged = false;
  std::vector<double> residuals;  // observed - predicted, input order
  std::vector<std::pair<WeightKey, double>> per_weighting_r_squared;  // joint fits only

  friend bool operator==(const FitDiagnostics&, const FitDiagnostics&) = default;
};

struct SizePoint {
  double n;
  double y;
};

struct BivariatePoint {
  double n_enc;
  double n_dec;
  double y;
};

// One observation for one task: model size, the task's own weight, metric.
struct WeightedPoint {
  double n;
  double p;
  double y;

  friend bool operator==(const WeightedPoint&, const WeightedPoint&) = default;
};

struct FractionSample {
  double p;
  double f;
};

struct CurvePoint {
  std::int64_t step;
  double y;
};

struct PowerLawFit {
  PowerLawParams params;
  FitDiagnostics diagnostics;

  friend bool operator==(const PowerLawFit&, const PowerLawFit&) = default;
};

struct BivariateFit {
  BivariateLawParams params;
  FitDiagnostics diagnostics;
};

struct JointFit {
  JointLaw law;
  FitDiagnostics diagnostics;

  friend bool operator==(const JointFit&, const JointFit&) = default;
};

struct FractionCurveFit {
  FractionFit fit;
  FitDiagnostics diagnostics;

  friend bool operator==(const FractionCurveFit&, const FractionCurveFit&) = default;
};

PowerLawFit fit_power_law(std::span<const SizePoint> points, MetricDirection direction,
                          const FitConfig& config);

BivariateFit fit_bivariate_law(std::span<const BivariatePoint> points, const FitConfig& config);

JointFit fit_joint_law(const TaskId& task, std::span<const WeightedPoint> points,
                       MetricDirection direction, const FitConfig& config);

// Independent three-parameter fit per observed weighting. Weightings with
// fewer than three distinct sizes are skipped.
std::map<WeightKey, PowerLawFit> fit_per_weighting(std::span<const WeightedPoint> points,
                                                   MetricDirection direction,
                                                   const FitConfig& config);

FractionCurveFit fit_fraction_curve(const TaskId& task, std::span<const FractionSample> samples,
                                    FractionForm form, const FitConfig& config);

inline constexpr std::int64_t kDefaultCorrectionTargetStep = 2'500'000;

struct CorrectionResult {
  double value;
  PowerLawParams curve;  // y(s) = beta * s^-alpha + l_inf
  FitDiagnostics diagnostics;
  bool extrapolation_warning;  // target beyond 10x the last observed step
};

CorrectionResult convergence_correct(std::span<const CurvePoint> curve, std::int64_t target_step,
                                     const FitConfig& config,
                                     MetricDirection direction = MetricDirection::loss_like);

struct UncertaintyReport {
  std::map<std::string, double> std_devs;
  int replicate_count = 0;
  int failed_replicates = 0;
  double sigma_fraction = 0.01;

  friend bool operator==(const UncertaintyReport&, const UncertaintyReport&) = default;
};

struct BootstrapOptions {
  double sigma_fraction = 0.01;
  int replicates = 32;
  std::uint64_t seed = 0;
};

using NamedCoefficients = std::vector<std::pair<std::string, double>>;
// Refits on perturbed observations (same order as the base y) and returns
// named coefficients. Names must be identical across calls.
using Refit = std::function<NamedCoefficients(std::span<const double> y)>;

// Perturbs each y with N(0, (sigma * |y|)^2) per replicate and reports the
// per-coefficient standard deviation across successful refits. At least 80%
// of replicates must succeed.
UncertaintyReport bootstrap_uncertainty(std::span<const double> y, const Refit& refit,
                                        const BootstrapOptions& options);

NamedCoefficients coefficients(const PowerLawParams& params);
// alpha, l_inf, beta@p per weighting, and f@p when the p=1 beta exists.
NamedCoefficients coefficients(const JointLaw& law);

std::string beta_name(WeightKey key);
std::string fraction_name(WeightKey key);

UncertaintyReport bootstrap_power_law(std::span<const SizePoint> points, MetricDirection direction,
                                      const FitConfig& config, const BootstrapOptions& options);
UncertaintyReport bootstrap_joint_law(const TaskId& task, std::span<const WeightedPoint> points,
                                      MetricDirection direction, const FitConfig& config,
                                      const BootstrapOptions& options);

}  // namespace mixlaw
