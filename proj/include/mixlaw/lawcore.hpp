#pragma once

// Scaling-law value types and closed-form evaluation.
//
// Everything here is a pure function of immutable values. Type invariants are
// checked when a value is constructed, so evaluation never re-validates.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include "mixlaw/error.hpp"

namespace mixlaw {

enum class MetricDirection {
  loss_like,     // lower is better: beta * n^-alpha + l_inf
  quality_like,  // higher is better: l_inf - beta * n^-alpha
};

std::string_view to_string(MetricDirection d) noexcept;
MetricDirection parse_direction(std::string_view s);

struct TaskId {
  std::string name;
  std::string direction_tag;  // free-form, e.g. "En->XX"; may be empty

  explicit TaskId(std::string task_name, std::string tag = {});

  friend bool operator==(const TaskId&, const TaskId&) = default;
  friend auto operator<=>(const TaskId&, const TaskId&) = default;
};

class WeightVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  WeightVector() = default;
  explicit WeightVector(std::map<std::string, double> entries);

  // Two-task convenience: (p, 1 - p).
  static WeightVector pair(const std::string& first, const std::string& second,
                           double p);

  const std::map<std::string, double>& entries() const noexcept { return entries_; }
  bool contains(const std::string& task) const { return entries_.contains(task); }
  double weight(const std::string& task) const;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::map<std::string, double> entries_;
};

// Weighting key: the task's own weight rounded to 6 decimals, held as an
// integer count of micro-units so map lookups survive text round trips.
class WeightKey {
 public:
  static constexpr std::int64_t kScale = 1'000'000;

  constexpr WeightKey() = default;
  static WeightKey from_weight(double p);
  static constexpr WeightKey from_micros(std::int64_t micros) { return WeightKey(micros); }
  static WeightKey parse(std::string_view text);

  std::int64_t micros() const noexcept { return micros_; }
  double value() const noexcept { return static_cast<double>(micros_) / kScale; }
  std::string to_string() const;

  friend auto operator<=>(const WeightKey&, const WeightKey&) = default;

 private:
  constexpr explicit WeightKey(std::int64_t micros) : micros_(micros) {}
  std::int64_t micros_ = 0;
};

inline constexpr WeightKey kFullWeight = WeightKey::from_micros(WeightKey::kScale);

class ModelSize {
 public:
  explicit ModelSize(double n);
  double value() const noexcept { return n_; }
  friend auto operator<=>(const ModelSize&, const ModelSize&) = default;

 private:
  double n_;
};

struct PowerLawParams {
  double beta;
  double alpha;
  double l_inf;

  PowerLawParams(double beta, double alpha, double l_inf);
  friend bool operator==(const PowerLawParams&, const PowerLawParams&) = default;
};

struct BivariateLawParams {
  double beta;
  double alpha_enc;
  double alpha_dec;
  double l_inf;

  BivariateLawParams(double beta, double alpha_enc, double alpha_dec, double l_inf);
  friend bool operator==(const BivariateLawParams&, const BivariateLawParams&) = default;
};

// Per-task law with exponent and asymptote shared across weightings and one
// multiplicative factor per observed weighting.
struct JointLaw {
  TaskId task;
  double alpha;
  double l_inf;
  std::map<WeightKey, double> betas;
  MetricDirection direction = MetricDirection::loss_like;

  JointLaw(TaskId task, double alpha, double l_inf, std::map<WeightKey, double> betas,
           MetricDirection direction = MetricDirection::loss_like);

  double beta_at(double p) const;
  bool has_baseline() const { return betas.contains(kFullWeight); }
  // The p = 1 law this joint law implies.
  PowerLawParams single_task() const;

  friend bool operator==(const JointLaw&, const JointLaw&) = default;
};

enum class FractionForm { flexible, linear };

std::string_view to_string(FractionForm f) noexcept;
FractionForm parse_fraction_form(std::string_view s);

// flexible: f(p) = p + c1 * p^c2 * (1 - p)^c3
// linear:   f(p) = c1 * (p - 1) + 1
struct FractionFit {
  TaskId task;
  FractionForm form;
  double c1;
  double c2 = 0.0;
  double c3 = 0.0;

  static FractionFit flexible(TaskId task, double c1, double c2, double c3);
  static FractionFit linear(TaskId task, double c1);
  static FractionFit identity(TaskId task) { return linear(std::move(task), 1.0); }

  friend bool operator==(const FractionFit&, const FractionFit&) = default;
};

// beta * n^-alpha + l_inf
double eval_power_law(const PowerLawParams& params, ModelSize n);
// l_inf - beta * n^-alpha
double eval_quality_law(const PowerLawParams& params, ModelSize n);
double eval_law(const PowerLawParams& params, ModelSize n, MetricDirection direction);

double eval_bivariate_law(const BivariateLawParams& params, ModelSize n_enc, ModelSize n_dec);

double eval_joint_loss(const JointLaw& law, double p, ModelSize n);

// (beta_1 / beta_p)^(1 / alpha). Not clamped: values above 1 mean synergy.
double effective_fraction(const JointLaw& law, double p);
ModelSize effective_params(const JointLaw& law, double p, ModelSize n);

double eval_fraction_curve(const FractionFit& fit, double p);

// Evaluates the p = 1 law at f(p) * n; works for weightings never observed.
double predict_loss_any_weighting(const PowerLawParams& single_task, const FractionFit& fit,
                                  double p, ModelSize n,
                                  MetricDirection direction = MetricDirection::loss_like);

struct ConsistencyPair {
  double via_joint_law;
  double via_effective_params;
};

// Evaluates the same quantity through the joint law and through the p = 1
// law at N_eff. The two agree up to rounding.
ConsistencyPair neff_consistency_check(const JointLaw& law, double p, ModelSize n);

}  // namespace mixlaw
