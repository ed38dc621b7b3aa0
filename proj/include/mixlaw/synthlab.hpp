#pragma once

// Synthetic experiment generator. Ground-truth laws produce RunRecords (and
// training curves) with optional seeded multiplicative noise, so every fitting
// path can be checked against known parameters.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixlaw/dataio.hpp"
#include "mixlaw/fitting.hpp"
#include "mixlaw/lawcore.hpp"

namespace mixlaw {

// Truth for one task. beta at weighting p comes from either a table keyed by
// p or from beta_1 * f(p)^-alpha with f a fraction curve.
class TaskTruth {
 public:
  static TaskTruth tabulated(TaskId task, double alpha, double l_inf, std::map<WeightKey, double> betas,
                             MetricDirection direction = MetricDirection::loss_like);
  static TaskTruth from_fraction(TaskId task, double alpha, double l_inf, double beta_full, FractionFit fraction,
                                 MetricDirection direction = MetricDirection::loss_like);

  const TaskId& task() const { return task_; }
  double alpha() const { return alpha_; }
  double l_inf() const { return l_inf_; }
  MetricDirection direction() const { return direction_; }
  const std::optional<FractionFit>& fraction() const { return fraction_; }

  // Throws coverage for an untabulated p, zero_shot for p = 0.
  double beta_at(double p) const;
  // Noise-free metric for a model of size n trained with own weight p.
  double value(double p, double n) const;
  PowerLawParams single_task() const;

 private:
  TaskTruth(TaskId task, double alpha, double l_inf, MetricDirection direction);

  TaskId task_;
  double alpha_;
  double l_inf_;
  MetricDirection direction_;
  std::map<WeightKey, double> betas_;
  double beta_full_ = 0.0;
  std::optional<FractionFit> fraction_;
};

struct GroundTruth {
  std::vector<TaskTruth> tasks;
  double multiplicative_sigma = 0.0;
  std::uint64_t seed = 0;
  std::string testset = "synthetic";
  std::string metric = "ce";

  const TaskTruth& task(const std::string& name) const;  // missing_task
};

// One record per (size, weighting) in size-major order. n_noneb is the size
// rounded to an integer and the law is evaluated at that integer. Every task
// of the truth with a positive weight gets one eval at the final step.
std::vector<RunRecord> generate_dataset(const GroundTruth& truth, const std::vector<double>& sizes,
                                        const std::vector<WeightVector>& weightings);

// Weightings (p, 1 - p) for a pair of tasks.
std::vector<WeightVector> pair_weightings(const std::string& first, const std::string& second,
                                          const std::vector<double>& ps);

// Learning curve y(s) = b * s^-a + c.
struct CurveParams {
  double a;
  double b;
  double c;
};

// Curve whose value at anchor_step equals final_value: c = final_value - b * anchor^-a.
// Throws domain_error when that would make c negative.
CurveParams anchored_curve(double final_value, double a, double b, std::int64_t anchor_step);

std::vector<CurvePoint> generate_training_curve(const CurveParams& params, const std::vector<std::int64_t>& steps,
                                                double multiplicative_sigma = 0.0, std::uint64_t seed = 0);

// n log-spaced sizes from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, int count);

}  // namespace mixlaw
