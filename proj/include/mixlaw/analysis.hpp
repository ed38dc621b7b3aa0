#pragma once

// End-to-end pipelines over experiment records: fit every law for a set of
// tasks into a LawBundle, then query it for trade-off frontiers, effective
// capacity, multi-task predictions and metric/loss correlation.

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mixlaw/bundle.hpp"
#include "mixlaw/dataio.hpp"
#include "mixlaw/fitting.hpp"

namespace mixlaw {

struct AnalysisConfig {
  FitConfig fit;
  MetricDirection direction = MetricDirection::loss_like;
  int bootstrap_replicates = 32;  // 0 skips the bootstrap
  double bootstrap_sigma = 0.01;
  CorrectionPolicy correction;    // its FitConfig is replaced by `fit`
};

// Tasks are fitted independently (in parallel) and stored in the given order.
// Errors keep their code and gain a "task '<name>': " prefix.
LawBundle analyze(const std::vector<RunRecord>& records, const std::vector<std::string>& tasks,
                  const std::string& testset, const std::string& metric, const AnalysisConfig& config);

// 37 points, 0.05 to 0.95 in steps of 0.025.
std::vector<double> default_frontier_grid();

struct FrontierPoint {
  double p;       // first task's weight; the second task gets 1 - p
  double first;   // predicted metric of the first task
  double second;  // predicted metric of the second task
};

struct FrontierCurve {
  double n;
  std::string first_task;
  std::string second_task;
  FractionForm form;
  std::vector<FrontierPoint> points;
};

// Without an explicit pair the bundle must hold exactly two tasks. Without a
// form, flexible is used when both tasks have it, otherwise linear.
FrontierCurve predict_frontier(const LawBundle& bundle, double n,
                               const std::vector<double>& grid = default_frontier_grid(),
                               std::optional<FractionForm> form = std::nullopt,
                               std::optional<std::pair<std::string, std::string>> tasks = std::nullopt);

struct CapacityRow {
  std::string task;
  double p;
  double f;
  double n_eff;
  double gain;  // f / p
};

// One row per (task, observed weighting), from the observed fractions.
std::vector<CapacityRow> capacity_report(const LawBundle& bundle, double reference_n);

struct CorrelationResult {
  std::vector<std::pair<double, double>> pairs;  // (loss, quality)
  double pearson;    // NaN when degenerate
  double slope;      // quality = slope * loss + intercept
  double intercept;
  std::vector<double> residuals;
  bool degenerate;   // one of the two variables is constant
};

// Needs at least three pairs (insufficient_data).
CorrelationResult correlate(std::vector<std::pair<double, double>> pairs);

// Pairs a run's loss and quality evals of `task` taken at the same step.
CorrelationResult metric_loss_correlation(const std::vector<RunRecord>& records, const std::string& task,
                                          const std::string& loss_metric, const std::string& quality_metric,
                                          const std::string& testset);

struct TaskPrediction {
  std::string task;
  double p;
  double f;
  double n_eff;
  double value;
};

struct MultitaskPrediction {
  std::vector<TaskPrediction> tasks;  // mixture order (sorted by name)
  std::string assumption;
};

// Each task uses its own weight and the fraction curve from the first bundle
// that contains it; interactions with the other tasks enter only through
// that pairwise curve.
MultitaskPrediction predict_multitask(const std::vector<LawBundle>& bundles, const WeightVector& mixture, double n,
                                      std::optional<FractionForm> form = std::nullopt);

// ---- report output ----

// Human-readable fit summary (4 significant digits).
std::string summary_table(const LawBundle& bundle);

std::string frontier_csv(const FrontierCurve& curve);
nlohmann::json frontier_json(const FrontierCurve& curve);
std::string capacity_csv(const std::vector<CapacityRow>& rows);
// alpha, l_inf, every beta and f with bootstrap std devs, one row per value.
std::string coefficients_csv(const LawBundle& bundle);
std::string correlation_csv(const CorrelationResult& result);

// Plot data: arrays of {"x", "y", "series"}.
nlohmann::json scaling_plot(const LawBundle& bundle, int curve_points = 50);
nlohmann::json fraction_plot(const LawBundle& bundle, int curve_points = 50);
nlohmann::json frontier_plot(const FrontierCurve& curve);
nlohmann::json correlation_plot(const CorrelationResult& result);

// Writes coefficients.csv, capacity.csv, frontier.csv and the scaling,
// fraction and frontier plot files into `dir`. The frontier is drawn at
// frontier_n (defaults to the largest observed size) when the bundle has
// exactly two tasks with fraction fits.
std::vector<std::filesystem::path> write_report(const LawBundle& bundle, const std::filesystem::path& dir,
                                                double reference_n, std::optional<double> frontier_n = std::nullopt);

}  // namespace mixlaw
