#include "mixlaw/synthlab.hpp"

#include <cmath>
#include <random>
#include <set>

#include "mixlaw/random.hpp"

namespace mixlaw {

namespace {

constexpr std::int64_t kBatchTokens = 500'000;

std::int64_t training_steps(double n) { return n < 5e8 ? 500'000 : 1'000'000; }

double perturb(double y, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return y;
  std::normal_distribution<double> z(0.0, 1.0);
  return y * (1.0 + sigma * z(rng));
}

void check_truth(double alpha, double l_inf) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorCode::invariant_violation, "truth alpha must be positive");
  if (!(l_inf >= 0.0) || !std::isfinite(l_inf)) fail(ErrorCode::invariant_violation, "truth l_inf must be >= 0");
}

}  // namespace

TaskTruth::TaskTruth(TaskId task, double alpha, double l_inf, MetricDirection direction)
    : task_(std::move(task)), alpha_(alpha), l_inf_(l_inf), direction_(direction) {
  check_truth(alpha, l_inf);
}

TaskTruth TaskTruth::tabulated(TaskId task, double alpha, double l_inf, std::map<WeightKey, double> betas,
                               MetricDirection direction) {
  TaskTruth t(std::move(task), alpha, l_inf, direction);
  if (betas.empty()) fail(ErrorCode::invariant_violation, "tabulated truth needs at least one beta");
  for (const auto& [k, b] : betas) {
    if (k.micros() <= 0 || k.micros() > WeightKey::kScale)
      fail(ErrorCode::invariant_violation, "tabulated weighting " + k.to_string() + " outside (0, 1]");
    if (!(b > 0.0) || !std::isfinite(b)) fail(ErrorCode::invariant_violation, "tabulated betas must be positive");
  }
  t.betas_ = std::move(betas);
  return t;
}

TaskTruth TaskTruth::from_fraction(TaskId task, double alpha, double l_inf, double beta_full, FractionFit fraction,
                                   MetricDirection direction) {
  TaskTruth t(std::move(task), alpha, l_inf, direction);
  if (!(beta_full > 0.0) || !std::isfinite(beta_full))
    fail(ErrorCode::invariant_violation, "truth beta_1 must be positive");
  t.beta_full_ = beta_full;
  t.fraction_ = std::move(fraction);
  return t;
}

double TaskTruth::beta_at(double p) const {
  const auto key = WeightKey::from_weight(p);
  if (key.micros() == 0) fail(ErrorCode::zero_shot, "zero-shot unsupported for task '" + task_.name + "'");
  if (fraction_) {
    const double f = eval_fraction_curve(*fraction_, p);
    if (!(f > 0.0)) fail(ErrorCode::domain_error, "truth fraction curve is not positive at p = " + key.to_string());
    return beta_full_ * std::pow(f, -alpha_);
  }
  auto it = betas_.find(key);
  if (it == betas_.end())
    fail(ErrorCode::coverage, "truth for task '" + task_.name + "' has no beta at p = " + key.to_string());
  return it->second;
}

double TaskTruth::value(double p, double n) const {
  return eval_law(PowerLawParams(beta_at(p), alpha_, l_inf_), ModelSize(n), direction_);
}

PowerLawParams TaskTruth::single_task() const { return {beta_at(1.0), alpha_, l_inf_}; }

const TaskTruth& GroundTruth::task(const std::string& name) const {
  for (const auto& t : tasks)
    if (t.task().name == name) return t;
  fail(ErrorCode::missing_task, "ground truth has no task '" + name + "'");
}

std::vector<RunRecord> generate_dataset(const GroundTruth& truth, const std::vector<double>& sizes,
                                        const std::vector<WeightVector>& weightings) {
  if (!(truth.multiplicative_sigma >= 0.0))
    fail(ErrorCode::invariant_violation, "multiplicative_sigma must be non-negative");
  std::set<std::int64_t> distinct;
  for (double n : sizes) {
    if (!(n >= 1.0) || !std::isfinite(n)) fail(ErrorCode::invariant_violation, "sizes must be at least 1");
    if (!distinct.insert(std::llround(n)).second)
      fail(ErrorCode::invariant_violation, "sizes must be distinct");
  }

  std::vector<RunRecord> records;
  records.reserve(sizes.size() * weightings.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::int64_t n = std::llround(sizes[i]);
    for (std::size_t j = 0; j < weightings.size(); ++j) {
      RunRecord r;
      r.run_id = "syn-n" + std::to_string(n) + "-w" + std::to_string(j);
      r.model.n_noneb = n;
      r.mixture = weightings[j];
      r.training = {training_steps(static_cast<double>(n)), kBatchTokens};
      for (std::size_t k = 0; k < truth.tasks.size(); ++k) {
        const auto& t = truth.tasks[k];
        const double p = weightings[j].weight(t.task().name);
        if (WeightKey::from_weight(p).micros() == 0) continue;
        auto rng = make_rng(truth.seed, {i, j, k});
        const double y = perturb(t.value(p, static_cast<double>(n)), truth.multiplicative_sigma, rng);
        r.evals.push_back({t.task().name, truth.testset, truth.metric, y, r.training.steps});
      }
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<WeightVector> pair_weightings(const std::string& first, const std::string& second,
                                          const std::vector<double>& ps) {
  std::vector<WeightVector> out;
  out.reserve(ps.size());
  for (double p : ps) out.push_back(WeightVector::pair(first, second, p));
  return out;
}

CurveParams anchored_curve(double final_value, double a, double b, std::int64_t anchor_step) {
  if (anchor_step <= 0) fail(ErrorCode::domain_error, "anchor step must be positive");
  const double c = final_value - b * std::pow(static_cast<double>(anchor_step), -a);
  if (!(c >= 0.0)) fail(ErrorCode::domain_error, "final value below the curve's decaying term");
  return {a, b, c};
}

std::vector<CurvePoint> generate_training_curve(const CurveParams& params, const std::vector<std::int64_t>& steps,
                                                double multiplicative_sigma, std::uint64_t seed) {
  if (!(params.a > 0.0) || !(params.b > 0.0) || !(params.c >= 0.0))
    fail(ErrorCode::invariant_violation, "curve needs a > 0, b > 0, c >= 0");
  std::vector<CurvePoint> out;
  out.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] <= 0) fail(ErrorCode::domain_error, "steps must be positive");
    const double y = params.b * std::pow(static_cast<double>(steps[i]), -params.a) + params.c;
    auto rng = make_rng(seed, {i});
    out.push_back({steps[i], perturb(y, multiplicative_sigma, rng)});
  }
  return out;
}

std::vector<double> log_spaced(double lo, double hi, int count) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo)) fail(ErrorCode::domain_error, "log_spaced needs 0 < lo < hi, count >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  const double step = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  out.back() = hi;
  return out;
}

}  // namespace mixlaw
