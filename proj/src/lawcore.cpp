#include "mixlaw/lawcore.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace mixlaw {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invariant_violation: return "invariant_violation";
    case ErrorCode::unknown_weighting: return "unknown_weighting";
    case ErrorCode::missing_baseline: return "missing_baseline";
    case ErrorCode::domain_error: return "domain_error";
    case ErrorCode::zero_shot: return "zero_shot";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::rank_deficiency: return "rank_deficiency";
    case ErrorCode::degenerate_weighting: return "degenerate_weighting";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::missing_metric: return "missing_metric";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::coverage: return "coverage";
    case ErrorCode::missing_task: return "missing_task";
    case ErrorCode::missing_fraction_fit: return "missing_fraction_fit";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::fit_failure: return "fit_failure";
  }
  return "unknown";
}

std::string_view to_string(MetricDirection d) noexcept {
  return d == MetricDirection::loss_like ? "loss_like" : "quality_like";
}

MetricDirection parse_direction(std::string_view s) {
  if (s == "loss_like" || s == "loss") return MetricDirection::loss_like;
  if (s == "quality_like" || s == "quality") return MetricDirection::quality_like;
  fail(ErrorCode::parse_error, "unknown metric direction '" + std::string(s) + "'");
}

std::string_view to_string(FractionForm f) noexcept {
  return f == FractionForm::flexible ? "flexible" : "linear";
}

FractionForm parse_fraction_form(std::string_view s) {
  if (s == "flexible") return FractionForm::flexible;
  if (s == "linear") return FractionForm::linear;
  fail(ErrorCode::parse_error, "unknown fraction form '" + std::string(s) + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::invariant_violation, what);
}

void require_weight(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    fail(ErrorCode::domain_error, "weight " + std::to_string(p) + " outside [0, 1]");
  if (WeightKey::from_weight(p).micros() == 0)
    fail(ErrorCode::zero_shot, "zero-shot unsupported: weight 0 has no scaling law");
}

}  // namespace

TaskId::TaskId(std::string task_name, std::string tag)
    : name(std::move(task_name)), direction_tag(std::move(tag)) {
  require(!name.empty(), "task name must be non-empty");
}

WeightVector::WeightVector(std::map<std::string, double> entries) : entries_(std::move(entries)) {
  require(!entries_.empty(), "mixture must have at least one entry");
  double sum = 0.0;
  for (const auto& [task, w] : entries_) {
    require(!task.empty(), "mixture task name must be non-empty");
    require(std::isfinite(w) && w >= 0.0 && w <= 1.0,
            "mixture weight for '" + task + "' outside [0, 1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", sum);
    fail(ErrorCode::invariant_violation, std::string("mixture weights sum to ") + buf + ", expected 1");
  }
}

WeightVector WeightVector::pair(const std::string& first, const std::string& second, double p) {
  return WeightVector({{first, p}, {second, 1.0 - p}});
}

double WeightVector::weight(const std::string& task) const {
  auto it = entries_.find(task);
  return it == entries_.end() ? 0.0 : it->second;
}

WeightKey WeightKey::from_weight(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    fail(ErrorCode::domain_error, "weight " + std::to_string(p) + " outside [0, 1]");
  return WeightKey(std::llround(p * static_cast<double>(kScale)));
}

WeightKey WeightKey::parse(std::string_view text) {
  double p = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), p);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(ErrorCode::parse_error, "bad weighting key '" + std::string(text) + "'");
  return from_weight(p);
}

std::string WeightKey::to_string() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(micros_ / kScale),
                static_cast<long long>(micros_ % kScale));
  return buf;
}

ModelSize::ModelSize(double n) : n_(n) {
  require(std::isfinite(n) && n > 0.0, "model size must be positive");
}

PowerLawParams::PowerLawParams(double b, double a, double l) : beta(b), alpha(a), l_inf(l) {
  require(std::isfinite(beta) && beta > 0.0, "beta must be positive");
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive");
  require(std::isfinite(l_inf) && l_inf >= 0.0, "l_inf must be non-negative");
}

BivariateLawParams::BivariateLawParams(double b, double ae, double ad, double l)
    : beta(b), alpha_enc(ae), alpha_dec(ad), l_inf(l) {
  require(std::isfinite(beta) && beta > 0.0, "beta must be positive");
  require(std::isfinite(alpha_enc) && alpha_enc > 0.0, "alpha_enc must be positive");
  require(std::isfinite(alpha_dec) && alpha_dec > 0.0, "alpha_dec must be positive");
  require(std::isfinite(l_inf) && l_inf >= 0.0, "l_inf must be non-negative");
}

JointLaw::JointLaw(TaskId t, double a, double l, std::map<WeightKey, double> b, MetricDirection d)
    : task(std::move(t)), alpha(a), l_inf(l), betas(std::move(b)), direction(d) {
  require(std::isfinite(alpha) && alpha > 0.0, "alpha must be positive");
  require(std::isfinite(l_inf), "l_inf must be finite");
  if (direction == MetricDirection::loss_like) require(l_inf >= 0.0, "l_inf must be non-negative");
  for (const auto& [key, beta] : betas) {
    require(key.micros() > 0 && key.micros() <= WeightKey::kScale,
            "weighting key " + key.to_string() + " outside (0, 1]");
    require(std::isfinite(beta) && beta > 0.0, "beta at " + key.to_string() + " must be positive");
  }
}

double JointLaw::beta_at(double p) const {
  require_weight(p);
  auto key = WeightKey::from_weight(p);
  auto it = betas.find(key);
  if (it == betas.end())
    fail(ErrorCode::unknown_weighting, "task '" + task.name + "' has no fitted beta at weighting " +
                                           key.to_string());
  return it->second;
}

PowerLawParams JointLaw::single_task() const {
  auto it = betas.find(kFullWeight);
  if (it == betas.end())
    fail(ErrorCode::missing_baseline, "task '" + task.name + "' has no p=1 beta");
  return PowerLawParams(it->second, alpha, l_inf);
}

FractionFit FractionFit::flexible(TaskId task, double c1, double c2, double c3) {
  require(std::isfinite(c1), "c1 must be finite");
  require(std::isfinite(c2) && c2 > 0.0, "c2 must be positive");
  require(std::isfinite(c3) && c3 > 0.0, "c3 must be positive");
  return FractionFit{std::move(task), FractionForm::flexible, c1, c2, c3};
}

FractionFit FractionFit::linear(TaskId task, double c1) {
  require(std::isfinite(c1), "c1 must be finite");
  return FractionFit{std::move(task), FractionForm::linear, c1, 0.0, 0.0};
}

double eval_power_law(const PowerLawParams& params, ModelSize n) {
  return params.beta * std::pow(n.value(), -params.alpha) + params.l_inf;
}

double eval_quality_law(const PowerLawParams& params, ModelSize n) {
  return params.l_inf - params.beta * std::pow(n.value(), -params.alpha);
}

double eval_law(const PowerLawParams& params, ModelSize n, MetricDirection direction) {
  return direction == MetricDirection::loss_like ? eval_power_law(params, n)
                                                 : eval_quality_law(params, n);
}

double eval_bivariate_law(const BivariateLawParams& params, ModelSize n_enc, ModelSize n_dec) {
  return params.beta * std::pow(n_enc.value(), -params.alpha_enc) *
             std::pow(n_dec.value(), -params.alpha_dec) +
         params.l_inf;
}

double eval_joint_loss(const JointLaw& law, double p, ModelSize n) {
  const double reducible = law.beta_at(p) * std::pow(n.value(), -law.alpha);
  return law.direction == MetricDirection::loss_like ? reducible + law.l_inf
                                                     : law.l_inf - reducible;
}

double effective_fraction(const JointLaw& law, double p) {
  const double beta_p = law.beta_at(p);
  auto it = law.betas.find(kFullWeight);
  if (it == law.betas.end())
    fail(ErrorCode::missing_baseline,
         "task '" + law.task.name + "' has no p=1 beta; effective fraction undefined");
  if (it->second == beta_p) return 1.0;
  return std::pow(it->second / beta_p, 1.0 / law.alpha);
}

ModelSize effective_params(const JointLaw& law, double p, ModelSize n) {
  return ModelSize(effective_fraction(law, p) * n.value());
}

double eval_fraction_curve(const FractionFit& fit, double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0)
    fail(ErrorCode::domain_error, "fraction curve evaluated outside [0, 1]");
  if (fit.form == FractionForm::linear) {
    // Same line as c1 * (p - 1) + 1, arranged so c1 = 1 returns p bit for bit.
    if (p == 1.0) return 1.0;
    return fit.c1 * p + (1.0 - fit.c1);
  }
  return p + fit.c1 * std::pow(p, fit.c2) * std::pow(1.0 - p, fit.c3);
}

double predict_loss_any_weighting(const PowerLawParams& single_task, const FractionFit& fit,
                                  double p, ModelSize n, MetricDirection direction) {
  require_weight(p);
  const double f = eval_fraction_curve(fit, p);
  if (!(f > 0.0))
    fail(ErrorCode::domain_error, "fraction curve for '" + fit.task.name +
                                      "' is non-positive at p=" + std::to_string(p));
  return eval_law(single_task, ModelSize(f * n.value()), direction);
}

ConsistencyPair neff_consistency_check(const JointLaw& law, double p, ModelSize n) {
  const double direct = eval_joint_loss(law, p, n);
  const ModelSize n_eff = effective_params(law, p, n);
  const double reducible = law.betas.at(kFullWeight) * std::pow(n_eff.value(), -law.alpha);
  const double via_neff = law.direction == MetricDirection::loss_like ? reducible + law.l_inf
                                                                      : law.l_inf - reducible;
  return {direct, via_neff};
}

}  // namespace mixlaw
