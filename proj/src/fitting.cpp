#include "mixlaw/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "mixlaw/least_squares.hpp"
#include "mixlaw/random.hpp"

namespace mixlaw {

std::string_view to_string(ResidualSpace s) noexcept {
  return s == ResidualSpace::raw ? "raw" : "log_shifted";
}

ResidualSpace parse_residual_space(std::string_view s) {
  if (s == "raw") return ResidualSpace::raw;
  if (s == "log_shifted") return ResidualSpace::log_shifted;
  fail(ErrorCode::parse_error, "unknown residual space '" + std::string(s) + "'");
}

void FitConfig::validate() const {
  if (multistart_count <= 0) fail(ErrorCode::invariant_violation, "multistart_count must be positive");
  if (max_iterations <= 0) fail(ErrorCode::invariant_violation, "max_iterations must be positive");
  if (!(convergence_tol > 0.0)) fail(ErrorCode::invariant_violation, "convergence_tol must be positive");
}

namespace {

constexpr double kAlphaLo = 0.05;
constexpr double kAlphaHi = 1.5;

double softplus(double w) { return w > 30.0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w)); }

double inv_softplus(double v) { return v > 30.0 ? v + std::log(-std::expm1(-v)) : std::log(std::expm1(v)); }

double log_uniform(double u, double lo, double hi) {
  return std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)));
}

double geometric_mean(std::span<const double> values) {
  double acc = 0.0;
  for (double v : values) acc += std::log(v);
  return std::exp(acc / static_cast<double>(values.size()));
}

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

LeastSquaresOptions lm_options(const FitConfig& config) {
  return {config.max_iterations, config.convergence_tol};
}

double r_squared_of(std::span<const double> y, std::span<const double> residuals) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double sst = 0.0, sse = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sst += (y[i] - mean) * (y[i] - mean);
    sse += residuals[i] * residuals[i];
    scale += y[i] * y[i];
  }
  if (sst <= 1e-24 * scale) return sse <= 1e-24 * std::max(scale, 1e-300) ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

FitDiagnostics make_diagnostics(std::span<const double> y, std::vector<double> predicted,
                                int n_params, bool converged) {
  FitDiagnostics d;
  d.n_points = static_cast<int>(y.size());
  d.n_params = n_params;
  d.residuals.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    d.residuals[i] = y[i] - predicted[i];
    d.sse += d.residuals[i] * d.residuals[i];
  }
  d.r_squared = r_squared_of(y, d.residuals);
  d.converged = converged && d.n_points >= d.n_params;
  return d;
}

// Least-squares amplitude b for y ~ shift + sign * b * g, floored positive.
double amplitude_guess(std::span<const double> g, std::span<const double> y, double shift, double sign,
                       double scale) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    num += g[i] * sign * (y[i] - shift);
    den += g[i] * g[i];
  }
  const double b = den > 0.0 ? num / den : 0.0;
  const double floor = 1e-3 * std::max(scale, 1e-12);
  return std::isfinite(b) && b > floor ? b : floor;
}

// Shifted-log residual for a single observation; the gap floor keeps it finite
// when the current asymptote crosses the data.
double log_shifted_residual(double y, double l_inf, double log_reducible, double sign, double scale) {
  const double gap = std::max(sign * (y - l_inf), 1e-12 * std::max(scale, 1e-300));
  return std::log(gap) - log_reducible;
}

void require_finite(std::span<const double> y, const char* what) {
  for (double v : y)
    if (!std::isfinite(v)) fail(ErrorCode::invariant_violation, std::string(what) + " must be finite");
}

// Shared layout for single power-law fits: x = [log b, log alpha, softplus^-1(l_inf)],
// prediction = l_inf + sign * b * (n / n_ref)^-alpha.
struct PowerModel {
  std::vector<double> log_n;  // log(n / n_ref)
  std::vector<double> y;
  double n_ref;
  double sign;
  double scale;
  ResidualSpace space;

  double predict(std::span<const double> x, std::size_t i) const {
    return softplus(x[2]) + sign * std::exp(x[0] - std::exp(x[1]) * log_n[i]);
  }

  void residuals(std::span<const double> x, std::span<double> r) const {
    const double alpha = std::exp(x[1]);
    const double l_inf = softplus(x[2]);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double log_red = x[0] - alpha * log_n[i];
      r[i] = space == ResidualSpace::raw ? y[i] - (l_inf + sign * std::exp(log_red))
                                         : log_shifted_residual(y[i], l_inf, log_red, sign, scale);
    }
  }
};

std::vector<std::vector<double>> power_starts(const PowerModel& model, const FitConfig& config) {
  const auto [ymin_it, ymax_it] = std::minmax_element(model.y.begin(), model.y.end());
  const double ymin = *ymin_it, ymax = *ymax_it;
  const double range = ymax - ymin + 1e-9 * model.scale;
  auto grid = seeded_halton(static_cast<std::size_t>(config.multistart_count), 2, config.seed);
  std::vector<std::vector<double>> starts;
  std::vector<double> g(model.y.size());
  for (const auto& u : grid) {
    const double alpha = log_uniform(u[0], kAlphaLo, kAlphaHi);
    double l_inf = model.sign > 0 ? u[1] * ymin : ymax + (0.01 + 2.0 * u[1]) * range;
    l_inf = std::max(l_inf, 1e-9 * model.scale + 1e-12);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(-alpha * model.log_n[i]);
    const double b = amplitude_guess(g, model.y, l_inf, model.sign, model.scale);
    starts.push_back({std::log(b), std::log(alpha), inv_softplus(l_inf)});
  }
  return starts;
}

std::size_t distinct_count(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

PowerLawFit fit_power_law(std::span<const SizePoint> points, MetricDirection direction,
                          const FitConfig& config) {
  config.validate();
  std::vector<double> n(points.size()), y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    n[i] = points[i].n;
    y[i] = points[i].y;
    if (!(std::isfinite(n[i]) && n[i] > 0.0)) fail(ErrorCode::invariant_violation, "model size must be positive");
  }
  require_finite(y, "metric values");
  if (distinct_count(n) < 3)
    fail(ErrorCode::insufficient_data, "power-law fit needs at least 3 distinct model sizes, got " +
                                           std::to_string(distinct_count(n)));
  if (direction == MetricDirection::loss_like)
    for (double v : y)
      if (!(v > 0.0)) fail(ErrorCode::invariant_violation, "loss-like values must be positive");

  PowerModel model;
  model.n_ref = geometric_mean(n);
  model.log_n.resize(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) model.log_n[i] = std::log(n[i] / model.n_ref);
  model.y = y;
  model.sign = direction == MetricDirection::loss_like ? 1.0 : -1.0;
  model.scale = max_abs(y);
  model.space = config.residual_space;

  auto fn = [&model](std::span<const double> x, std::span<double> r) { model.residuals(x, r); };
  auto result = multistart(fn, y.size(), power_starts(model, config), lm_options(config));
  const auto& x = result.best.x;

  const double alpha = std::exp(x[1]);
  PowerLawParams params(std::exp(x[0] + alpha * std::log(model.n_ref)), alpha, softplus(x[2]));
  std::vector<double> predicted(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) predicted[i] = model.predict(x, i);
  return {params, make_diagnostics(y, std::move(predicted), 3, result.best.converged)};
}

BivariateFit fit_bivariate_law(std::span<const BivariatePoint> points, const FitConfig& config) {
  config.validate();
  if (points.size() < 4)
    fail(ErrorCode::insufficient_data, "bivariate fit needs at least 4 points, got " + std::to_string(points.size()));
  std::vector<double> ne(points.size()), nd(points.size()), y(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    ne[i] = points[i].n_enc;
    nd[i] = points[i].n_dec;
    y[i] = points[i].y;
    if (!(ne[i] > 0.0 && nd[i] > 0.0 && std::isfinite(ne[i]) && std::isfinite(nd[i])))
      fail(ErrorCode::invariant_violation, "encoder/decoder sizes must be positive");
    if (!(y[i] > 0.0 && std::isfinite(y[i]))) fail(ErrorCode::invariant_violation, "loss values must be positive");
  }
  if (distinct_count(ne) < 2)
    fail(ErrorCode::rank_deficiency, "all points share the encoder size; alpha_enc is unidentifiable");
  if (distinct_count(nd) < 2)
    fail(ErrorCode::rank_deficiency, "all points share the decoder size; alpha_dec is unidentifiable");

  const double ref_e = geometric_mean(ne), ref_d = geometric_mean(nd);
  std::vector<double> le(ne.size()), ld(nd.size());
  for (std::size_t i = 0; i < ne.size(); ++i) {
    le[i] = std::log(ne[i] / ref_e);
    ld[i] = std::log(nd[i] / ref_d);
  }
  const double scale = max_abs(y);
  const bool raw = config.residual_space == ResidualSpace::raw;

  // x = [log b, log alpha_e, log alpha_d, softplus^-1(l_inf)]
  auto fn = [&](std::span<const double> x, std::span<double> r) {
    const double ae = std::exp(x[1]), ad = std::exp(x[2]), l_inf = softplus(x[3]);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double log_red = x[0] - ae * le[i] - ad * ld[i];
      r[i] = raw ? y[i] - (l_inf + std::exp(log_red)) : log_shifted_residual(y[i], l_inf, log_red, 1.0, scale);
    }
  };

  const double ymin = *std::min_element(y.begin(), y.end());
  auto grid = seeded_halton(static_cast<std::size_t>(config.multistart_count), 3, config.seed);
  std::vector<std::vector<double>> starts;
  std::vector<double> g(y.size());
  for (const auto& u : grid) {
    const double ae = log_uniform(u[0], kAlphaLo, kAlphaHi);
    const double ad = log_uniform(u[1], kAlphaLo, kAlphaHi);
    const double l_inf = std::max(u[2] * ymin, 1e-9 * scale + 1e-12);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(-ae * le[i] - ad * ld[i]);
    const double b = amplitude_guess(g, y, l_inf, 1.0, scale);
    starts.push_back({std::log(b), std::log(ae), std::log(ad), inv_softplus(l_inf)});
  }
  auto result = multistart(fn, y.size(), starts, lm_options(config));
  const auto& x = result.best.x;
  const double ae = std::exp(x[1]), ad = std::exp(x[2]);
  BivariateLawParams params(std::exp(x[0] + ae * std::log(ref_e) + ad * std::log(ref_d)), ae, ad,
                            softplus(x[3]));
  std::vector<double> predicted(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    predicted[i] = softplus(x[3]) + std::exp(x[0] - ae * le[i] - ad * ld[i]);
  return {params, make_diagnostics(y, std::move(predicted), 4, result.best.converged)};
}

JointFit fit_joint_law(const TaskId& task, std::span<const WeightedPoint> points,
                       MetricDirection direction, const FitConfig& config) {
  config.validate();
  std::map<WeightKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    if (!(std::isfinite(pt.n) && pt.n > 0.0)) fail(ErrorCode::invariant_violation, "model size must be positive");
    if (!std::isfinite(pt.y)) fail(ErrorCode::invariant_violation, "metric values must be finite");
    if (direction == MetricDirection::loss_like && !(pt.y > 0.0))
      fail(ErrorCode::invariant_violation, "loss-like values must be positive");
    const auto key = WeightKey::from_weight(pt.p);
    if (key.micros() == 0) fail(ErrorCode::zero_shot, "zero-shot points (p=0) cannot be fitted");
    groups[key].push_back(i);
  }
  if (groups.size() < 2)
    fail(ErrorCode::insufficient_data, "joint fit needs at least 2 distinct weightings, got " +
                                           std::to_string(groups.size()));
  for (const auto& [key, idx] : groups) {
    std::vector<double> sizes;
    for (auto i : idx) sizes.push_back(points[i].n);
    if (distinct_count(sizes) < 2)
      fail(ErrorCode::degenerate_weighting,
           "weighting " + key.to_string() + " has a single model size; its beta is unidentifiable");
  }
  const std::size_t k = groups.size();
  if (points.size() < k + 2)
    fail(ErrorCode::insufficient_data, "joint fit needs at least #weightings + 2 points");

  std::vector<double> n(points.size()), y(points.size());
  std::vector<std::size_t> group_of(points.size());
  std::vector<WeightKey> keys;
  for (const auto& [key, idx] : groups) {
    for (auto i : idx) group_of[i] = keys.size();
    keys.push_back(key);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    n[i] = points[i].n;
    y[i] = points[i].y;
  }
  const double n_ref = geometric_mean(n);
  std::vector<double> log_n(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) log_n[i] = std::log(n[i] / n_ref);
  const double sign = direction == MetricDirection::loss_like ? 1.0 : -1.0;
  const double scale = max_abs(y);
  const bool raw = config.residual_space == ResidualSpace::raw;

  // x = [log alpha, softplus^-1(l_inf), log b_1 .. log b_k]
  auto predict = [&](std::span<const double> x, std::size_t i) {
    return softplus(x[1]) + sign * std::exp(x[2 + group_of[i]] - std::exp(x[0]) * log_n[i]);
  };
  auto fn = [&](std::span<const double> x, std::span<double> r) {
    const double alpha = std::exp(x[0]), l_inf = softplus(x[1]);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double log_red = x[2 + group_of[i]] - alpha * log_n[i];
      r[i] = raw ? y[i] - (l_inf + sign * std::exp(log_red)) : log_shifted_residual(y[i], l_inf, log_red, sign, scale);
    }
  };

  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double range = *ymax_it - *ymin_it + 1e-9 * scale;
  auto grid = seeded_halton(static_cast<std::size_t>(config.multistart_count), 2, config.seed);
  std::vector<std::vector<double>> starts;
  for (const auto& u : grid) {
    const double alpha = log_uniform(u[0], kAlphaLo, kAlphaHi);
    double l_inf = sign > 0 ? u[1] * *ymin_it : *ymax_it + (0.01 + 2.0 * u[1]) * range;
    l_inf = std::max(l_inf, 1e-9 * scale + 1e-12);
    std::vector<double> x{std::log(alpha), inv_softplus(l_inf)};
    for (const auto& key : keys) {
      const auto& idx = groups.at(key);
      std::vector<double> g, yy;
      for (auto i : idx) {
        g.push_back(std::exp(-alpha * log_n[i]));
        yy.push_back(y[i]);
      }
      x.push_back(std::log(amplitude_guess(g, yy, l_inf, sign, scale)));
    }
    starts.push_back(std::move(x));
  }

  auto result = multistart(fn, y.size(), starts, lm_options(config));
  const auto& x = result.best.x;
  const double alpha = std::exp(x[0]);
  std::map<WeightKey, double> betas;
  for (std::size_t g = 0; g < k; ++g) betas[keys[g]] = std::exp(x[2 + g] + alpha * std::log(n_ref));
  JointLaw law(task, alpha, softplus(x[1]), std::move(betas), direction);

  std::vector<double> predicted(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) predicted[i] = predict(x, i);
  auto diag = make_diagnostics(y, predicted, static_cast<int>(k + 2), result.best.converged);
  for (const auto& key : keys) {
    std::vector<double> yy, rr;
    for (auto i : groups.at(key)) {
      yy.push_back(y[i]);
      rr.push_back(diag.residuals[i]);
    }
    diag.per_weighting_r_squared.emplace_back(key, r_squared_of(yy, rr));
  }
  return {std::move(law), std::move(diag)};
}

std::map<WeightKey, PowerLawFit> fit_per_weighting(std::span<const WeightedPoint> points,
                                                   MetricDirection direction, const FitConfig& config) {
  std::map<WeightKey, std::vector<SizePoint>> groups;
  for (const auto& pt : points) groups[WeightKey::from_weight(pt.p)].push_back({pt.n, pt.y});
  std::map<WeightKey, PowerLawFit> fits;
  for (const auto& [key, pts] : groups) {
    std::vector<double> sizes;
    for (const auto& sp : pts) sizes.push_back(sp.n);
    if (key.micros() == 0 || distinct_count(sizes) < 3) continue;
    fits.emplace(key, fit_power_law(pts, direction, config));
  }
  return fits;
}

FractionCurveFit fit_fraction_curve(const TaskId& task, std::span<const FractionSample> samples,
                                    FractionForm form, const FitConfig& config) {
  config.validate();
  for (const auto& s : samples) {
    if (!(std::isfinite(s.p) && s.p > 0.0 && s.p <= 1.0))
      fail(ErrorCode::domain_error, "fraction samples need p in (0, 1]");
    if (!(std::isfinite(s.f) && s.f > 0.0)) fail(ErrorCode::invariant_violation, "fractions must be positive");
  }
  std::vector<double> p(samples.size()), f(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    p[i] = samples[i].p;
    f[i] = samples[i].f;
  }

  if (form == FractionForm::linear) {
    if (samples.size() < 2)
      fail(ErrorCode::insufficient_data, "linear fraction fit needs at least 2 samples");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      num += (f[i] - 1.0) * (p[i] - 1.0);
      den += (p[i] - 1.0) * (p[i] - 1.0);
    }
    if (!(den > 0.0)) fail(ErrorCode::insufficient_data, "linear fraction fit needs a sample with p < 1");
    auto fit = FractionFit::linear(task, num / den);
    std::vector<double> predicted(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) predicted[i] = eval_fraction_curve(fit, p[i]);
    return {fit, make_diagnostics(f, std::move(predicted), 1, true)};
  }

  if (samples.size() < 4) fail(ErrorCode::insufficient_data, "flexible fraction fit needs at least 4 samples");
  // x = [c1, log c2, log c3]
  auto fn = [&](std::span<const double> x, std::span<double> r) {
    const double c2 = std::exp(x[1]), c3 = std::exp(x[2]);
    for (std::size_t i = 0; i < p.size(); ++i)
      r[i] = f[i] - (p[i] + x[0] * std::pow(p[i], c2) * std::pow(1.0 - p[i], c3));
  };
  auto grid = seeded_halton(static_cast<std::size_t>(config.multistart_count), 2, config.seed);
  std::vector<std::vector<double>> starts;
  for (const auto& u : grid) {
    const double c2 = log_uniform(u[0], 0.1, 5.0), c3 = log_uniform(u[1], 0.1, 5.0);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = std::pow(p[i], c2) * std::pow(1.0 - p[i], c3);
      num += g * (f[i] - p[i]);
      den += g * g;
    }
    starts.push_back({den > 0.0 ? num / den : 0.0, std::log(c2), std::log(c3)});
  }
  auto result = multistart(fn, p.size(), starts, lm_options(config));
  const auto& x = result.best.x;
  auto fit = FractionFit::flexible(task, x[0], std::exp(x[1]), std::exp(x[2]));
  std::vector<double> predicted(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) predicted[i] = eval_fraction_curve(fit, p[i]);
  return {fit, make_diagnostics(f, std::move(predicted), 3, result.best.converged)};
}

CorrectionResult convergence_correct(std::span<const CurvePoint> curve, std::int64_t target_step,
                                     const FitConfig& config, MetricDirection direction) {
  if (curve.size() < 4)
    fail(ErrorCode::insufficient_data, "convergence correction needs at least 4 curve points");
  std::int64_t lo = curve.front().step, hi = curve.front().step;
  std::vector<SizePoint> pts;
  for (const auto& c : curve) {
    if (c.step <= 0) fail(ErrorCode::invariant_violation, "training steps must be positive");
    lo = std::min(lo, c.step);
    hi = std::max(hi, c.step);
    pts.push_back({static_cast<double>(c.step), c.y});
  }
  if (hi < 10 * lo) fail(ErrorCode::insufficient_data, "curve must span at least one decade of steps");
  if (target_step < hi)
    fail(ErrorCode::domain_error, "target step " + std::to_string(target_step) +
                                      " precedes the last observed step " + std::to_string(hi));
  auto fit = fit_power_law(pts, direction, config);
  const double value = eval_law(fit.params, ModelSize(static_cast<double>(target_step)), direction);
  return {value, fit.params, std::move(fit.diagnostics), target_step > 10 * hi};
}

UncertaintyReport bootstrap_uncertainty(std::span<const double> y, const Refit& refit,
                                        const BootstrapOptions& options) {
  if (options.replicates < 2) fail(ErrorCode::invariant_violation, "bootstrap needs at least 2 replicates");
  if (!(std::isfinite(options.sigma_fraction) && options.sigma_fraction >= 0.0))
    fail(ErrorCode::invariant_violation, "sigma_fraction must be non-negative");

  std::vector<std::optional<NamedCoefficients>> results(static_cast<std::size_t>(options.replicates));
  std::vector<double> perturbed(y.size());
  for (std::size_t r = 0; r < results.size(); ++r) {
    auto rng = make_rng(options.seed, {r});
    std::normal_distribution<double> z(0.0, 1.0);
    for (std::size_t i = 0; i < y.size(); ++i)
      perturbed[i] = options.sigma_fraction == 0.0 ? y[i] : y[i] + options.sigma_fraction * std::abs(y[i]) * z(rng);
    try {
      results[r] = refit(perturbed);
    } catch (const Error&) {
      // counted below
    }
  }

  UncertaintyReport report;
  report.sigma_fraction = options.sigma_fraction;
  const NamedCoefficients* reference = nullptr;
  std::vector<const NamedCoefficients*> good;
  for (const auto& res : results) {
    if (!res) continue;
    if (!reference) reference = &*res;
    bool same = res->size() == reference->size();
    for (std::size_t j = 0; same && j < res->size(); ++j) same = (*res)[j].first == (*reference)[j].first;
    if (same) good.push_back(&*res);
  }
  report.replicate_count = static_cast<int>(good.size());
  report.failed_replicates = options.replicates - report.replicate_count;
  if (good.size() < 2 || 5 * good.size() < 4 * results.size())
    fail(ErrorCode::fit_failure, "bootstrap: only " + std::to_string(good.size()) + " of " +
                                     std::to_string(results.size()) + " replicates succeeded");

  for (std::size_t j = 0; j < reference->size(); ++j) {
    // Welford: identical replicates give exactly zero.
    double mean = 0.0, m2 = 0.0;
    int count = 0;
    for (const auto* res : good) {
      const double v = (*res)[j].second;
      ++count;
      const double delta = v - mean;
      mean += delta / count;
      m2 += delta * (v - mean);
    }
    report.std_devs[(*reference)[j].first] = std::sqrt(m2 / (count - 1));
  }
  return report;
}

std::string beta_name(WeightKey key) { return "beta@" + key.to_string(); }
std::string fraction_name(WeightKey key) { return "f@" + key.to_string(); }

NamedCoefficients coefficients(const PowerLawParams& params) {
  return {{"alpha", params.alpha}, {"beta", params.beta}, {"l_inf", params.l_inf}};
}

NamedCoefficients coefficients(const JointLaw& law) {
  NamedCoefficients out{{"alpha", law.alpha}, {"l_inf", law.l_inf}};
  for (const auto& [key, beta] : law.betas) out.emplace_back(beta_name(key), beta);
  if (law.has_baseline())
    for (const auto& [key, beta] : law.betas) out.emplace_back(fraction_name(key), effective_fraction(law, key.value()));
  return out;
}

UncertaintyReport bootstrap_power_law(std::span<const SizePoint> points, MetricDirection direction,
                                      const FitConfig& config, const BootstrapOptions& options) {
  std::vector<double> y;
  for (const auto& p : points) y.push_back(p.y);
  std::vector<SizePoint> work(points.begin(), points.end());
  return bootstrap_uncertainty(
      y,
      [&](std::span<const double> yy) {
        for (std::size_t i = 0; i < work.size(); ++i) work[i].y = yy[i];
        return coefficients(fit_power_law(work, direction, config).params);
      },
      options);
}

UncertaintyReport bootstrap_joint_law(const TaskId& task, std::span<const WeightedPoint> points,
                                      MetricDirection direction, const FitConfig& config,
                                      const BootstrapOptions& options) {
  std::vector<double> y;
  for (const auto& p : points) y.push_back(p.y);
  std::vector<WeightedPoint> work(points.begin(), points.end());
  return bootstrap_uncertainty(
      y,
      [&](std::span<const double> yy) {
        for (std::size_t i = 0; i < work.size(); ++i) work[i].y = yy[i];
        return coefficients(fit_joint_law(task, work, direction, config).law);
      },
      options);
}

}  // namespace mixlaw
