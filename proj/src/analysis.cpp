#include "mixlaw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "mixlaw/json_io.hpp"

namespace mixlaw {

using nlohmann::json;

namespace {

[[noreturn]] void rethrow_for_task(const std::string& task, const Error& e) {
  fail(e.code(), "task '" + task + "': " + e.what());
}

TaskBundle analyze_task(const std::vector<RunRecord>& records, const std::string& name, const std::string& testset,
                        const std::string& metric, const AnalysisConfig& config) {
  const TaskId task(name);
  CorrectionPolicy policy = config.correction;
  policy.config = config.fit;
  auto observations = build_fit_dataset(records, name, testset, metric, policy);
  if (std::none_of(observations.begin(), observations.end(),
                   [](const DatasetPoint& p) { return WeightKey::from_weight(p.p) == kFullWeight; }))
    fail(ErrorCode::missing_baseline, "no p=1 runs, so effective fractions are undefined");

  const auto points = to_weighted_points(observations);
  auto joint = fit_joint_law(task, points, config.direction, config.fit);

  std::map<WeightKey, double> fractions;
  std::vector<FractionSample> samples;
  for (const auto& [key, beta] : joint.law.betas) {
    const double f = effective_fraction(joint.law, key.value());
    fractions.emplace(key, f);
    samples.push_back({key.value(), f});
  }
  std::vector<FractionCurveFit> fraction_fits;
  if (samples.size() >= 4) fraction_fits.push_back(fit_fraction_curve(task, samples, FractionForm::flexible, config.fit));
  fraction_fits.push_back(fit_fraction_curve(task, samples, FractionForm::linear, config.fit));

  UncertaintyReport uncertainty;
  uncertainty.sigma_fraction = config.bootstrap_sigma;
  if (config.bootstrap_replicates > 0)
    uncertainty = bootstrap_joint_law(task, points, config.direction, config.fit,
                                      {config.bootstrap_sigma, config.bootstrap_replicates, config.fit.seed});

  const PowerLawParams single = joint.law.single_task();
  return TaskBundle{std::move(joint.law),
                    std::move(joint.diagnostics),
                    single,
                    std::move(fractions),
                    std::move(fraction_fits),
                    fit_per_weighting(points, config.direction, config.fit),
                    std::move(uncertainty),
                    std::move(observations)};
}

std::map<std::string, std::string> describe(const AnalysisConfig& c, const std::vector<std::string>& tasks,
                                            const std::string& testset, const std::string& metric) {
  std::string task_list;
  for (const auto& t : tasks) task_list += (task_list.empty() ? "" : ",") + t;
  std::string targets;
  for (const auto& [run, task] : c.correction.targets)
    targets += (targets.empty() ? "" : ";") + run + "/" + task;
  return {
      {"tasks", task_list},
      {"testset", testset},
      {"metric", metric},
      {"direction", std::string(to_string(c.direction))},
      {"residual_space", std::string(to_string(c.fit.residual_space))},
      {"multistart_count", std::to_string(c.fit.multistart_count)},
      {"max_iterations", std::to_string(c.fit.max_iterations)},
      {"convergence_tol", format_number(c.fit.convergence_tol)},
      {"seed", std::to_string(c.fit.seed)},
      {"bootstrap_replicates", std::to_string(c.bootstrap_replicates)},
      {"bootstrap_sigma", format_number(c.bootstrap_sigma)},
      {"correction_targets", targets},
      {"correction_target_step", std::to_string(c.correction.target_step)},
  };
}

const FractionCurveFit& pick_fraction(const TaskBundle& t, FractionForm form) {
  const auto* fit = t.fraction(form);
  if (!fit)
    fail(ErrorCode::missing_fraction_fit,
         "task '" + t.task().name + "' has no " + std::string(to_string(form)) + " fraction fit");
  return *fit;
}

FractionForm default_form(std::initializer_list<const TaskBundle*> tasks) {
  for (const auto* t : tasks)
    if (!t->fraction(FractionForm::flexible)) return FractionForm::linear;
  return FractionForm::flexible;
}

double predict(const LawBundle& b, const TaskBundle& t, FractionForm form, double p, double n) {
  return predict_loss_any_weighting(t.single_task, pick_fraction(t, form).fit, p, ModelSize(n), b.direction);
}

json point(double x, double y, const std::string& series) {
  return {{"x", number_or_null(x)}, {"y", number_or_null(y)}, {"series", series}};
}

std::string csv_row(std::initializer_list<std::string> cells) {
  std::string out;
  for (const auto& c : cells) {
    if (!out.empty()) out += ',';
    out += c;
  }
  return out + '\n';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::io_error, "write to '" + path.string() + "' failed");
}

}  // namespace

LawBundle analyze(const std::vector<RunRecord>& records, const std::vector<std::string>& tasks,
                  const std::string& testset, const std::string& metric, const AnalysisConfig& config) {
  config.fit.validate();
  if (tasks.empty()) fail(ErrorCode::invariant_violation, "analyze needs at least one task");
  if (config.bootstrap_replicates < 0 || !(config.bootstrap_sigma >= 0.0))
    fail(ErrorCode::invariant_violation, "bootstrap replicates and sigma must be non-negative");

  std::vector<std::future<TaskBundle>> jobs;
  for (const auto& name : tasks)
    jobs.push_back(std::async(std::launch::async, [&, name] {
      try {
        return analyze_task(records, name, testset, metric, config);
      } catch (const Error& e) {
        rethrow_for_task(name, e);
      }
    }));

  LawBundle bundle;
  bundle.metric = metric;
  bundle.testset = testset;
  bundle.direction = config.direction;
  // Wait for every job before surfacing the first error in task order.
  std::vector<std::exception_ptr> errors;
  for (auto& job : jobs) {
    try {
      bundle.tasks.push_back(job.get());
    } catch (...) {
      errors.push_back(std::current_exception());
    }
  }
  if (!errors.empty()) std::rethrow_exception(errors.front());

  std::ostringstream canonical;
  write_json_lines(canonical, records);
  bundle.provenance.dataset_hash = sha256_hex(canonical.str());
  bundle.provenance.config = describe(config, tasks, testset, metric);
  bundle.validate();
  return bundle;
}

std::vector<double> default_frontier_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 36; ++i) grid.push_back((2 + i) / 40.0);  // 0.05 + i * 0.025
  return grid;
}

FrontierCurve predict_frontier(const LawBundle& bundle, double n, const std::vector<double>& grid,
                               std::optional<FractionForm> form,
                               std::optional<std::pair<std::string, std::string>> tasks) {
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorCode::domain_error, "model size must be positive");
  if (grid.empty()) fail(ErrorCode::domain_error, "frontier grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] < 1.0)) fail(ErrorCode::domain_error, "frontier grid must lie inside (0, 1)");
    if (i > 0 && !(grid[i] > grid[i - 1])) fail(ErrorCode::domain_error, "frontier grid must be strictly increasing");
  }
  if (!tasks) {
    if (bundle.tasks.size() != 2)
      fail(ErrorCode::invariant_violation, "bundle holds " + std::to_string(bundle.tasks.size()) +
                                               " tasks; name the two frontier tasks explicitly");
    tasks = {bundle.tasks[0].task().name, bundle.tasks[1].task().name};
  }
  const auto& first = bundle.task(tasks->first);
  const auto& second = bundle.task(tasks->second);
  const FractionForm chosen = form.value_or(default_form({&first, &second}));

  FrontierCurve curve{n, tasks->first, tasks->second, chosen, {}};
  for (double p : grid)
    curve.points.push_back({p, predict(bundle, first, chosen, p, n), predict(bundle, second, chosen, 1.0 - p, n)});
  return curve;
}

std::vector<CapacityRow> capacity_report(const LawBundle& bundle, double reference_n) {
  const ModelSize n(reference_n);
  std::vector<CapacityRow> rows;
  for (const auto& t : bundle.tasks)
    for (const auto& [key, f] : t.effective_fractions) {
      const double p = key.value();
      rows.push_back({t.task().name, p, f, f * n.value(), f / p});
    }
  return rows;
}

CorrelationResult correlate(std::vector<std::pair<double, double>> pairs) {
  if (pairs.size() < 3)
    fail(ErrorCode::insufficient_data, "correlation needs at least 3 pairs, got " + std::to_string(pairs.size()));
  const double m = static_cast<double>(pairs.size());
  double mx = 0.0;
  double my = 0.0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : pairs) {
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
    sxy += (x - mx) * (y - my);
  }
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  CorrelationResult r{std::move(pairs), nan, nan, nan, {}, false};
  if (sxx == 0.0) {
    r.degenerate = true;  // constant loss: no line through the data
  } else {
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    if (syy == 0.0) {
      r.degenerate = true;
      r.slope = 0.0;
      r.intercept = my;
    } else {
      r.pearson = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    }
  }
  for (const auto& [x, y] : r.pairs)
    r.residuals.push_back(std::isnan(r.slope) ? y - my : y - (r.slope * x + r.intercept));
  return r;
}

CorrelationResult metric_loss_correlation(const std::vector<RunRecord>& records, const std::string& task,
                                          const std::string& loss_metric, const std::string& quality_metric,
                                          const std::string& testset) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& r : records) {
    std::map<std::int64_t, double> loss;
    for (const auto& e : r.evals)
      if (e.task == task && e.testset == testset && e.metric == loss_metric) loss[e.at_step] = e.value;
    for (const auto& e : r.evals)
      if (e.task == task && e.testset == testset && e.metric == quality_metric)
        if (auto it = loss.find(e.at_step); it != loss.end()) pairs.emplace_back(it->second, e.value);
  }
  return correlate(std::move(pairs));
}

MultitaskPrediction predict_multitask(const std::vector<LawBundle>& bundles, const WeightVector& mixture, double n,
                                      std::optional<FractionForm> form) {
  const ModelSize size(n);
  if (mixture.entries().size() < 2)
    fail(ErrorCode::invariant_violation, "multi-task prediction needs a mixture over at least two tasks");
  MultitaskPrediction out;
  out.assumption =
      "each task's effective fraction depends only on its own mixture weight; pairwise fraction curves are reused "
      "unchanged";
  for (const auto& [name, p] : mixture.entries()) {
    const LawBundle* owner = nullptr;
    for (const auto& b : bundles)
      if (b.has_task(name)) {
        owner = &b;
        break;
      }
    if (!owner) fail(ErrorCode::missing_task, "no bundle contains task '" + name + "'");
    if (WeightKey::from_weight(p).micros() == 0)
      fail(ErrorCode::zero_shot, "zero-shot unsupported: task '" + name + "' has weight 0");
    const auto& t = owner->task(name);
    const auto& fit = pick_fraction(t, form.value_or(default_form({&t})));
    const double f = eval_fraction_curve(fit.fit, p);
    out.tasks.push_back(
        {name, p, f, f * size.value(), predict_loss_any_weighting(t.single_task, fit.fit, p, size, owner->direction)});
  }
  return out;
}

// ---- report output ----

std::string summary_table(const LawBundle& bundle) {
  std::ostringstream out;
  out << "metric " << bundle.metric << " on " << bundle.testset << " (" << to_string(bundle.direction) << ")\n";
  for (const auto& t : bundle.tasks) {
    out << "\ntask " << t.task().name << "  (R^2 " << format_short(t.joint_diagnostics.r_squared) << ", "
        << t.joint_diagnostics.n_points << " points, " << t.joint_diagnostics.n_params << " parameters)\n";
    out << "  " << std::left << std::setw(18) << "coefficient" << std::setw(14) << "value"
        << "std dev\n";
    for (const auto& [name, value] : coefficients(t.joint)) {
      auto sd = t.uncertainty.std_devs.find(name);
      out << "  " << std::setw(18) << name << std::setw(14) << format_short(value)
          << (sd == t.uncertainty.std_devs.end() ? std::string("-") : format_short(sd->second)) << '\n';
    }
    for (const auto& f : t.fraction_fits) {
      out << "  fraction fit (" << to_string(f.fit.form) << "): c1 " << format_short(f.fit.c1);
      if (f.fit.form == FractionForm::flexible)
        out << ", c2 " << format_short(f.fit.c2) << ", c3 " << format_short(f.fit.c3);
      out << "  (R^2 " << format_short(f.diagnostics.r_squared) << ")\n";
    }
  }
  return out.str();
}

std::string frontier_csv(const FrontierCurve& curve) {
  std::string out = csv_row({"n", "p", curve.first_task, curve.second_task});
  for (const auto& pt : curve.points)
    out += csv_row({format_number(curve.n), format_number(pt.p), format_number(pt.first), format_number(pt.second)});
  return out;
}

json frontier_json(const FrontierCurve& curve) {
  json points = json::array();
  for (const auto& pt : curve.points)
    points.push_back({{"p", pt.p}, {"first", number_or_null(pt.first)}, {"second", number_or_null(pt.second)}});
  return {{"n", curve.n},
          {"first_task", curve.first_task},
          {"second_task", curve.second_task},
          {"form", std::string(to_string(curve.form))},
          {"points", std::move(points)}};
}

std::string capacity_csv(const std::vector<CapacityRow>& rows) {
  std::string out = csv_row({"task", "p", "f", "n_eff", "gain"});
  for (const auto& r : rows)
    out += csv_row({r.task, format_number(r.p), format_number(r.f), format_number(r.n_eff), format_number(r.gain)});
  return out;
}

std::string coefficients_csv(const LawBundle& bundle) {
  std::string out = csv_row({"task", "coefficient", "value", "std_dev"});
  for (const auto& t : bundle.tasks)
    for (const auto& [name, value] : coefficients(t.joint)) {
      auto sd = t.uncertainty.std_devs.find(name);
      out += csv_row({t.task().name, name, format_number(value),
                      sd == t.uncertainty.std_devs.end() ? std::string() : format_number(sd->second)});
    }
  return out;
}

std::string correlation_csv(const CorrelationResult& r) {
  std::string out = csv_row({"loss", "quality", "residual"});
  for (std::size_t i = 0; i < r.pairs.size(); ++i)
    out += csv_row({format_number(r.pairs[i].first), format_number(r.pairs[i].second), format_number(r.residuals[i])});
  return out;
}

json scaling_plot(const LawBundle& bundle, int curve_points) {
  json out = json::array();
  for (const auto& t : bundle.tasks) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& o : t.observations) {
      lo = std::min(lo, o.n);
      hi = std::max(hi, o.n);
    }
    for (const auto& [key, beta] : t.joint.betas) {
      const std::string label = t.task().name + " p=" + key.to_string();
      for (const auto& o : t.observations)
        if (WeightKey::from_weight(o.p) == key) out.push_back(point(o.n, o.y, label + " observed"));
      const PowerLawParams joint(beta, t.joint.alpha, t.joint.l_inf);
      auto per = t.per_weighting.find(key);
      for (int i = 0; i < curve_points && hi > lo; ++i) {
        const double n = lo * std::pow(hi / lo, static_cast<double>(i) / (curve_points - 1));
        out.push_back(point(n, eval_law(joint, ModelSize(n), bundle.direction), label + " joint"));
        if (per != t.per_weighting.end())
          out.push_back(point(n, eval_law(per->second.params, ModelSize(n), bundle.direction), label + " per-weighting"));
      }
    }
  }
  return out;
}

json fraction_plot(const LawBundle& bundle, int curve_points) {
  json out = json::array();
  for (const auto& t : bundle.tasks) {
    for (const auto& [key, f] : t.effective_fractions) out.push_back(point(key.value(), f, t.task().name + " observed"));
    for (const auto& fit : t.fraction_fits)
      for (int i = 0; i < curve_points; ++i) {
        const double p = static_cast<double>(i) / (curve_points - 1);
        out.push_back(point(p, eval_fraction_curve(fit.fit, p),
                            t.task().name + " " + std::string(to_string(fit.fit.form))));
      }
    for (int i = 0; i < curve_points; ++i) {
      const double p = static_cast<double>(i) / (curve_points - 1);
      out.push_back(point(p, p, t.task().name + " proportional"));
    }
  }
  return out;
}

json frontier_plot(const FrontierCurve& curve) {
  json out = json::array();
  const std::string label = "frontier n=" + format_number(curve.n);
  for (const auto& pt : curve.points) out.push_back(point(pt.first, pt.second, label));
  return out;
}

json correlation_plot(const CorrelationResult& r) {
  json out = json::array();
  for (const auto& [x, y] : r.pairs) out.push_back(point(x, y, "observed"));
  if (!std::isnan(r.slope))
    for (const auto& [x, y] : r.pairs) out.push_back(point(x, r.slope * x + r.intercept, "linear fit"));
  return out;
}

std::vector<std::filesystem::path> write_report(const LawBundle& bundle, const std::filesystem::path& dir,
                                                double reference_n, std::optional<double> frontier_n) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, const std::string& text) {
    write_text(dir / name, text);
    written.push_back(dir / name);
  };
  emit("coefficients.csv", coefficients_csv(bundle));
  emit("capacity.csv", capacity_csv(capacity_report(bundle, reference_n)));
  emit("scaling_plot.json", canonical_dump(scaling_plot(bundle), 1) + "\n");
  emit("fraction_plot.json", canonical_dump(fraction_plot(bundle), 1) + "\n");

  const bool two_task_frontier =
      bundle.tasks.size() == 2 && !bundle.tasks[0].fraction_fits.empty() && !bundle.tasks[1].fraction_fits.empty();
  if (two_task_frontier) {
    double largest = 0.0;
    for (const auto& t : bundle.tasks)
      for (const auto& o : t.observations) largest = std::max(largest, o.n);
    const auto curve = predict_frontier(bundle, frontier_n.value_or(largest));
    json plot = frontier_plot(curve);
    // Observed trade-offs: runs that report both tasks.
    const auto& a = bundle.tasks[0];
    const auto& b = bundle.tasks[1];
    for (const auto& oa : a.observations)
      for (const auto& ob : b.observations)
        if (oa.run_id == ob.run_id) plot.push_back(point(oa.y, ob.y, "observed n=" + format_number(oa.n)));
    emit("frontier.csv", frontier_csv(curve));
    emit("frontier_plot.json", canonical_dump(plot, 1) + "\n");
  }
  return written;
}

}  // namespace mixlaw
