#include "mixlaw/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "mixlaw/analysis.hpp"
#include "mixlaw/json_io.hpp"
#include "mixlaw/serve.hpp"
#include "mixlaw/synthlab.hpp"

namespace mixlaw {

using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_baseline:
    case ErrorCode::insufficient_data:
    case ErrorCode::rank_deficiency:
    case ErrorCode::degenerate_weighting:
    case ErrorCode::fit_failure:
    case ErrorCode::unknown_weighting:
    case ErrorCode::zero_shot:
    case ErrorCode::missing_fraction_fit:
      return kExitFit;
    default:
      return kExitData;
  }
}

struct UsageError {
  std::string message;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("MIXLAW_SEED");
  if (!env || !*env) return 0;
  std::uint64_t seed = 0;
  std::istringstream in(env);
  if (!(in >> seed) || !in.eof()) throw UsageError{"MIXLAW_SEED must be a non-negative integer, got '" + std::string(env) + "'"};
  return seed;
}

RecordFormat input_format(const std::string& flag, const std::string& path) {
  return flag.empty() ? format_from_path(path) : parse_record_format(flag);
}

// Reads records, printing every ingest error. Empty optional means exit 2.
std::optional<std::vector<RunRecord>> read_records(const std::string& path, const std::string& format,
                                                   std::ostream& err) {
  auto result = ingest_file(path, input_format(format, path));
  for (const auto& e : result.errors)
    err << "error [" << to_string(e.code) << "]" << (e.field.empty() ? "" : " " + e.field) << ": " << e.message
        << '\n';
  if (!result.errors.empty()) return std::nullopt;
  if (result.records.empty()) {
    err << "error [empty_dataset]: empty dataset '" << path << "'\n";
    return std::nullopt;
  }
  return std::move(result.records);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path + "'");
  out << text;
  if (!out) fail(ErrorCode::io_error, "write to '" + path + "' failed");
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// ---- simulate ----

GroundTruth default_truth() {
  GroundTruth g;
  const TaskId de("en-de");
  const TaskId zh("en-zh");
  g.tasks.push_back(TaskTruth::from_fraction(de, 0.3, 1.0, 100.0, FractionFit::flexible(de, 0.5, 0.8, 1.5)));
  g.tasks.push_back(TaskTruth::from_fraction(zh, 0.25, 1.4, 60.0, FractionFit::flexible(zh, 0.3, 1.0, 1.0)));
  return g;
}

GroundTruth read_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open truth file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::parse_error, "truth file: " + std::string(e.what()));
  }
  auto get = [](const json& obj, const char* key) -> const json& {
    auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorCode::parse_error, std::string("truth file lacks '") + key + "'");
    return *it;
  };
  GroundTruth g;
  g.testset = doc.value("testset", g.testset);
  g.metric = doc.value("metric", g.metric);
  const auto direction = parse_direction(doc.value("direction", std::string("loss_like")));
  try {
    for (const auto& t : get(doc, "tasks")) {
      const TaskId task(get(t, "name").get<std::string>());
      const double alpha = get(t, "alpha").get<double>();
      const double l_inf = get(t, "l_inf").get<double>();
      if (t.contains("fraction")) {
        const auto& f = t["fraction"];
        const auto form = parse_fraction_form(f.value("form", std::string("flexible")));
        FractionFit fit = form == FractionForm::flexible
                              ? FractionFit::flexible(task, get(f, "c1").get<double>(), get(f, "c2").get<double>(),
                                                      get(f, "c3").get<double>())
                              : FractionFit::linear(task, get(f, "c1").get<double>());
        g.tasks.push_back(
            TaskTruth::from_fraction(task, alpha, l_inf, get(t, "beta").get<double>(), std::move(fit), direction));
      } else {
        std::map<WeightKey, double> betas;
        for (const auto& [k, b] : get(t, "betas").items()) betas[WeightKey::parse(k)] = b.get<double>();
        g.tasks.push_back(TaskTruth::tabulated(task, alpha, l_inf, std::move(betas), direction));
      }
    }
  } catch (const json::type_error& e) {
    fail(ErrorCode::parse_error, "truth file: " + std::string(e.what()));
  }
  return g;
}

// ---- output helpers ----

json neff_json(const std::string& task, double p, double n, double f, double value) {
  return {{"task", task}, {"p", p}, {"n", n}, {"f", f}, {"n_eff", f * n}, {"gain", f / p}, {"value", value}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scaling laws for multi-task mixtures: fit, predict, report, serve.", "mixlaw"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::optional<std::uint64_t> seed;
  std::string input, format, out_path, bundle_path, testset, metric, direction = "loss_like", task;
  std::vector<std::string> tasks;

  // validate
  auto* validate = app.add_subcommand("validate", "Check an experiment-record file");
  validate->add_option("--input", input, "CSV or JSON-lines records")->required();
  validate->add_option("--format", format, "csv | json_lines (default: by extension)");

  // simulate
  std::string truth_path;
  std::vector<double> sizes, weights;
  double sigma = 0.0;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic records for a pair of tasks");
  simulate->add_option("--truth", truth_path, "ground-truth JSON (default: built-in en-de/en-zh truth)");
  simulate->add_option("--sizes", sizes, "model sizes (default: 8 log-spaced in [2e7, 1e9])")->delimiter(',');
  simulate->add_option("--weights", weights, "first task's weights (default: standard grid)")->delimiter(',');
  simulate->add_option("--sigma", sigma, "multiplicative noise")->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", seed, "noise seed (default: $MIXLAW_SEED or 0)");
  simulate->add_option("--out", out_path, "output records file")->required();
  simulate->add_option("--format", format, "csv | json_lines (default: by extension)");

  // fit
  int bootstrap = 32;
  std::string residual_space = "raw";
  std::vector<std::string> corrections;
  std::int64_t target_step = kDefaultCorrectionTargetStep;
  auto* fit = app.add_subcommand("fit", "Fit joint laws and fraction curves into a bundle");
  fit->add_option("--input", input, "records file")->required();
  fit->add_option("--format", format, "csv | json_lines (default: by extension)");
  fit->add_option("--tasks", tasks, "comma-separated task names")->required()->delimiter(',');
  fit->add_option("--testset", testset)->required();
  fit->add_option("--metric", metric)->required();
  fit->add_option("--direction", direction, "loss_like | quality_like")->capture_default_str();
  fit->add_option("--seed", seed, "fit and bootstrap seed (default: $MIXLAW_SEED or 0)");
  fit->add_option("--bootstrap", bootstrap, "bootstrap replicates, 0 to skip")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit->add_option("--residual-space", residual_space, "raw | log_shifted")->capture_default_str();
  fit->add_option("--correct", corrections, "run_id:task pairs to convergence-correct")->delimiter(',');
  fit->add_option("--target-step", target_step, "convergence-correction target step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit->add_option("--out", out_path, "bundle path")->required();

  // frontier
  double n = 0.0;
  std::vector<double> grid;
  std::string form;
  auto* frontier = app.add_subcommand("frontier", "Predict the two-task trade-off frontier");
  frontier->add_option("--bundle", bundle_path)->required();
  frontier->add_option("--n", n, "model size")->required()->check(CLI::PositiveNumber);
  frontier->add_option("--grid", grid, "first task's weights in (0, 1) (default: 37 points 0.05..0.95)")
      ->delimiter(',');
  frontier->add_option("--form", form, "flexible | linear (default: flexible when available)");
  frontier->add_option("--tasks", tasks, "task pair (default: the bundle's two tasks)")->delimiter(',');
  frontier->add_option("--out", out_path, ".csv or .json file (default: CSV on stdout)");

  // neff
  std::optional<double> p;
  auto* neff = app.add_subcommand("neff", "Effective fraction and parameters");
  neff->add_option("--bundle", bundle_path)->required();
  neff->add_option("--n", n, "model size")->required()->check(CLI::PositiveNumber);
  neff->add_option("--task", task, "task (required with --p)");
  neff->add_option("--p", p, "task weight; without it every observed weighting is tabulated")
      ->check(CLI::Range(0.0, 1.0));
  neff->add_option("--form", form, "flexible | linear (with --p)");

  // correct
  std::string run_id;
  auto* correct = app.add_subcommand("correct", "Extrapolate one run's learning curve to a later step");
  correct->add_option("--input", input, "records file")->required();
  correct->add_option("--format", format);
  correct->add_option("--run", run_id)->required();
  correct->add_option("--task", task)->required();
  correct->add_option("--testset", testset)->required();
  correct->add_option("--metric", metric)->required();
  correct->add_option("--direction", direction)->capture_default_str();
  correct->add_option("--target-step", target_step)->check(CLI::PositiveNumber)->capture_default_str();

  // correlate
  std::string loss_metric, quality_metric, out_dir;
  auto* correlate_cmd = app.add_subcommand("correlate", "Linear relation between a quality metric and the loss");
  correlate_cmd->add_option("--input", input)->required();
  correlate_cmd->add_option("--format", format);
  correlate_cmd->add_option("--task", task)->required();
  correlate_cmd->add_option("--testset", testset)->required();
  correlate_cmd->add_option("--loss-metric", loss_metric)->required();
  correlate_cmd->add_option("--quality-metric", quality_metric)->required();
  correlate_cmd->add_option("--out-dir", out_dir, "write correlation.csv and correlation_plot.json here");

  // report
  std::optional<double> reference_n, frontier_n;
  auto* report = app.add_subcommand("report", "Write CSV tables and plot data for a bundle");
  report->add_option("--bundle", bundle_path)->required();
  report->add_option("--out-dir", out_dir)->required();
  report->add_option("--reference-n", reference_n, "size for N_eff (default: largest observed)")
      ->check(CLI::PositiveNumber);
  report->add_option("--frontier-n", frontier_n, "size for the frontier (default: largest observed)")
      ->check(CLI::PositiveNumber);

  // serve
  int port = 8080;
  std::string host = "127.0.0.1", static_dir;
  auto* serve = app.add_subcommand("serve", "Serve a bundle over HTTP");
  serve->add_option("--bundle", bundle_path)->required();
  serve->add_option("--port", port)->check(CLI::Range(0, 65535))->capture_default_str();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--static-dir", static_dir, "directory of UI assets mounted at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\nrun 'mixlaw --help' for usage\n";
    return kExitUsage;
  }

  auto largest_observed = [](const LawBundle& b) {
    double largest = 0.0;
    for (const auto& t : b.tasks)
      for (const auto& o : t.observations) largest = std::max(largest, o.n);
    if (largest <= 0.0) fail(ErrorCode::invariant_violation, "bundle has no observations; pass a size explicitly");
    return largest;
  };

  const std::function<int()> body = [&]() -> int {
    if (validate->parsed()) {
      auto result = ingest_file(input, input_format(format, input));
      for (const auto& e : result.errors)
        err << "error [" << to_string(e.code) << "]" << (e.field.empty() ? "" : " " + e.field) << ": " << e.message
            << '\n';
      for (const auto& note : result.notes) out << "note: " << note << '\n';
      out << result.input_records << " records read, " << result.records.size() << " valid, "
          << result.rejected_records << " rejected\n";
      if (!result.errors.empty()) return kExitData;
      if (result.records.empty()) {
        err << "error [empty_dataset]: empty dataset\n";
        return kExitData;
      }
      return kExitOk;
    }

    if (simulate->parsed()) {
      GroundTruth truth = truth_path.empty() ? default_truth() : read_truth(truth_path);
      if (truth.tasks.size() != 2) throw UsageError{"simulate needs a truth with exactly two tasks"};
      truth.multiplicative_sigma = sigma;
      truth.seed = resolve_seed(seed);
      if (sizes.empty()) sizes = log_spaced(2e7, 1e9, 8);
      if (weights.empty()) weights = default_weight_grid();
      const auto records = generate_dataset(
          truth, sizes, pair_weightings(truth.tasks[0].task().name, truth.tasks[1].task().name, weights));
      write_records(out_path, records, input_format(format, out_path));
      out << records.size() << " records written to " << out_path << '\n';
      return kExitOk;
    }

    if (fit->parsed()) {
      AnalysisConfig config;
      config.direction = parse_direction(direction);
      config.fit.seed = resolve_seed(seed);
      config.fit.residual_space = parse_residual_space(residual_space);
      config.bootstrap_replicates = bootstrap;
      config.correction.target_step = target_step;
      for (const auto& c : corrections) {
        const auto colon = c.find(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == c.size())
          throw UsageError{"--correct expects run_id:task, got '" + c + "'"};
        config.correction.targets.insert({c.substr(0, colon), c.substr(colon + 1)});
      }
      auto records = read_records(input, format, err);
      if (!records) return kExitData;
      const auto bundle = analyze(*records, tasks, testset, metric, config);
      save_bundle(bundle, out_path);
      out << summary_table(bundle) << "\nbundle written to " << out_path << '\n';
      return kExitOk;
    }

    if (frontier->parsed()) {
      const auto bundle = load_bundle(bundle_path);
      std::optional<std::pair<std::string, std::string>> pair;
      if (!tasks.empty()) {
        if (tasks.size() != 2) throw UsageError{"--tasks takes exactly two task names"};
        pair = {tasks[0], tasks[1]};
      }
      std::optional<FractionForm> chosen;
      if (!form.empty()) chosen = parse_fraction_form(form);
      const auto curve = predict_frontier(bundle, n, grid.empty() ? default_frontier_grid() : grid, chosen, pair);
      if (out_path.empty()) {
        out << frontier_csv(curve);
      } else {
        write_file(out_path, ends_with(out_path, ".json") ? canonical_dump(frontier_json(curve), 2) + "\n"
                                                          : frontier_csv(curve));
        out << curve.points.size() << " frontier points written to " << out_path << '\n';
      }
      return kExitOk;
    }

    if (neff->parsed()) {
      const auto bundle = load_bundle(bundle_path);
      if (!p) {
        out << capacity_csv(capacity_report(bundle, n));
        return kExitOk;
      }
      if (task.empty()) throw UsageError{"--p requires --task"};
      const auto& t = bundle.task(task);
      const FractionForm chosen = !form.empty()                          ? parse_fraction_form(form)
                                  : t.fraction(FractionForm::flexible) ? FractionForm::flexible
                                                                       : FractionForm::linear;
      const auto* curve = t.fraction(chosen);
      if (!curve)
        fail(ErrorCode::missing_fraction_fit,
             "task '" + task + "' has no " + std::string(to_string(chosen)) + " fraction fit");
      const double value = predict_loss_any_weighting(t.single_task, curve->fit, *p, ModelSize(n), bundle.direction);
      out << canonical_dump(neff_json(task, *p, n, eval_fraction_curve(curve->fit, *p), value)) << '\n';
      return kExitOk;
    }

    if (correct->parsed()) {
      const auto dir = parse_direction(direction);
      auto records = read_records(input, format, err);
      if (!records) return kExitData;
      auto run = std::find_if(records->begin(), records->end(), [&](const RunRecord& r) { return r.run_id == run_id; });
      if (run == records->end()) fail(ErrorCode::missing_task, "no run '" + run_id + "' in " + input);
      std::vector<CurvePoint> curve;
      for (const auto& e : run->evals)
        if (e.task == task && e.testset == testset && e.metric == metric) curve.push_back({e.at_step, e.value});
      std::sort(curve.begin(), curve.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.step < b.step; });
      FitConfig config;
      config.seed = resolve_seed(std::nullopt);
      const auto result = convergence_correct(curve, target_step, config, dir);
      if (result.extrapolation_warning)
        err << "warning: target step " << target_step << " is more than 10x beyond the last observed step\n";
      out << canonical_dump({{"run_id", run_id},
                             {"task", task},
                             {"target_step", target_step},
                             {"value", result.value},
                             {"alpha", result.curve.alpha},
                             {"beta", result.curve.beta},
                             {"l_inf", result.curve.l_inf},
                             {"r_squared", number_or_null(result.diagnostics.r_squared)},
                             {"extrapolation_warning", result.extrapolation_warning}})
          << '\n';
      return kExitOk;
    }

    if (correlate_cmd->parsed()) {
      auto records = read_records(input, format, err);
      if (!records) return kExitData;
      const auto result = metric_loss_correlation(*records, task, loss_metric, quality_metric, testset);
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_file(out_dir + "/correlation.csv", correlation_csv(result));
        write_file(out_dir + "/correlation_plot.json", canonical_dump(correlation_plot(result), 1) + "\n");
      }
      out << canonical_dump({{"pairs", result.pairs.size()},
                             {"pearson", number_or_null(result.pearson)},
                             {"slope", number_or_null(result.slope)},
                             {"intercept", number_or_null(result.intercept)},
                             {"degenerate", result.degenerate}})
          << '\n';
      return kExitOk;
    }

    if (report->parsed()) {
      const auto bundle = load_bundle(bundle_path);
      const auto files =
          write_report(bundle, out_dir, reference_n.value_or(largest_observed(bundle)), frontier_n);
      for (const auto& f : files) out << f.string() << '\n';
      return kExitOk;
    }

    if (serve->parsed()) {
      const PredictionService service(load_bundle(bundle_path));
      std::optional<std::filesystem::path> assets;
      if (!static_dir.empty()) assets = static_dir;
      HttpServer server(service, assets);
      const int bound = server.bind(host, port);
      out << "serving " << bundle_path << " on http://" << host << ':' << bound << std::endl;
      server.run();
      return kExitOk;
    }

    return kExitUsage;
  };

  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.message << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
}

}  // namespace mixlaw
