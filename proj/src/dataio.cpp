#include "mixlaw/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace mixlaw {

using nlohmann::json;

namespace {

// Field-level problem raised while decoding one record.
struct FieldProblem {
  ErrorCode code;
  std::string field;
  std::string message;
};

[[noreturn]] void field_fail(ErrorCode code, std::string field, std::string message) {
  throw FieldProblem{code, std::move(field), std::move(message)};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::int64_t as_positive_int(const json& v, const std::string& field) {
  if (v.is_number_integer() || v.is_number_unsigned()) {
    const auto i = v.get<std::int64_t>();
    if (i <= 0) field_fail(ErrorCode::invariant_violation, field, field + " must be a positive integer");
    return i;
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d > 0.0 && d == std::floor(d) && d < 9.2e18) return static_cast<std::int64_t>(d);
  }
  field_fail(ErrorCode::invariant_violation, field, field + " must be a positive integer");
}

const json& require_field(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) field_fail(ErrorCode::parse_error, path + key, "missing field " + path + key);
  return *it;
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) field_fail(ErrorCode::parse_error, field, field + " must be a string");
  return v.get<std::string>();
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) field_fail(ErrorCode::parse_error, field, field + " must be a number");
  return v.get<double>();
}

RunRecord record_from_json(const json& j) {
  if (!j.is_object()) field_fail(ErrorCode::parse_error, "", "record must be a JSON object");
  RunRecord r;
  r.run_id = as_string(require_field(j, "run_id", ""), "run_id");

  const auto& model = require_field(j, "model", "");
  if (!model.is_object()) field_fail(ErrorCode::parse_error, "model", "model must be an object");
  r.model.n_noneb = as_positive_int(require_field(model, "n_noneb", "model."), "model.n_noneb");
  auto optional_int = [&](const char* key, std::optional<std::int64_t>& dst) {
    auto it = model.find(key);
    if (it != model.end() && !it->is_null()) dst = as_positive_int(*it, std::string("model.") + key);
  };
  optional_int("n_total", r.model.n_total);
  optional_int("enc_layers", r.model.enc_layers);
  optional_int("dec_layers", r.model.dec_layers);
  optional_int("emb_dim", r.model.emb_dim);
  optional_int("n_heads", r.model.n_heads);
  optional_int("head_dim", r.model.head_dim);
  optional_int("mlp_dim", r.model.mlp_dim);
  optional_int("vocab_size", r.model.vocab_size);

  const auto& mixture = require_field(j, "mixture", "");
  if (!mixture.is_object()) field_fail(ErrorCode::parse_error, "mixture", "mixture must be an object");
  std::map<std::string, double> weights;
  for (const auto& [task, w] : mixture.items()) weights[task] = as_number(w, "mixture." + task);
  try {
    r.mixture = WeightVector(std::move(weights));
  } catch (const Error& e) {
    field_fail(e.code(), "mixture", e.what());
  }

  const auto& training = require_field(j, "training", "");
  if (!training.is_object()) field_fail(ErrorCode::parse_error, "training", "training must be an object");
  r.training.steps = as_positive_int(require_field(training, "steps", "training."), "training.steps");
  r.training.batch_tokens =
      as_positive_int(require_field(training, "batch_tokens", "training."), "training.batch_tokens");

  const auto& evals = require_field(j, "evals", "");
  if (!evals.is_array()) field_fail(ErrorCode::parse_error, "evals", "evals must be an array");
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const std::string path = "evals[" + std::to_string(i) + "].";
    const auto& e = evals[i];
    if (!e.is_object()) field_fail(ErrorCode::parse_error, path, "eval must be an object");
    EvalRecord ev;
    ev.task = as_string(require_field(e, "task", path), path + "task");
    ev.testset = as_string(require_field(e, "testset", path), path + "testset");
    ev.metric = as_string(require_field(e, "metric", path), path + "metric");
    ev.value = as_number(require_field(e, "value", path), path + "value");
    ev.at_step = as_positive_int(require_field(e, "at_step", path), path + "at_step");
    r.evals.push_back(std::move(ev));
  }
  return r;
}

json record_to_json(const RunRecord& r) {
  json model = {{"n_noneb", r.model.n_noneb}};
  auto put = [&](const char* key, const std::optional<std::int64_t>& v) {
    if (v) model[key] = *v;
  };
  put("n_total", r.model.n_total);
  put("enc_layers", r.model.enc_layers);
  put("dec_layers", r.model.dec_layers);
  put("emb_dim", r.model.emb_dim);
  put("n_heads", r.model.n_heads);
  put("head_dim", r.model.head_dim);
  put("mlp_dim", r.model.mlp_dim);
  put("vocab_size", r.model.vocab_size);
  json mixture = json::object();
  for (const auto& [task, w] : r.mixture.entries()) mixture[task] = w;
  json evals = json::array();
  for (const auto& e : r.evals)
    evals.push_back({{"task", e.task}, {"testset", e.testset}, {"metric", e.metric}, {"value", e.value}, {"at_step", e.at_step}});
  return {{"run_id", r.run_id},
          {"model", std::move(model)},
          {"mixture", std::move(mixture)},
          {"training", {{"steps", r.training.steps}, {"batch_tokens", r.training.batch_tokens}}},
          {"evals", std::move(evals)}};
}

void validate_or_field_fail(const RunRecord& r) {
  try {
    validate_record(r);
  } catch (const Error& e) {
    std::string msg = e.what();
    // messages are "<field>: <detail>"
    auto colon = msg.find(':');
    field_fail(e.code(), colon == std::string::npos ? "" : msg.substr(0, colon), msg);
  }
}

bool on_grid(double w) {
  for (double g : default_weight_grid())
    if (std::abs(w - g) <= 1e-9) return true;
  return false;
}

void add_grid_notes(const RunRecord& r, std::vector<std::string>& notes) {
  for (const auto& [task, w] : r.mixture.entries())
    if (!on_grid(w))
      notes.push_back("run '" + r.run_id + "': weight " + format_double(w) + " for '" + task +
                      "' is off the default grid");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) field_fail(ErrorCode::parse_error, "", "unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::int64_t parse_int_cell(const std::string& cell, const std::string& field) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) {
    // Accept integral floating literals such as 1e9.
    double d = 0.0;
    try {
      d = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size() || d != std::floor(d))
      field_fail(ErrorCode::parse_error, field, field + " is not an integer: '" + cell + "'");
    v = static_cast<long long>(d);
  }
  return v;
}

double parse_double_cell(const std::string& cell, const std::string& field) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size())
    field_fail(ErrorCode::parse_error, field, field + " is not a number: '" + cell + "'");
  return d;
}

const std::vector<std::string> kCsvColumns = {"run_id", "n_noneb", "n_total", "steps", "batch_tokens", "task",
                                              "weight", "testset", "metric", "value", "at_step"};

struct CsvGroup {
  std::size_t first_line = 0;
  RunRecord record;
  std::map<std::string, double> weights;
  std::optional<IngestIssue> problem;
};

IngestResult ingest_csv(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (in.eof() && line.find_first_not_of(" \t\r") == std::string::npos) return result;
  try {
    auto header = split_csv_line(line);
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const auto& name : kCsvColumns)
      if (!col.contains(name)) field_fail(ErrorCode::parse_error, name, "CSV header lacks column '" + name + "'");
  } catch (const FieldProblem& p) {
    result.errors.push_back({line_no, p.code, p.field, "line " + std::to_string(line_no) + ": " + p.message});
    return result;
  }

  std::vector<std::string> order;
  std::map<std::string, CsvGroup> groups;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cells;
    std::string run_id;
    try {
      cells = split_csv_line(line);
      if (cells.size() != col.size())
        field_fail(ErrorCode::parse_error, "", "expected " + std::to_string(col.size()) + " cells, got " +
                                                   std::to_string(cells.size()));
      run_id = cells[col["run_id"]];
    } catch (const FieldProblem& p) {
      // Unattributable row: count it as its own rejected input.
      ++result.input_records;
      ++result.rejected_records;
      result.errors.push_back({line_no, p.code, p.field, "line " + std::to_string(line_no) + ": " + p.message});
      continue;
    }
    auto [it, fresh] = groups.try_emplace(run_id);
    auto& g = it->second;
    if (fresh) {
      order.push_back(run_id);
      g.first_line = line_no;
    }
    if (g.problem) continue;
    try {
      auto cell = [&](const char* name) -> const std::string& { return cells[col[name]]; };
      if (run_id.empty()) field_fail(ErrorCode::parse_error, "run_id", "run_id is empty");
      const auto n_noneb = parse_int_cell(cell("n_noneb"), "n_noneb");
      std::optional<std::int64_t> n_total;
      if (!cell("n_total").empty()) n_total = parse_int_cell(cell("n_total"), "n_total");
      const auto steps = parse_int_cell(cell("steps"), "steps");
      const auto batch = parse_int_cell(cell("batch_tokens"), "batch_tokens");
      const std::string task = cell("task");
      const double weight = parse_double_cell(cell("weight"), "weight");
      // A row with no metric only declares a mixture weight.
      std::optional<EvalRecord> ev;
      if (!cell("metric").empty())
        ev = EvalRecord{task, cell("testset"), cell("metric"), parse_double_cell(cell("value"), "value"),
                        parse_int_cell(cell("at_step"), "at_step")};
      if (fresh) {
        g.record.run_id = run_id;
        g.record.model.n_noneb = n_noneb;
        g.record.model.n_total = n_total;
        g.record.training = {steps, batch};
      } else if (g.record.model.n_noneb != n_noneb || g.record.model.n_total != n_total ||
                 g.record.training.steps != steps || g.record.training.batch_tokens != batch) {
        field_fail(ErrorCode::invariant_violation, "run_id",
                   "rows of run '" + run_id + "' disagree on model or training fields");
      }
      auto [wit, new_task] = g.weights.try_emplace(task, weight);
      if (!new_task && wit->second != weight)
        field_fail(ErrorCode::invariant_violation, "weight",
                   "rows of run '" + run_id + "' disagree on the weight of '" + task + "'");
      if (ev) g.record.evals.push_back(std::move(*ev));
    } catch (const FieldProblem& p) {
      g.problem = IngestIssue{line_no, p.code, p.field, "line " + std::to_string(line_no) + ": " + p.message};
    }
  }

  std::set<std::tuple<std::string, std::string, std::string, std::string, std::int64_t>> seen;
  for (const auto& run_id : order) {
    auto& g = groups[run_id];
    ++result.input_records;
    if (!g.problem) {
      try {
        try {
          g.record.mixture = WeightVector(g.weights);
        } catch (const Error& e) {
          field_fail(e.code(), "weight", e.what());
        }
        validate_or_field_fail(g.record);
      } catch (const FieldProblem& p) {
        g.problem = IngestIssue{g.first_line, p.code, p.field,
                                "line " + std::to_string(g.first_line) + ": " + p.message};
      }
    }
    if (g.problem) {
      ++result.rejected_records;
      result.errors.push_back(*g.problem);
      continue;
    }
    add_grid_notes(g.record, result.notes);
    result.records.push_back(std::move(g.record));
  }
  return result;
}

IngestResult ingest_json_lines(std::istream& in) {
  IngestResult result;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> run_ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.input_records;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        field_fail(ErrorCode::parse_error, "", std::string("malformed JSON: ") + e.what());
      }
      RunRecord r = record_from_json(j);
      validate_or_field_fail(r);
      if (!run_ids.insert(r.run_id).second)
        field_fail(ErrorCode::invariant_violation, "run_id", "duplicate run_id '" + r.run_id + "'");
      add_grid_notes(r, result.notes);
      result.records.push_back(std::move(r));
    } catch (const FieldProblem& p) {
      ++result.rejected_records;
      result.errors.push_back({line_no, p.code, p.field, "line " + std::to_string(line_no) + ": " + p.message});
    }
  }
  return result;
}

}  // namespace

void validate_record(const RunRecord& r) {
  auto bad = [](const std::string& field, const std::string& detail) {
    fail(ErrorCode::invariant_violation, field + ": " + detail);
  };
  if (r.run_id.empty()) bad("run_id", "must be non-empty");
  if (r.model.n_noneb <= 0) bad("model.n_noneb", "must be positive");
  if (r.model.n_total && *r.model.n_total < r.model.n_noneb) bad("model.n_total", "smaller than n_noneb");
  for (const auto* v : {&r.model.n_total, &r.model.enc_layers, &r.model.dec_layers, &r.model.emb_dim,
                        &r.model.n_heads, &r.model.head_dim, &r.model.mlp_dim, &r.model.vocab_size})
    if (*v && **v <= 0) bad("model", "architecture fields must be positive");
  if (r.mixture.entries().empty()) bad("mixture", "must have at least one entry");
  if (r.training.steps <= 0) bad("training.steps", "must be positive");
  if (r.training.batch_tokens <= 0) bad("training.batch_tokens", "must be positive");
  std::set<std::tuple<std::string, std::string, std::string, std::int64_t>> keys;
  for (std::size_t i = 0; i < r.evals.size(); ++i) {
    const auto& e = r.evals[i];
    const std::string path = "evals[" + std::to_string(i) + "]";
    if (e.task.empty()) bad(path + ".task", "must be non-empty");
    if (!r.mixture.contains(e.task)) bad(path + ".task", "task '" + e.task + "' is not in the mixture");
    if (!std::isfinite(e.value)) bad(path + ".value", "must be finite");
    if (e.at_step <= 0) bad(path + ".at_step", "must be positive");
    if (e.at_step > r.training.steps) bad(path + ".at_step", "exceeds training.steps");
    if (!keys.insert({e.task, e.testset, e.metric, e.at_step}).second)
      bad(path, "duplicate (run_id, task, testset, metric, at_step)");
  }
}

RecordFormat parse_record_format(std::string_view s) {
  if (s == "csv") return RecordFormat::csv;
  if (s == "json_lines" || s == "jsonl") return RecordFormat::json_lines;
  fail(ErrorCode::parse_error, "unknown record format '" + std::string(s) + "'");
}

RecordFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? RecordFormat::csv : RecordFormat::json_lines;
}

IngestResult ingest(std::istream& in, RecordFormat format) {
  return format == RecordFormat::csv ? ingest_csv(in) : ingest_json_lines(in);
}

IngestResult ingest_file(const std::filesystem::path& path, RecordFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  return ingest(in, format);
}

std::vector<RunRecord> ingest_or_throw(const std::filesystem::path& path, RecordFormat format) {
  auto result = ingest_file(path, format);
  if (!result.errors.empty()) fail(result.errors.front().code, result.errors.front().message);
  if (result.records.empty()) fail(ErrorCode::empty_dataset, "empty dataset: '" + path.string() + "'");
  return std::move(result.records);
}

void write_json_lines(std::ostream& out, const std::vector<RunRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void write_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  for (std::size_t i = 0; i < kCsvColumns.size(); ++i) out << (i ? "," : "") << kCsvColumns[i];
  out << '\n';
  for (const auto& r : records) {
    auto prefix = [&](const std::string& task) {
      out << csv_escape(r.run_id) << ',' << r.model.n_noneb << ',';
      if (r.model.n_total) out << *r.model.n_total;
      out << ',' << r.training.steps << ',' << r.training.batch_tokens << ',' << csv_escape(task) << ','
          << format_double(r.mixture.weight(task)) << ',';
    };
    std::set<std::string> evaluated;
    for (const auto& e : r.evals) {
      evaluated.insert(e.task);
      prefix(e.task);
      out << csv_escape(e.testset) << ',' << csv_escape(e.metric) << ',' << format_double(e.value) << ','
          << e.at_step << '\n';
    }
    for (const auto& [task, w] : r.mixture.entries())
      if (!evaluated.contains(task)) {
        prefix(task);
        out << ",,,\n";
      }
  }
}

void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records,
                   RecordFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  if (format == RecordFormat::csv)
    write_csv(out, records);
  else
    write_json_lines(out, records);
  if (!out) fail(ErrorCode::io_error, "write to '" + path.string() + "' failed");
}

const std::vector<double>& default_weight_grid() {
  static const std::vector<double> grid{0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0};
  return grid;
}

const std::vector<SizeTableRow>& reference_size_table() {
  static const std::vector<SizeTableRow> rows{
      {2, 2, 512, 8, 64, 2048, 128000, 149'953'024, 18'881'024},
      {3, 3, 768, 12, 64, 3072, 128000, 260'322'816, 63'714'816},
      {6, 6, 768, 12, 64, 3072, 128000, 324'035'328, 127'427'328},
      {9, 9, 768, 12, 64, 3072, 128000, 387'747'840, 191'139'840},
      {9, 9, 1024, 16, 64, 4096, 128000, 601'931'776, 339'787'776},
      {12, 12, 1024, 16, 64, 4096, 128000, 715'193'344, 453'049'344},
      {12, 12, 1280, 16, 80, 5120, 128000, 1'035'876'864, 707'869'184},
      {12, 12, 1536, 16, 96, 6144, 128000, 1'412'528'128, 1'019'312'128},
  };
  return rows;
}

std::optional<SizeTableRow> lookup_size(const ArchitectureKey& key) {
  for (const auto& row : reference_size_table())
    if (row.enc_layers == key.enc_layers && row.dec_layers == key.dec_layers && row.emb_dim == key.emb_dim &&
        row.n_heads == key.n_heads && row.head_dim == key.head_dim && row.mlp_dim == key.mlp_dim &&
        (!key.vocab_size || *key.vocab_size == row.vocab_size))
      return row;
  return std::nullopt;
}

CorrectionPolicy select_low_weight_largest(const std::vector<RunRecord>& records, const std::string& task,
                                           double max_weight, std::size_t largest) {
  std::vector<std::pair<std::int64_t, std::string>> candidates;
  for (const auto& r : records) {
    const double w = r.mixture.weight(task);
    if (w > 0.0 && w <= max_weight + 1e-12) candidates.emplace_back(r.model.n_noneb, r.run_id);
  }
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  CorrectionPolicy policy;
  for (std::size_t i = 0; i < std::min(largest, candidates.size()); ++i)
    policy.targets.insert({candidates[i].second, task});
  return policy;
}

std::vector<DatasetPoint> build_fit_dataset(const std::vector<RunRecord>& records, const std::string& task,
                                            const std::string& testset, const std::string& metric,
                                            const CorrectionPolicy& policy) {
  std::vector<DatasetPoint> points;
  bool metric_seen = false;
  for (const auto& r : records) {
    std::vector<const EvalRecord*> matching;
    for (const auto& e : r.evals)
      if (e.task == task && e.testset == testset && e.metric == metric) matching.push_back(&e);
    if (matching.empty()) continue;
    metric_seen = true;
    const double p = r.mixture.weight(task);
    if (WeightKey::from_weight(p).micros() == 0) continue;  // zero-shot
    const auto* last = *std::max_element(matching.begin(), matching.end(),
                                         [](const auto* a, const auto* b) { return a->at_step < b->at_step; });
    DatasetPoint pt{r.run_id, static_cast<double>(r.model.n_noneb), p, last->value, false};
    if (policy.targets.contains({r.run_id, task})) {
      std::vector<CurvePoint> curve;
      for (const auto* e : matching) curve.push_back({e->at_step, e->value});
      std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.step < b.step; });
      try {
        pt.y = convergence_correct(curve, policy.target_step, policy.config).value;
      } catch (const Error& e) {
        fail(e.code(), "convergence correction of run '" + r.run_id + "': " + e.what());
      }
      pt.corrected = true;
    }
    points.push_back(std::move(pt));
  }
  if (!metric_seen)
    fail(ErrorCode::missing_metric,
         "no '" + metric + "' evaluations on '" + testset + "' for task '" + task + "'");
  if (points.empty()) fail(ErrorCode::empty_dataset, "no fittable points for task '" + task + "'");
  std::sort(points.begin(), points.end(), [](const DatasetPoint& a, const DatasetPoint& b) {
    return std::tie(a.p, a.n, a.run_id) < std::tie(b.p, b.n, b.run_id);
  });
  return points;
}

std::vector<WeightedPoint> to_weighted_points(const std::vector<DatasetPoint>& points) {
  std::vector<WeightedPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({p.n, p.p, p.y});
  return out;
}

}  // namespace mixlaw
