#pragma once

// Experiment records: schema, validation, CSV / JSON-lines ingestion and
// export, the reference model-size table, and conversion of records into
// (n, p, y) fitting points.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mixlaw/fitting.hpp"
#include "mixlaw/lawcore.hpp"

namespace mixlaw {

struct ModelInfo {
  std::int64_t n_noneb = 0;  // non-embedding parameters; the n used for fitting
  std::optional<std::int64_t> n_total;
  std::optional<std::int64_t> enc_layers;
  std::optional<std::int64_t> dec_layers;
  std::optional<std::int64_t> emb_dim;
  std::optional<std::int64_t> n_heads;
  std::optional<std::int64_t> head_dim;
  std::optional<std::int64_t> mlp_dim;
  std::optional<std::int64_t> vocab_size;

  friend bool operator==(const ModelInfo&, const ModelInfo&) = default;
};

struct TrainingInfo {
  std::int64_t steps = 0;
  std::int64_t batch_tokens = 0;

  friend bool operator==(const TrainingInfo&, const TrainingInfo&) = default;
};

struct EvalRecord {
  std::string task;
  std::string testset;
  std::string metric;
  double value = 0.0;
  std::int64_t at_step = 0;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct RunRecord {
  std::string run_id;
  ModelInfo model;
  WeightVector mixture;
  TrainingInfo training;
  std::vector<EvalRecord> evals;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

// Throws invariant_violation naming the offending field.
void validate_record(const RunRecord& record);

enum class RecordFormat { csv, json_lines };

RecordFormat parse_record_format(std::string_view s);
// .csv -> csv, anything else -> json_lines
RecordFormat format_from_path(const std::filesystem::path& path);

struct IngestIssue {
  std::size_t line = 0;  // 1-based; 0 when not tied to a line
  ErrorCode code = ErrorCode::parse_error;
  std::string field;
  std::string message;
};

struct IngestResult {
  std::vector<RunRecord> records;
  std::vector<IngestIssue> errors;
  std::vector<std::string> notes;  // informational, e.g. off-grid weights
  std::size_t input_records = 0;   // lines (json_lines) or run groups (csv)
  std::size_t rejected_records = 0;
};

// Never throws on bad content: every rejected record is reported in errors,
// and input_records == records.size() + rejected_records.
IngestResult ingest(std::istream& in, RecordFormat format);
IngestResult ingest_file(const std::filesystem::path& path, RecordFormat format);

// Throws the first reported error, or empty_dataset when nothing was read.
std::vector<RunRecord> ingest_or_throw(const std::filesystem::path& path, RecordFormat format);

void write_json_lines(std::ostream& out, const std::vector<RunRecord>& records);
// One row per evaluation, plus a row with empty eval cells for each mixture
// task that has no evaluation.  Architecture fields other than n_noneb and
// n_total are not representable in CSV.
void write_csv(std::ostream& out, const std::vector<RunRecord>& records);
void write_records(const std::filesystem::path& path, const std::vector<RunRecord>& records, RecordFormat format);

// Training-mixture weights swept by the reference experiments.
const std::vector<double>& default_weight_grid();

struct SizeTableRow {
  std::int64_t enc_layers;
  std::int64_t dec_layers;
  std::int64_t emb_dim;
  std::int64_t n_heads;
  std::int64_t head_dim;
  std::int64_t mlp_dim;
  std::int64_t vocab_size;
  std::int64_t n_total;
  std::int64_t n_corrected;

  friend bool operator==(const SizeTableRow&, const SizeTableRow&) = default;
};

struct ArchitectureKey {
  std::int64_t enc_layers;
  std::int64_t dec_layers;
  std::int64_t emb_dim;
  std::int64_t n_heads;
  std::int64_t head_dim;
  std::int64_t mlp_dim;
  std::optional<std::int64_t> vocab_size;  // unset matches any vocabulary
};

const std::vector<SizeTableRow>& reference_size_table();
std::optional<SizeTableRow> lookup_size(const ArchitectureKey& key);

struct CorrectionPolicy {
  std::set<std::pair<std::string, std::string>> targets;  // (run_id, task)
  std::int64_t target_step = kDefaultCorrectionTargetStep;
  FitConfig config;
};

// Explicit policy naming, for one task, the `largest` biggest models among
// runs whose weight on that task is at most max_weight.
CorrectionPolicy select_low_weight_largest(const std::vector<RunRecord>& records, const std::string& task,
                                           double max_weight = 0.05, std::size_t largest = 1);

struct DatasetPoint {
  std::string run_id;
  double n;
  double p;
  double y;
  bool corrected = false;

  friend bool operator==(const DatasetPoint&, const DatasetPoint&) = default;
};

// One point per run with positive weight on `task`: n = n_noneb, p = that
// weight, y = the latest-step eval (or its convergence-corrected value).
// Sorted by (p, n, run_id).
std::vector<DatasetPoint> build_fit_dataset(const std::vector<RunRecord>& records, const std::string& task,
                                            const std::string& testset, const std::string& metric,
                                            const CorrectionPolicy& policy = {});

std::vector<WeightedPoint> to_weighted_points(const std::vector<DatasetPoint>& points);

}  // namespace mixlaw
