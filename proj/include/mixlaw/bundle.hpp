#pragma once

// LawBundle: everything fitted for a set of tasks on one (testset, metric),
// persisted as a single checksummed JSON document.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mixlaw/dataio.hpp"
#include "mixlaw/fitting.hpp"
#include "mixlaw/lawcore.hpp"

namespace mixlaw {

inline constexpr int kBundleSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "0.1.0";

struct TaskBundle {
  JointLaw joint;
  FitDiagnostics joint_diagnostics;
  PowerLawParams single_task;
  std::map<WeightKey, double> effective_fractions;  // observed weightings only
  std::vector<FractionCurveFit> fraction_fits;      // at most one per form
  std::map<WeightKey, PowerLawFit> per_weighting;
  UncertaintyReport uncertainty;
  std::vector<DatasetPoint> observations;

  const TaskId& task() const { return joint.task; }
  // nullptr when that form was not fitted.
  const FractionCurveFit* fraction(FractionForm form) const;

  friend bool operator==(const TaskBundle&, const TaskBundle&) = default;
};

struct Provenance {
  std::string dataset_hash;
  std::map<std::string, std::string> config;
  std::string tool_version{kToolVersion};

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LawBundle {
  int schema_version = kBundleSchemaVersion;
  std::string metric;
  MetricDirection direction = MetricDirection::loss_like;
  std::string testset;
  std::vector<TaskBundle> tasks;
  Provenance provenance;

  // Throws missing_task.
  const TaskBundle& task(std::string_view name) const;
  bool has_task(std::string_view name) const;
  // Unique task names; every fraction fit belongs to its task and that
  // task's joint law has a p = 1 beta.
  void validate() const;

  friend bool operator==(const LawBundle&, const LawBundle&) = default;
};

// The full file text: {"body": ..., "schema_version": k, "sha256": ...}
std::string to_document(const LawBundle& bundle);
// Throws corruption (unparseable, checksum mismatch, malformed body) or
// version_mismatch.
LawBundle from_document(std::string_view text, int expected_version = kBundleSchemaVersion);

// Writes to a sibling temporary file, then renames over `path`.
void save_bundle(const LawBundle& bundle, const std::filesystem::path& path);
LawBundle load_bundle(const std::filesystem::path& path, int expected_version = kBundleSchemaVersion);

}  // namespace mixlaw
