#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "fcucr/config.hpp"
#include "fcucr/data.hpp"
#include "fcucr/federation.hpp"

namespace fcucr {

inline constexpr const char* kToolVersion = "0.3.0";

struct PrepareOptions {
  std::filesystem::path input;
  std::filesystem::path output;
  std::int64_t gap_seconds = 1800;
  std::set<std::string> drop_labels;
};

// TSV log -> sessions -> splits -> bundle, plus summary.json with the
// users/items/sessions/mean-length counts.
DatasetSummary cmd_prepare(const PrepareOptions& options);

// Writes a synthetic bundle (and cluster labels) to `output`.
DatasetSummary cmd_prepare_synthetic(const SyntheticConfig& config, const std::filesystem::path& output);

struct Manifest {
  ExperimentSpec spec;
  std::uint64_t dataset_fingerprint = 0;
  std::string start_time;  // empty when timing is not recorded
  std::string version = kToolVersion;
};

struct RunOutcome {
  Manifest manifest;
  ExperimentResult result;
};

// Loads spec.dataset, runs the experiment, and writes into spec.output:
// rounds.csv, forgetting.csv, histogram.csv, summary.json, checkpoint/.
RunOutcome cmd_run(const ExperimentSpec& spec);

// Same, on an already loaded dataset.
RunOutcome run_with_dataset(const ExperimentSpec& spec, const Dataset& dataset);

inline const std::vector<std::string>& sweep_parameters() {
  static const std::vector<std::string> params = {"k", "lambda", "window", "transfer_interval", "ldp_std"};
  return params;
}

struct SweepRow {
  std::string value;
  RunOutcome outcome;
};

// One run per value into spec.output/<parameter>-<value>/ and a consolidated
// spec.output/sweep.csv. Every sub-config is validated before any run starts.
std::vector<SweepRow> cmd_sweep(const ExperimentSpec& spec, const std::string& parameter,
                                const std::vector<std::string>& values);

struct OfflineEval {
  double hr_test = 0.0, ndcg_test = 0.0;
  double hr_first = 0.0, ndcg_first = 0.0;
  ProbabilityHistogram histogram;
};

// Re-evaluates a saved checkpoint directory against the dataset; writes
// eval.json next to the checkpoint.
OfflineEval cmd_eval(const ExperimentSpec& spec, const std::filesystem::path& checkpoint_dir);

std::string manifest_json(const Manifest& manifest);

}  // namespace fcucr
