#pragma once

#include "driftbench/classifier.hpp"
#include "driftbench/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace driftbench {

/// Resolved experiment grid: data source x scenario x heads x seeds.
///
/// Config files are flat JSON objects; the key schema is documented in the
/// README. Unknown keys are rejected.
struct ExperimentConfig {
  SyntheticSpec synthetic;
  std::optional<std::filesystem::path> train_file;
  std::optional<std::filesystem::path> test_file;

  DriftKind scenario_kind = DriftKind::incremental;
  std::size_t nb_tasks = 5;

  std::vector<HeadSpec> heads;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7};
  TrainConfig train;
  std::optional<ReplayConfig> replay;
  // Subset protocol when non-empty; 0 stands for the whole training set.
  std::vector<std::size_t> subset_sizes;

  std::filesystem::path output_dir = "results";
  bool diagnostics = false;
  bool checkpoints = false;
  std::size_t jobs = 1;

  static ExperimentConfig parse(const std::string& json_text);
  static ExperimentConfig load(const std::filesystem::path& path);
  std::string to_json() const;
  void validate() const;
};

struct RunStatus {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string head;
  std::string mask;
  std::string scenario;
  bool ok = false;
  std::string error;
  double wall_time = 0.0;
};

struct ExperimentResult {
  std::vector<RunStatus> runs;
  bool all_ok() const;
};

inline constexpr const char* kResultsHeader =
    "run_id,seed,scenario,head,mask,task_index,epoch,metric_name,metric_value";

// Runs the grid, writing results.csv and run.json under output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Long-format rows for one record, without trailing newline per row.
std::vector<std::string> results_rows(const RunRecord& record, std::uint64_t seed, const std::string& mask);

}  // namespace driftbench
