// driftbench: generate synthetic feature files, run continual-learning
// experiment grids, emit head diagnostics and summarize results.
//
// Exit codes: 0 success, 1 one or more runs failed, 2 config/validation error.

#include "driftbench/checkpoint.hpp"
#include "driftbench/diagnostics.hpp"
#include "driftbench/error.hpp"
#include "driftbench/experiment.hpp"
#include "driftbench/feature_data.hpp"
#include "driftbench/report.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

namespace fs = std::filesystem;
using namespace driftbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfig = 2;

int cmd_generate(const SyntheticSpec& spec, const fs::path& out_dir) {
  const SyntheticData data = generate_synthetic(spec);
  fs::create_directories(out_dir);
  write_feature_file(data.train, out_dir / "train.fset");
  write_feature_file(data.test, out_dir / "test.fset");
  std::cout << "dim=" << data.train.dim() << " classes=" << data.train.num_classes()
            << " train=" << data.train.size() << " test=" << data.test.size() << " -> " << out_dir.string() << '\n';
  return kExitOk;
}

int cmd_run(const fs::path& config_path, std::size_t jobs, const std::string& out_override) {
  ExperimentConfig config = ExperimentConfig::load(config_path);
  if (jobs > 0) config.jobs = jobs;
  if (const char* env = std::getenv("DRIFTBENCH_JOBS")) {
    try {
      const long long v = std::stoll(env);
      if (v < 1) throw std::invalid_argument("non-positive");
      config.jobs = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string("invalid value for DRIFTBENCH_JOBS: '") + env + "'");
    }
  }
  if (!out_override.empty()) config.output_dir = out_override;

  const ExperimentResult result = run_experiment(config);
  std::size_t failed = 0;
  for (const auto& run : result.runs) {
    if (!run.ok) {
      ++failed;
      std::cerr << "run " << run.run_id << " failed: " << run.error << '\n';
    }
  }
  std::cout << result.runs.size() - failed << "/" << result.runs.size() << " runs succeeded; results in "
            << config.output_dir.string() << '\n';
  return failed == 0 ? kExitOk : kExitRunFailure;
}

int cmd_diagnose(const fs::path& checkpoint, const std::string& before_path, const std::string& data_path,
                 const fs::path& out_dir) {
  const Classifier loaded = load_checkpoint(checkpoint);
  const auto* head = std::get_if<GradientHead>(&loaded);
  if (!head) throw ValidationError("diagnostics need a gradient-head checkpoint");
  fs::create_directories(out_dir);

  write_norm_bias_csv(norm_bias_report(*head), out_dir / "norm_bias.csv");
  if (!before_path.empty()) {
    const Classifier earlier = load_checkpoint(before_path);
    const auto* prev = std::get_if<GradientHead>(&earlier);
    if (!prev) throw ValidationError("--before must be a gradient-head checkpoint");
    write_weight_delta_csvs(weight_delta(take_snapshot(*prev, 0), take_snapshot(*head, 1)), out_dir);
  }
  if (!data_path.empty()) {
    const FeatureSet data = read_feature_file(data_path);
    const InterferenceReport report = interference_report(*head, data);
    write_interference_csvs(report, out_dir);
    if (report.excluded_vectors || report.excluded_samples) {
      std::cerr << "warning: excluded " << report.excluded_vectors << " zero-norm output vectors and "
                << report.excluded_samples << " zero-norm samples\n";
    }
  }
  std::cout << "diagnostics written to " << out_dir.string() << " (risk = "
            << InterferenceReport::kRiskOrientation << ")\n";
  return kExitOk;
}

int cmd_report(const fs::path& results, std::string out) {
  const auto rows = summarize_results(results);
  if (out.empty()) out = (results.parent_path() / "summary.csv").string();
  write_summary_csv(rows, out);
  std::cout << format_summary_table(rows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"driftbench: output-layer continual learning laboratory"};
  app.require_subcommand(1);

  SyntheticSpec spec;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write synthetic train/test FSET1 files");
  generate->add_option("--classes", spec.num_classes, "Number of classes")->capture_default_str();
  generate->add_option("--modes", spec.modes_per_class, "Modes (domains) per class")->capture_default_str();
  generate->add_option("--dim", spec.dim, "Feature dimension")->capture_default_str();
  generate->add_option("--center-scale", spec.center_scale, "Std of cluster centers")->capture_default_str();
  generate->add_option("--stddev", spec.stddev, "Within-cluster std")->capture_default_str();
  generate->add_option("--train-per-mode", spec.train_per_mode, "Training samples per mode")->capture_default_str();
  generate->add_option("--test-per-mode", spec.test_per_mode, "Test samples per mode")->capture_default_str();
  generate->add_option("--seed", spec.seed, "Generator seed")->capture_default_str();
  generate->add_option("--out", gen_out, "Output directory")->required();

  std::string config_path, run_out;
  std::size_t jobs = 0;
  auto* run = app.add_subcommand("run", "Run an experiment grid from a config file");
  run->add_option("--config", config_path, "Flat-key JSON config")->required();
  run->add_option("--jobs", jobs, "Worker threads (DRIFTBENCH_JOBS overrides)");
  run->add_option("--out", run_out, "Override output.dir");

  std::string checkpoint, before, data, diag_out;
  auto* diagnose = app.add_subcommand("diagnose", "Norm/bias, weight-delta and interference CSVs");
  diagnose->add_option("--checkpoint", checkpoint, "HEAD checkpoint to inspect")->required();
  diagnose->add_option("--before", before, "Earlier checkpoint for weight deltas");
  diagnose->add_option("--data", data, "FSET1 file for interference matrices");
  diagnose->add_option("--out", diag_out, "Output directory")->required();

  std::string results, summary_out;
  auto* report = app.add_subcommand("report", "Summarize results.csv over seeds");
  report->add_option("--results", results, "results.csv from a run")->required();
  report->add_option("--out", summary_out, "summary.csv path (default: next to results)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*generate) return cmd_generate(spec, gen_out);
    if (*run) return cmd_run(config_path, jobs, run_out);
    if (*diagnose) return cmd_diagnose(checkpoint, before, data, diag_out);
    if (*report) return cmd_report(results, summary_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    // Format, shape, parse and validation problems with the inputs.
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailure;
  }
  return kExitOk;
}
