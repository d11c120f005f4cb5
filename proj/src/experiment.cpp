#include "driftbench/experiment.hpp"

#include "driftbench/checkpoint.hpp"
#include "driftbench/csv.hpp"
#include "driftbench/diagnostics.hpp"
#include "driftbench/error.hpp"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace driftbench {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "data.train",       "data.test",          "synthetic.classes",       "synthetic.modes",
    "synthetic.dim",    "synthetic.center_scale", "synthetic.stddev",    "synthetic.train_per_mode",
    "synthetic.test_per_mode", "synthetic.seed", "scenario.kind",          "scenario.tasks",
    "heads",            "seeds",              "train.epochs",            "train.batch_size",
    "train.lr",         "train.momentum",     "train.eval_every_epoch",  "replay.enabled",
    "replay.cap_per_class", "replay.balance", "subset.sizes",            "output.dir",
    "output.diagnostics", "output.checkpoints", "jobs"};

template <typename T>
T get_key(const json& doc, const std::string& key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("invalid value for " + key + ": wrong type");
  }
}

std::size_t get_count(const json& doc, const std::string& key, std::size_t fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("invalid value for " + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kKnownKeys.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  ExperimentConfig cfg;
  if (doc.contains("data.train")) cfg.train_file = get_key<std::string>(doc, "data.train", "");
  if (doc.contains("data.test")) cfg.test_file = get_key<std::string>(doc, "data.test", "");

  SyntheticSpec& s = cfg.synthetic;
  s.num_classes = get_count(doc, "synthetic.classes", s.num_classes);
  s.modes_per_class = get_count(doc, "synthetic.modes", s.modes_per_class);
  s.dim = get_count(doc, "synthetic.dim", s.dim);
  s.center_scale = get_key<double>(doc, "synthetic.center_scale", s.center_scale);
  s.stddev = get_key<double>(doc, "synthetic.stddev", s.stddev);
  s.train_per_mode = get_count(doc, "synthetic.train_per_mode", s.train_per_mode);
  s.test_per_mode = get_count(doc, "synthetic.test_per_mode", s.test_per_mode);
  s.seed = get_key<std::uint64_t>(doc, "synthetic.seed", s.seed);

  cfg.scenario_kind = parse_drift_kind(get_key<std::string>(doc, "scenario.kind", "incremental"));
  cfg.nb_tasks = get_count(doc, "scenario.tasks", cfg.nb_tasks);

  for (const auto& name : get_key<std::vector<std::string>>(doc, "heads", {})) cfg.heads.push_back(HeadSpec::parse(name));
  cfg.seeds = get_key<std::vector<std::uint64_t>>(doc, "seeds", cfg.seeds);

  TrainConfig& t = cfg.train;
  t.epochs_per_task = get_count(doc, "train.epochs", t.epochs_per_task);
  t.batch_size = get_count(doc, "train.batch_size", t.batch_size);
  if (doc.contains("train.lr") && !doc.at("train.lr").is_null()) t.lr = get_key<double>(doc, "train.lr", 0.0);
  t.momentum = get_key<double>(doc, "train.momentum", t.momentum);
  t.eval_every_epoch = get_key<bool>(doc, "train.eval_every_epoch", t.eval_every_epoch);

  if (get_key<bool>(doc, "replay.enabled", false)) {
    ReplayConfig r;
    r.buffer_cap_per_class = get_count(doc, "replay.cap_per_class", r.buffer_cap_per_class);
    r.replay_balance = get_key<double>(doc, "replay.balance", r.replay_balance);
    cfg.replay = r;
  }

  if (doc.contains("subset.sizes")) {
    const json& sizes = doc.at("subset.sizes");
    if (!sizes.is_array()) throw ConfigError("invalid value for subset.sizes: expected an array");
    for (const json& v : sizes) {
      if (v.is_string() && v.get<std::string>() == "all") {
        cfg.subset_sizes.push_back(0);
      } else if (v.is_number_integer() && v.get<long long>() > 0) {
        cfg.subset_sizes.push_back(v.get<std::size_t>());
      } else {
        throw ConfigError("invalid value for subset.sizes: entries must be positive integers or \"all\"");
      }
    }
  }

  cfg.output_dir = get_key<std::string>(doc, "output.dir", cfg.output_dir.string());
  cfg.diagnostics = get_key<bool>(doc, "output.diagnostics", cfg.diagnostics);
  cfg.checkpoints = get_key<bool>(doc, "output.checkpoints", cfg.checkpoints);
  cfg.jobs = get_count(doc, "jobs", cfg.jobs);
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string ExperimentConfig::to_json() const {
  json doc;
  if (train_file) doc["data.train"] = train_file->string();
  if (test_file) doc["data.test"] = test_file->string();
  doc["synthetic.classes"] = synthetic.num_classes;
  doc["synthetic.modes"] = synthetic.modes_per_class;
  doc["synthetic.dim"] = synthetic.dim;
  doc["synthetic.center_scale"] = synthetic.center_scale;
  doc["synthetic.stddev"] = synthetic.stddev;
  doc["synthetic.train_per_mode"] = synthetic.train_per_mode;
  doc["synthetic.test_per_mode"] = synthetic.test_per_mode;
  doc["synthetic.seed"] = synthetic.seed;
  doc["scenario.kind"] = std::string(to_string(scenario_kind));
  doc["scenario.tasks"] = nb_tasks;
  std::vector<std::string> names;
  for (const auto& h : heads) names.push_back(h.to_string());
  doc["heads"] = names;
  doc["seeds"] = seeds;
  doc["train.epochs"] = train.epochs_per_task;
  doc["train.batch_size"] = train.batch_size;
  doc["train.lr"] = train.lr ? json(*train.lr) : json(nullptr);
  doc["train.momentum"] = train.momentum;
  doc["train.eval_every_epoch"] = train.eval_every_epoch;
  doc["replay.enabled"] = replay.has_value();
  if (replay) {
    doc["replay.cap_per_class"] = replay->buffer_cap_per_class;
    doc["replay.balance"] = replay->replay_balance;
  }
  json sizes = json::array();
  for (auto s : subset_sizes) sizes.push_back(s == 0 ? json("all") : json(s));
  doc["subset.sizes"] = sizes;
  doc["output.dir"] = output_dir.string();
  doc["output.diagnostics"] = diagnostics;
  doc["output.checkpoints"] = checkpoints;
  doc["jobs"] = jobs;
  return doc.dump(2);
}

void ExperimentConfig::validate() const {
  if (heads.empty()) throw ConfigError("invalid value for heads: at least one head is required");
  if (seeds.empty()) throw ConfigError("invalid value for seeds: at least one seed is required");
  if (train_file.has_value() != test_file.has_value()) {
    throw ConfigError("data.train and data.test must be given together");
  }
  if (train_file) {
    if (!std::filesystem::exists(*train_file)) throw ConfigError("data.train file does not exist: " + train_file->string());
    if (!std::filesystem::exists(*test_file)) throw ConfigError("data.test file does not exist: " + test_file->string());
  } else {
    synthetic.validate();
    if (subset_sizes.empty() && scenario_kind == DriftKind::incremental && nb_tasks > 0 &&
        synthetic.num_classes % nb_tasks != 0) {
      throw ConfigError("invalid value for scenario.tasks: must divide synthetic.classes");
    }
    if (subset_sizes.empty() && scenario_kind == DriftKind::lifelong && nb_tasks > 0 &&
        synthetic.modes_per_class % nb_tasks != 0) {
      throw ConfigError("invalid value for scenario.tasks: must divide synthetic.modes");
    }
  }
  if (scenario_kind != DriftKind::mixed && nb_tasks == 0) throw ConfigError("invalid value for scenario.tasks: must be >= 1");
  train.validate();
  if (replay) {
    replay->validate();
    if (scenario_kind != DriftKind::incremental) throw ConfigError("replay requires scenario.kind = incremental");
    for (const auto& h : heads) {
      if (h.family != HeadFamily::gradient) throw ConfigError("replay requires gradient heads, got " + h.to_string());
    }
    if (!subset_sizes.empty()) throw ConfigError("replay and subset.sizes are mutually exclusive");
  }
  if (jobs == 0) throw ConfigError("invalid value for jobs: must be >= 1");
}

bool ExperimentResult::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunStatus& r) { return r.ok; });
}

std::vector<std::string> results_rows(const RunRecord& record, std::uint64_t seed, const std::string& mask) {
  const std::string prefix = record.run_id + "," + std::to_string(seed) + "," + record.scenario + "," + record.head +
                             "," + mask + "," + std::to_string(record.task_index) + "," +
                             std::to_string(record.epoch) + ",";
  std::vector<std::string> rows;
  rows.push_back(prefix + "overall_accuracy," + format_real(record.overall_accuracy));
  for (std::size_t t = 0; t < record.per_task_accuracy.size(); ++t) {
    rows.push_back(prefix + "task_accuracy_" + std::to_string(t) + "," + format_real(record.per_task_accuracy[t]));
  }
  for (std::size_t c = 0; c < record.per_class_accuracy.size(); ++c) {
    rows.push_back(prefix + "class_accuracy_" + std::to_string(c) + "," + format_real(record.per_class_accuracy[c]));
  }
  return rows;
}

namespace {

struct RunPlan {
  std::size_t index = 0;
  HeadSpec head;
  std::uint64_t seed = 0;
  std::optional<std::size_t> subset;  // 0 = all
  std::string scenario_label;
  std::string run_id;
};

// Serializes results.csv appends and run.json rewrites across workers.
class ResultSink {
 public:
  ResultSink(const ExperimentConfig& config, std::vector<RunStatus> initial)
      : config_(config), statuses_(std::move(initial)) {
    std::filesystem::create_directories(config.output_dir);
    csv_.open(config.output_dir / "results.csv", std::ios::trunc);
    if (!csv_) throw IoError("cannot create results.csv in " + config.output_dir.string());
    csv_ << kResultsHeader << '\n';
    csv_.flush();
    write_manifest_locked();
  }

  void finish_run(std::size_t index, RunStatus status, const std::vector<RunRecord>& records, std::uint64_t seed) {
    std::lock_guard lock(mutex_);
    for (const auto& record : records) {
      for (const auto& row : results_rows(record, seed, status.mask)) csv_ << row << '\n';
    }
    csv_.flush();
    statuses_[index] = std::move(status);
    write_manifest_locked();
  }

  std::vector<RunStatus> statuses() const {
    std::lock_guard lock(mutex_);
    return statuses_;
  }

 private:
  void write_manifest_locked() {
    json doc;
    doc["config"] = json::parse(config_.to_json());
    json runs = json::array();
    for (const auto& s : statuses_) {
      json r;
      r["run_id"] = s.run_id;
      r["seed"] = s.seed;
      r["head"] = s.head;
      r["mask"] = s.mask;
      r["scenario"] = s.scenario;
      r["status"] = s.ok ? "ok" : (s.error.empty() ? "pending" : "failed");
      if (!s.error.empty()) r["error"] = s.error;
      r["wall_time_s"] = s.wall_time;
      runs.push_back(r);
    }
    doc["runs"] = runs;
    doc["std_convention"] = "population";
    doc["interference_risk_orientation"] = InterferenceReport::kRiskOrientation;
    const auto tmp = config_.output_dir / "run.json.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, config_.output_dir / "run.json");
  }

  const ExperimentConfig& config_;
  mutable std::mutex mutex_;
  std::ofstream csv_;
  std::vector<RunStatus> statuses_;
};

std::string subset_label(std::size_t size) { return size == 0 ? "subset-all" : "subset-" + std::to_string(size); }

std::vector<RunRecord> execute(const RunPlan& plan, const ExperimentConfig& config,
                               const std::shared_ptr<const FeatureSet>& train, const FeatureSet& test) {
  const std::size_t n_classes = std::max(train->num_classes(), test.num_classes());
  Classifier head = make_classifier(plan.head, n_classes, train->dim(), plan.seed);
  TrainConfig tc = config.train;
  tc.shuffle_seed = plan.seed;

  RunOptions options;
  options.run_id = plan.run_id;
  options.head = plan.head.head_name();
  options.scenario = plan.scenario_label;

  std::optional<Snapshot> before, after;
  if (config.diagnostics) {
    options.on_task_start = [&](std::size_t t, const Classifier& h) {
      if (auto* g = std::get_if<GradientHead>(&h)) before = take_snapshot(*g, t);
    };
    options.on_task_end = [&](std::size_t t, const Classifier& h) {
      if (auto* g = std::get_if<GradientHead>(&h)) after = take_snapshot(*g, t);
    };
  }

  std::vector<RunRecord> records;
  if (plan.subset) {
    const std::size_t size = *plan.subset == 0 ? train->size() : *plan.subset;
    records.push_back(train_subset(head, *train, test, size, plan.seed, tc, options));
  } else {
    Scenario base = config.scenario_kind == DriftKind::incremental ? build_incremental(train, config.nb_tasks)
                    : config.scenario_kind == DriftKind::lifelong  ? build_lifelong(train, config.nb_tasks)
                                                                   : build_mixed(train);
    const Scenario scenario = permute_tasks(base, plan.seed);
    if (config.replay) {
      ReplayConfig rc = *config.replay;
      rc.selection_seed = plan.seed;
      records = train_with_replay(head, scenario, test, tc, rc, options);
    } else {
      records = train_scenario(head, scenario, test, tc, options);
    }
  }

  if (config.diagnostics) {
    if (const auto* g = std::get_if<GradientHead>(&head)) {
      const auto dir = config.output_dir / "diagnostics" / plan.run_id;
      std::filesystem::create_directories(dir);
      write_norm_bias_csv(norm_bias_report(*g), dir / "norm_bias.csv");
      write_interference_csvs(interference_report(*g, test), dir);
      if (before && after) write_weight_delta_csvs(weight_delta(*before, *after), dir);
    }
  }
  if (config.checkpoints) {
    const auto dir = config.output_dir / "checkpoints";
    std::filesystem::create_directories(dir);
    save_checkpoint(head, dir / (plan.run_id + ".head"));
  }
  return records;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  std::shared_ptr<const FeatureSet> train;
  std::shared_ptr<const FeatureSet> test;
  if (config.train_file) {
    train = std::make_shared<const FeatureSet>(read_feature_file(*config.train_file));
    test = std::make_shared<const FeatureSet>(read_feature_file(*config.test_file));
    if (train->dim() != test->dim()) throw ConfigError("train and test feature files differ in dimension");
  } else {
    auto data = generate_synthetic(config.synthetic);
    train = std::make_shared<const FeatureSet>(std::move(data.train));
    test = std::make_shared<const FeatureSet>(std::move(data.test));
  }

  std::string scenario_label;
  if (config.subset_sizes.empty()) {
    scenario_label = std::string(to_string(config.scenario_kind)) + "-" +
                     (config.scenario_kind == DriftKind::mixed ? std::string("pairs") : std::to_string(config.nb_tasks));
    if (config.replay) scenario_label += "-replay" + format_real(config.replay->replay_balance);
  }

  std::vector<RunPlan> plans;
  auto add_plan = [&](const HeadSpec& head, std::uint64_t seed, std::optional<std::size_t> subset) {
    RunPlan p;
    p.index = plans.size();
    p.head = head;
    p.seed = seed;
    p.subset = subset;
    p.scenario_label = subset ? subset_label(*subset) : scenario_label;
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "r%04zu", p.index);
    p.run_id = std::string(prefix) + "_" + head.to_string() + "_" + p.scenario_label + "_s" + std::to_string(seed);
    plans.push_back(std::move(p));
  };
  for (const auto& head : config.heads) {
    for (std::uint64_t seed : config.seeds) {
      if (config.subset_sizes.empty()) {
        add_plan(head, seed, std::nullopt);
      } else {
        for (std::size_t size : config.subset_sizes) add_plan(head, seed, size);
      }
    }
  }

  std::vector<RunStatus> initial;
  for (const auto& p : plans) {
    initial.push_back({p.run_id, p.seed, p.head.head_name(), p.head.mask_name(), p.scenario_label, false, "", 0.0});
  }
  ResultSink sink(config, initial);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < plans.size(); i = next++) {
      const RunPlan& plan = plans[i];
      RunStatus status = initial[i];
      const auto start = std::chrono::steady_clock::now();
      std::vector<RunRecord> records;
      try {
        records = execute(plan, config, train, *test);
        status.ok = true;
      } catch (const std::exception& e) {
        status.ok = false;
        status.error = e.what();
        records.clear();
      }
      status.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      sink.finish_run(i, std::move(status), records, plan.seed);
    }
  };

  const std::size_t workers = std::min(config.jobs, plans.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  return {sink.statuses()};
}

}  // namespace driftbench
