#include "driftbench/trainer.hpp"

#include "driftbench/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

namespace driftbench {

void TrainConfig::validate() const {
  if (epochs_per_task < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (lr && !(*lr > 0.0 && std::isfinite(*lr))) throw ConfigError("train.lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
}

void ReplayConfig::validate() const {
  if (buffer_cap_per_class < 1) throw ConfigError("replay.cap_per_class must be >= 1");
  if (!(replay_balance > 0.0 && replay_balance <= 1.0)) {
    throw ConfigError("replay.balance must lie in (0, 1]");
  }
}

bool RunRecord::same_metrics(const RunRecord& other) const {
  return run_id == other.run_id && head == other.head && scenario == other.scenario &&
         task_index == other.task_index && epoch == other.epoch && overall_accuracy == other.overall_accuracy &&
         per_task_accuracy == other.per_task_accuracy && per_class_accuracy == other.per_class_accuracy;
}

namespace {

bool contains(const std::vector<std::uint32_t>& sorted, std::uint32_t value) {
  return std::binary_search(sorted.begin(), sorted.end(), value);
}

bool in_footprint(const TaskView& task, DriftKind kind, const Example& ex) {
  switch (kind) {
    case DriftKind::incremental: return contains(task.classes_present, ex.class_label);
    case DriftKind::lifelong: return contains(task.domains_present, ex.domain_label);
    case DriftKind::mixed:
      return contains(task.classes_present, ex.class_label) && contains(task.domains_present, ex.domain_label);
  }
  return false;
}

using Clock = std::chrono::steady_clock;

class Recorder {
 public:
  Recorder(const RunOptions& options, const FeatureSet& test, const Scenario& scenario)
      : options_(options), test_(test), scenario_(scenario), start_(Clock::now()) {}

  void record(const Classifier& head, std::size_t task, std::size_t epoch) {
    const Evaluation eval = evaluate(head, test_, scenario_);
    RunRecord r;
    r.run_id = options_.run_id;
    r.head = options_.head;
    r.scenario = options_.scenario.empty() ? scenario_.describe() : options_.scenario;
    r.task_index = task;
    r.epoch = epoch;
    r.overall_accuracy = eval.overall;
    r.per_task_accuracy = eval.per_task;
    r.per_class_accuracy = eval.per_class;
    r.wall_time = std::chrono::duration<double>(Clock::now() - start_).count();
    records_.push_back(std::move(r));
  }

  std::vector<RunRecord> take() { return std::move(records_); }

 private:
  const RunOptions& options_;
  const FeatureSet& test_;
  const Scenario& scenario_;
  Clock::time_point start_;
  std::vector<RunRecord> records_;
};

void check_compatible(const Classifier& head, const FeatureSet& train, const FeatureSet& test) {
  if (dim(head) != train.dim() || dim(head) != test.dim()) {
    throw ShapeError("head dim " + std::to_string(dim(head)) + " does not match feature dim " +
                     std::to_string(train.dim()) + "/" + std::to_string(test.dim()));
  }
  if (num_classes(head) < train.num_classes() || num_classes(head) < test.num_classes()) {
    throw ShapeError("head has fewer outputs than the data declares classes");
  }
}

// One optimizer step on the given training indices.
void gradient_step(GradientHead& head, const FeatureSet& source, std::span<const std::size_t> indices, double lr,
                   double momentum) {
  const auto batch = make_batch(source, indices);
  std::vector<std::uint32_t> targets;
  targets.reserve(batch.size());
  for (const auto& s : batch) targets.push_back(s.label);
  const HeadGradient g = loss_and_gradient(head, batch);
  const HeadParams masked = apply_mask(g, targets, head.mask());
  sgd_momentum_step(head, masked, lr, momentum, updatable_rows(targets, head.mask(), head.num_classes()));
}

void observe_all(Classifier& head, const FeatureSet& source, const std::vector<std::size_t>& indices) {
  std::visit(
      [&](auto& h) {
        using T = std::decay_t<decltype(h)>;
        if constexpr (!std::is_same_v<T, GradientHead>) {
          for (std::size_t i : indices) h.observe(source[i].features, source[i].class_label);
          if constexpr (std::is_same_v<T, SldaHead>) h.refresh();
        }
      },
      head);
}

}  // namespace

Evaluation evaluate(const Classifier& head, const FeatureSet& test_set, const Scenario& scenario) {
  if (test_set.empty()) throw ValidationError("cannot evaluate on an empty test set");
  if (dim(head) != test_set.dim()) throw ShapeError("test set dimension does not match head");

  const std::size_t n_tasks = scenario.num_tasks();
  const std::size_t n_classes = test_set.num_classes();
  std::vector<std::size_t> task_hits(n_tasks, 0), class_hits(n_classes, 0);
  Evaluation eval;
  eval.per_task_count.assign(n_tasks, 0);
  eval.per_class_count.assign(n_classes, 0);
  std::size_t hits = 0;

  for (const Example& ex : test_set.examples()) {
    const bool ok = predict(head, ex.features) == ex.class_label;
    hits += ok;
    ++eval.per_class_count[ex.class_label];
    class_hits[ex.class_label] += ok;
    for (std::size_t t = 0; t < n_tasks; ++t) {
      if (in_footprint(scenario.tasks()[t], scenario.kind(), ex)) {
        ++eval.per_task_count[t];
        task_hits[t] += ok;
      }
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  eval.overall = ratio(hits, test_set.size());
  for (std::size_t t = 0; t < n_tasks; ++t) eval.per_task.push_back(ratio(task_hits[t], eval.per_task_count[t]));
  for (std::size_t c = 0; c < n_classes; ++c) eval.per_class.push_back(ratio(class_hits[c], eval.per_class_count[c]));
  return eval;
}

std::vector<RunRecord> train_scenario(Classifier& head, const Scenario& scenario, const FeatureSet& test_set,
                                      const TrainConfig& config, const RunOptions& options) {
  config.validate();
  const FeatureSet& source = scenario.source();
  check_compatible(head, source, test_set);
  Recorder recorder(options, test_set, scenario);
  Rng rng(config.shuffle_seed);

  for (const TaskView& task : scenario.tasks()) {
    if (options.on_task_start) options.on_task_start(task.task_index, head);
    std::vector<std::size_t> order = task.example_indices;

    if (auto* g = std::get_if<GradientHead>(&head)) {
      const double lr = config.lr.value_or(default_learning_rate(g->kind()));
      for (std::size_t epoch = 0; epoch < config.epochs_per_task; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
          const std::size_t len = std::min(config.batch_size, order.size() - start);
          gradient_step(*g, source, std::span<const std::size_t>(order).subspan(start, len), lr, config.momentum);
        }
        if (config.eval_every_epoch || epoch + 1 == config.epochs_per_task) {
          recorder.record(head, task.task_index, epoch);
        }
      }
    } else {
      rng.shuffle(std::span<std::size_t>(order));
      observe_all(head, source, order);
      recorder.record(head, task.task_index, 0);
    }
    if (options.on_task_end) options.on_task_end(task.task_index, head);
  }
  return recorder.take();
}

RunRecord train_subset(Classifier& head, const FeatureSet& train_set, const FeatureSet& test_set,
                       std::size_t subset_size, std::uint64_t seed, const TrainConfig& config,
                       const RunOptions& options) {
  auto subset = std::make_shared<const FeatureSet>(sample_subset(train_set, subset_size, seed));
  const Scenario iid = build_incremental(subset, 1);
  TrainConfig cfg = config;
  cfg.eval_every_epoch = false;
  auto records = train_scenario(head, iid, test_set, cfg, options);
  return records.back();
}

void ReplayBuffer::add_task(const FeatureSet& source, const std::vector<std::size_t>& indices, Rng& rng) {
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i : indices) by_class[source[i].class_label].push_back(i);
  for (auto& [label, pool] : by_class) {
    if (pools_.contains(label)) continue;
    const std::size_t keep = std::min(cap_, pool.size());
    for (std::size_t i = 0; i < keep; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(keep);
    pools_.emplace(label, std::move(pool));
  }
}

ReplayBatchSampler::ReplayBatchSampler(std::vector<std::size_t> new_indices, std::size_t num_new_classes,
                                       const ReplayBuffer& buffer, double balance, Rng& rng)
    : new_indices_(std::move(new_indices)), rng_(rng) {
  for (const auto& [label, pool] : buffer.pools()) {
    if (!pool.empty()) old_pools_.push_back(&pool);
  }
  if (!old_pools_.empty() && num_new_classes > 0) {
    const double weight = balance * static_cast<double>(old_pools_.size());
    replay_probability_ = weight / (static_cast<double>(num_new_classes) + weight);
  }
}

std::vector<std::size_t> ReplayBatchSampler::next_batch(std::size_t batch_size) {
  std::vector<std::size_t> batch;
  bool has_new = false;
  while (batch.size() < batch_size) {
    if (replay_probability_ > 0.0 && rng_.uniform() < replay_probability_) {
      const auto& pool = *old_pools_[rng_.below(old_pools_.size())];
      batch.push_back(pool[rng_.below(pool.size())]);
    } else {
      if (cursor_ == new_indices_.size()) break;
      batch.push_back(new_indices_[cursor_++]);
      has_new = true;
    }
  }
  // Replay draws left over after the last new example end the epoch unused.
  if (!has_new && cursor_ == new_indices_.size()) batch.clear();
  return batch;
}

std::vector<RunRecord> train_with_replay(Classifier& head, const Scenario& scenario, const FeatureSet& test_set,
                                         const TrainConfig& config, const ReplayConfig& replay,
                                         const RunOptions& options) {
  config.validate();
  replay.validate();
  if (scenario.kind() != DriftKind::incremental) throw ConfigError("replay training requires an incremental scenario");
  auto* g = std::get_if<GradientHead>(&head);
  if (!g) throw ConfigError("replay training requires a gradient head");
  const FeatureSet& source = scenario.source();
  check_compatible(head, source, test_set);

  Recorder recorder(options, test_set, scenario);
  Rng shuffle_rng(config.shuffle_seed);
  Rng selection_rng(derive_seed(replay.selection_seed, 0));
  Rng replay_rng(derive_seed(replay.selection_seed, 1));
  ReplayBuffer buffer(replay.buffer_cap_per_class);
  const double lr = config.lr.value_or(default_learning_rate(g->kind()));

  for (const TaskView& task : scenario.tasks()) {
    if (options.on_task_start) options.on_task_start(task.task_index, head);
    std::vector<std::size_t> order = task.example_indices;
    for (std::size_t epoch = 0; epoch < config.epochs_per_task; ++epoch) {
      shuffle_rng.shuffle(std::span<std::size_t>(order));
      ReplayBatchSampler sampler(order, task.classes_present.size(), buffer, replay.replay_balance, replay_rng);
      for (auto batch = sampler.next_batch(config.batch_size); !batch.empty();
           batch = sampler.next_batch(config.batch_size)) {
        gradient_step(*g, source, batch, lr, config.momentum);
      }
      if (config.eval_every_epoch || epoch + 1 == config.epochs_per_task) {
        recorder.record(head, task.task_index, epoch);
      }
    }
    buffer.add_task(source, task.example_indices, selection_rng);
    if (options.on_task_end) options.on_task_end(task.task_index, head);
  }
  return recorder.take();
}

}  // namespace driftbench
