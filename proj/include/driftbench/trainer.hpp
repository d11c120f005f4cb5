#pragma once

#include "driftbench/classifier.hpp"
#include "driftbench/random.hpp"
#include "driftbench/scenario.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace driftbench {

struct TrainConfig {
  std::size_t epochs_per_task = 5;
  std::size_t batch_size = 32;
  // Unset means default_learning_rate(kind).
  std::optional<double> lr;
  double momentum = 0.9;
  std::uint64_t shuffle_seed = 0;
  bool eval_every_epoch = true;

  void validate() const;
};

struct ReplayConfig {
  std::size_t buffer_cap_per_class = 2000;
  // Expected instances of each replayed class per instance of each new class.
  double replay_balance = 1.0;
  std::uint64_t selection_seed = 0;

  void validate() const;
};

struct Evaluation {
  double overall = 0.0;
  // Accuracy on the test examples inside each task's footprint (class set for
  // incremental, domain set for lifelong, (class, domain) pair for mixed).
  // Empty footprints report 0 with a count of 0.
  std::vector<double> per_task;
  std::vector<std::size_t> per_task_count;
  std::vector<double> per_class;
  std::vector<std::size_t> per_class_count;
};

struct RunRecord {
  std::string run_id;
  std::string head;
  std::string scenario;
  std::size_t task_index = 0;
  std::size_t epoch = 0;
  double overall_accuracy = 0.0;
  std::vector<double> per_task_accuracy;
  std::vector<double> per_class_accuracy;
  double wall_time = 0.0;  // seconds since the run started

  // Equality on everything except wall time.
  bool same_metrics(const RunRecord& other) const;
};

// Labels copied into every record plus optional task-boundary callbacks,
// e.g. to take diagnostic snapshots.
struct RunOptions {
  std::string run_id;
  std::string head;
  std::string scenario;
  std::function<void(std::size_t task_index, const Classifier&)> on_task_start;
  std::function<void(std::size_t task_index, const Classifier&)> on_task_end;
};

Evaluation evaluate(const Classifier& head, const FeatureSet& test_set, const Scenario& scenario);

/// Continual training over the scenario's tasks in order.
///
/// Gradient heads run epochs_per_task shuffled mini-batch epochs per task
/// (loss, mask, momentum step) and are evaluated on the full test set after
/// every epoch. Similarity heads observe each task once and are evaluated
/// once per task with epoch 0.
std::vector<RunRecord> train_scenario(Classifier& head, const Scenario& scenario, const FeatureSet& test_set,
                                      const TrainConfig& config, const RunOptions& options = {});

// i.i.d. training on a random subset of the training set; returns the final record.
RunRecord train_subset(Classifier& head, const FeatureSet& train_set, const FeatureSet& test_set,
                       std::size_t subset_size, std::uint64_t seed, const TrainConfig& config,
                       const RunOptions& options = {});

/// Per-class pools of training-set indices kept for rehearsal.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t cap_per_class) : cap_(cap_per_class) {}

  // Adds up to cap random examples of every class in `indices` not yet buffered.
  void add_task(const FeatureSet& source, const std::vector<std::size_t>& indices, Rng& rng);

  const std::map<std::uint32_t, std::vector<std::size_t>>& pools() const noexcept { return pools_; }
  std::size_t cap_per_class() const noexcept { return cap_; }
  bool empty() const noexcept { return pools_.empty(); }

 private:
  std::size_t cap_;
  std::map<std::uint32_t, std::vector<std::size_t>> pools_;
};

/// Composes mini-batches from the new task's examples plus buffered ones.
///
/// Each slot is a replay draw with probability
///   p = balance * n_old / (n_new + balance * n_old)
/// (uniform old class, then uniform buffered example, with replacement), and
/// otherwise the next unseen new-task example. An epoch ends when the new
/// examples run out.
class ReplayBatchSampler {
 public:
  ReplayBatchSampler(std::vector<std::size_t> new_indices, std::size_t num_new_classes,
                     const ReplayBuffer& buffer, double balance, Rng& rng);

  // Empty once the new-task examples are exhausted.
  std::vector<std::size_t> next_batch(std::size_t batch_size);
  double replay_probability() const noexcept { return replay_probability_; }

 private:
  std::vector<std::size_t> new_indices_;
  std::size_t cursor_ = 0;
  std::vector<const std::vector<std::size_t>*> old_pools_;
  double replay_probability_ = 0.0;
  Rng& rng_;
};

// Incremental training of a gradient head with a rehearsal buffer filled
// after every task.
std::vector<RunRecord> train_with_replay(Classifier& head, const Scenario& scenario, const FeatureSet& test_set,
                                         const TrainConfig& config, const ReplayConfig& replay,
                                         const RunOptions& options = {});

}  // namespace driftbench
