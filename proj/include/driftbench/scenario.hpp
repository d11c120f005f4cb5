#pragma once

#include "driftbench/feature_data.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace driftbench {

enum class DriftKind { incremental, lifelong, mixed };

std::string_view to_string(DriftKind kind);
DriftKind parse_drift_kind(std::string_view name);

struct TaskView {
  std::size_t task_index = 0;
  std::vector<std::size_t> example_indices;
  std::vector<std::uint32_t> classes_present;  // sorted
  std::vector<std::uint32_t> domains_present;  // sorted

  bool operator==(const TaskView&) const = default;
};

/// Ordered task stream over a shared FeatureSet.
///
/// Construction checks the drift-kind invariants (disjoint classes for
/// incremental, full class set per task with disjoint domains for lifelong,
/// one (class, domain) atom per task for mixed) and throws ScenarioError if
/// they do not hold.
class Scenario {
 public:
  Scenario(std::shared_ptr<const FeatureSet> source, std::vector<TaskView> tasks, DriftKind kind);

  const FeatureSet& source() const noexcept { return *source_; }
  const std::shared_ptr<const FeatureSet>& source_ptr() const noexcept { return source_; }
  const std::vector<TaskView>& tasks() const noexcept { return tasks_; }
  std::size_t num_tasks() const noexcept { return tasks_.size(); }
  DriftKind kind() const noexcept { return kind_; }

  // Short label such as "incremental-5", used in reports.
  std::string describe() const;

 private:
  void validate() const;

  std::shared_ptr<const FeatureSet> source_;
  std::vector<TaskView> tasks_;
  DriftKind kind_;
};

Scenario build_incremental(std::shared_ptr<const FeatureSet> set, std::size_t nb_tasks);
Scenario build_lifelong(std::shared_ptr<const FeatureSet> set, std::size_t nb_tasks);
Scenario build_mixed(std::shared_ptr<const FeatureSet> set);

// Seed 0 keeps the original order; any other seed draws a uniform permutation.
Scenario permute_tasks(const Scenario& scenario, std::uint64_t seed);

// Uniform sample without replacement of min(size, |set|) records, kept in
// their original relative order. The stratified variant deals examples
// round-robin across classes from per-class shuffled pools.
FeatureSet sample_subset(const FeatureSet& set, std::size_t size, std::uint64_t seed,
                         bool stratified = false);

}  // namespace driftbench
