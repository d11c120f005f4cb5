#include "driftbench/scenario.hpp"

#include "driftbench/error.hpp"
#include "driftbench/random.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace driftbench {

std::string_view to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::incremental: return "incremental";
    case DriftKind::lifelong: return "lifelong";
    case DriftKind::mixed: return "mixed";
  }
  return "unknown";
}

DriftKind parse_drift_kind(std::string_view name) {
  if (name == "incremental") return DriftKind::incremental;
  if (name == "lifelong") return DriftKind::lifelong;
  if (name == "mixed") return DriftKind::mixed;
  throw ConfigError("unknown scenario kind '" + std::string(name) + "'");
}

namespace {

TaskView make_view(const FeatureSet& set, std::size_t task_index, std::vector<std::size_t> indices) {
  std::set<std::uint32_t> classes, domains;
  for (std::size_t i : indices) {
    classes.insert(set[i].class_label);
    domains.insert(set[i].domain_label);
  }
  return {task_index, std::move(indices), {classes.begin(), classes.end()}, {domains.begin(), domains.end()}};
}

bool disjoint(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return false;
    if (*ia < *ib) ++ia; else ++ib;
  }
  return true;
}

void require_source(const std::shared_ptr<const FeatureSet>& set) {
  if (!set) throw ScenarioError("scenario requires a feature set");
  if (set->empty()) throw ScenarioError("cannot build a scenario over an empty feature set");
}

}  // namespace

Scenario::Scenario(std::shared_ptr<const FeatureSet> source, std::vector<TaskView> tasks, DriftKind kind)
    : source_(std::move(source)), tasks_(std::move(tasks)), kind_(kind) {
  validate();
}

void Scenario::validate() const {
  require_source(source_);
  if (tasks_.empty()) throw ScenarioError("scenario has no tasks");

  std::vector<char> seen(source_->size(), 0);
  for (const auto& task : tasks_) {
    if (task.example_indices.empty()) {
      throw ScenarioError("task " + std::to_string(task.task_index) + " is empty");
    }
    for (std::size_t i : task.example_indices) {
      if (i >= source_->size()) throw ScenarioError("task index out of bounds");
      if (seen[i]++) throw ScenarioError("example " + std::to_string(i) + " appears in two tasks");
    }
    if (make_view(*source_, task.task_index, task.example_indices) != task) {
      throw ScenarioError("task " + std::to_string(task.task_index) + " label sets are inconsistent");
    }
  }

  const auto all_classes = source_->observed_classes();
  switch (kind_) {
    case DriftKind::incremental: {
      std::size_t covered = 0;
      for (std::size_t i = 0; i < tasks_.size(); ++i) {
        covered += tasks_[i].classes_present.size();
        for (std::size_t j = i + 1; j < tasks_.size(); ++j) {
          if (!disjoint(tasks_[i].classes_present, tasks_[j].classes_present)) {
            throw ScenarioError("incremental tasks share classes");
          }
        }
      }
      if (covered != all_classes.size()) throw ScenarioError("incremental tasks do not cover all classes");
      break;
    }
    case DriftKind::lifelong:
      for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (tasks_[i].classes_present != all_classes) {
          throw ScenarioError("lifelong task " + std::to_string(tasks_[i].task_index) +
                              " is missing classes");
        }
        for (std::size_t j = i + 1; j < tasks_.size(); ++j) {
          if (!disjoint(tasks_[i].domains_present, tasks_[j].domains_present)) {
            throw ScenarioError("lifelong tasks share domains");
          }
        }
      }
      break;
    case DriftKind::mixed:
      for (const auto& task : tasks_) {
        if (task.classes_present.size() != 1 || task.domains_present.size() != 1) {
          throw ScenarioError("mixed task " + std::to_string(task.task_index) +
                              " is not a single (class, domain) pair");
        }
      }
      break;
  }
}

std::string Scenario::describe() const {
  return std::string(to_string(kind_)) + "-" + std::to_string(tasks_.size());
}

Scenario build_incremental(std::shared_ptr<const FeatureSet> set, std::size_t nb_tasks) {
  require_source(set);
  const auto classes = set->observed_classes();
  if (nb_tasks == 0 || classes.size() % nb_tasks != 0) {
    throw ConfigError("nb_tasks=" + std::to_string(nb_tasks) + " does not divide " +
                      std::to_string(classes.size()) + " observed classes");
  }
  const std::size_t per_task = classes.size() / nb_tasks;
  std::map<std::uint32_t, std::size_t> task_of;
  for (std::size_t i = 0; i < classes.size(); ++i) task_of[classes[i]] = i / per_task;

  std::vector<std::vector<std::size_t>> buckets(nb_tasks);
  for (std::size_t i = 0; i < set->size(); ++i) buckets[task_of[(*set)[i].class_label]].push_back(i);

  std::vector<TaskView> tasks;
  for (std::size_t t = 0; t < nb_tasks; ++t) tasks.push_back(make_view(*set, t, std::move(buckets[t])));
  return Scenario(std::move(set), std::move(tasks), DriftKind::incremental);
}

Scenario build_lifelong(std::shared_ptr<const FeatureSet> set, std::size_t nb_tasks) {
  require_source(set);
  const auto domains = set->observed_domains();
  if (nb_tasks == 0 || nb_tasks > domains.size() || domains.size() % nb_tasks != 0) {
    throw ConfigError("nb_tasks=" + std::to_string(nb_tasks) + " cannot evenly group " +
                      std::to_string(domains.size()) + " domains");
  }
  const std::size_t per_task = domains.size() / nb_tasks;
  std::map<std::uint32_t, std::size_t> task_of;
  for (std::size_t i = 0; i < domains.size(); ++i) task_of[domains[i]] = i / per_task;

  std::vector<std::vector<std::size_t>> buckets(nb_tasks);
  for (std::size_t i = 0; i < set->size(); ++i) buckets[task_of[(*set)[i].domain_label]].push_back(i);

  std::vector<TaskView> tasks;
  for (std::size_t t = 0; t < nb_tasks; ++t) tasks.push_back(make_view(*set, t, std::move(buckets[t])));
  return Scenario(std::move(set), std::move(tasks), DriftKind::lifelong);
}

Scenario build_mixed(std::shared_ptr<const FeatureSet> set) {
  require_source(set);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>> atoms;
  for (std::size_t i = 0; i < set->size(); ++i) {
    atoms[{(*set)[i].class_label, (*set)[i].domain_label}].push_back(i);
  }
  std::vector<TaskView> tasks;
  for (auto& [key, indices] : atoms) tasks.push_back(make_view(*set, tasks.size(), std::move(indices)));
  return Scenario(std::move(set), std::move(tasks), DriftKind::mixed);
}

Scenario permute_tasks(const Scenario& scenario, std::uint64_t seed) {
  std::vector<TaskView> tasks = scenario.tasks();
  if (seed != 0) {
    Rng rng(seed);
    rng.shuffle(std::span<TaskView>(tasks));
  }
  for (std::size_t t = 0; t < tasks.size(); ++t) tasks[t].task_index = t;
  return Scenario(scenario.source_ptr(), std::move(tasks), scenario.kind());
}

FeatureSet sample_subset(const FeatureSet& set, std::size_t size, std::uint64_t seed, bool stratified) {
  if (size == 0) throw ConfigError("subset size must be at least 1");
  if (size >= set.size()) return set;

  Rng rng(seed);
  std::vector<std::size_t> picked;
  if (!stratified) {
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Partial Fisher-Yates: the first `size` slots become the sample.
    for (std::size_t i = 0; i < size; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
      std::swap(order[i], order[j]);
    }
    picked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(size));
  } else {
    std::map<std::uint32_t, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < set.size(); ++i) pools[set[i].class_label].push_back(i);
    for (auto& [label, pool] : pools) rng.shuffle(std::span<std::size_t>(pool));
    std::vector<std::size_t> cursor(pools.size(), 0);
    while (picked.size() < size) {
      std::size_t k = 0;
      for (auto& [label, pool] : pools) {
        if (picked.size() < size && cursor[k] < pool.size()) picked.push_back(pool[cursor[k]++]);
        ++k;
      }
    }
  }
  std::sort(picked.begin(), picked.end());
  return set.select(picked);
}

}  // namespace driftbench
