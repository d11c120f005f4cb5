#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace driftbench {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Example {
  Vector features;
  std::uint32_t class_label = 0;
  // Mode, environment or object id: the second annotation level a lifelong
  // or mixed scenario slices on.
  std::uint32_t domain_label = 0;

  bool operator==(const Example& other) const {
    return class_label == other.class_label && domain_label == other.domain_label &&
           features.size() == other.features.size() && features == other.features;
  }
};

/// Immutable labeled collection of feature vectors.
///
/// The constructor validates every record: feature length equals dim, labels
/// are below num_classes, entries are finite. Violations throw
/// ValidationError. Once built, a FeatureSet is safe to share between threads.
class FeatureSet {
 public:
  FeatureSet(std::size_t dim, std::size_t num_classes, std::vector<Example> examples);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }

  const Example& operator[](std::size_t i) const { return examples_[i]; }
  const std::vector<Example>& examples() const noexcept { return examples_; }

  // Sorted distinct labels actually present.
  std::vector<std::uint32_t> observed_classes() const;
  std::vector<std::uint32_t> observed_domains() const;

  // New set holding the given records in the given order, same metadata.
  FeatureSet select(const std::vector<std::size_t>& indices) const;

  bool operator==(const FeatureSet& other) const = default;

 private:
  std::size_t dim_;
  std::size_t num_classes_;
  std::vector<Example> examples_;
};

/// Gaussian class/mode mixture standing in for frozen-encoder embeddings.
///
/// Every (class, mode) pair owns one cluster center drawn from
/// N(0, center_scale^2 I); samples are N(center, stddev^2 I). The mode index
/// becomes the domain label.
struct SyntheticSpec {
  std::size_t num_classes = 10;
  std::size_t modes_per_class = 5;
  std::size_t dim = 32;
  double center_scale = 1.0;
  double stddev = 0.3;
  std::size_t train_per_mode = 100;
  std::size_t test_per_mode = 20;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct SyntheticData {
  FeatureSet train;
  FeatureSet test;
};

// Deterministic for a fixed spec. Values are rounded to float so that they
// survive the FSET1 file format unchanged.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

inline constexpr std::size_t kFsetHeaderBytes = 24;

void write_feature_file(const FeatureSet& set, const std::filesystem::path& path);
FeatureSet read_feature_file(const std::filesystem::path& path);

}  // namespace driftbench
